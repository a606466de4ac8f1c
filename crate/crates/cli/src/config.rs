use std::path::{Path, PathBuf};

use serde::Deserialize;

use pmc_core::GroupSpec;

/// Optional JSON configuration; command-line flags take precedence.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub group: Option<GroupSpec>,
    pub field: Option<PathBuf>,
    /// Second field for two-resolution convergence slopes.
    pub field2: Option<PathBuf>,
    /// Prescribed mean curvature expression.
    pub h: Option<String>,
    pub steps: Option<usize>,
    pub resolutions: Option<Vec<usize>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative Gauss map PDE residual accepted by `reconstruct`.
    pub residual: Option<f64>,
    /// Integration-order gap above which `reconstruct` warns.
    pub integrability: Option<f64>,
    /// Closure defect (relative to the diameter) accepted by `sphere`.
    pub closure: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(r) = &self.resolutions {
            if r.is_empty() || r.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("resolutions must be non-empty and strictly increasing, got {r:?}"));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [("residual", t.residual), ("integrability", t.integrability), ("closure", t.closure)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(format!("tolerance {name} must be positive, got {v}"));
                }
            }
        }
        if self.threads == Some(0) {
            return Err("threads must be at least 1".into());
        }
        Ok(())
    }
}
