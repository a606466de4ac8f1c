use num_complex::Complex64;
use thiserror::Error;

use crate::potential::Chart;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group parameters: {0}")]
    InvalidGroup(String),

    #[error("operation needs a semidirect (or abelian) model, got {0}")]
    NotSemidirect(String),

    #[error("potential vanishes: |R| = {magnitude:.3e} at {chart:?}-chart value {value}")]
    PotentialZero {
        value: Complex64,
        chart: Chart,
        magnitude: f64,
    },

    #[error("potential is identically zero (max |R| = {max_abs:.3e} over the scan grid)")]
    IdenticallyZero { max_abs: f64 },

    #[error("vector is not unit length (|v| = {norm})")]
    NotUnit { norm: f64 },

    #[error("finite-difference stencil unavailable at node ({i}, {j})")]
    StencilUnavailable { i: usize, j: usize },

    #[error("Gauss map is degenerate (g_z = 0) at node ({i}, {j})")]
    GaussMapDegenerate { i: usize, j: usize },

    #[error("no reconstruction backend for {0}")]
    BackendUnsupported(String),

    #[error("tangent vectors degenerate at node ({i}, {j})")]
    DegenerateTangent { i: usize, j: usize },

    #[error("Gauss map PDE residual {residual:.3e} exceeds {tolerance:.3e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("profile pinches: meridian curvature {kappa:.3e} at theta = {theta}")]
    ProfilePinch { theta: f64, kappa: f64 },

    #[error("profile does not close: defect {defect:.3e} > tolerance {tolerance:.3e}")]
    ClosureDefect { defect: f64, tolerance: f64 },

    #[error("inverse Gauss map lookup failed at {chart:?}-chart value {value}")]
    InverseInterpolationFailure { value: Complex64, chart: Chart },

    #[error("Gauss map value {value} ({chart:?} chart) is outside the model's interpolation hull")]
    ModelDomainMiss { value: Complex64, chart: Chart },

    #[error("zero of Q touches a plaquette corner near node ({i}, {j})")]
    BoundaryZero { i: usize, j: usize },

    #[error("argument winding is not an integer (defect {defect:.3})")]
    WindingDefect { defect: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical precondition (vanishing potential,
    /// degenerate Gauss map, non-closing profile, ...) as opposed to
    /// malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PotentialZero { .. }
                | Error::IdenticallyZero { .. }
                | Error::GaussMapDegenerate { .. }
                | Error::DegenerateTangent { .. }
                | Error::ResidualTooLarge { .. }
                | Error::ProfilePinch { .. }
                | Error::ClosureDefect { .. }
                | Error::InverseInterpolationFailure { .. }
                | Error::ModelDomainMiss { .. }
                | Error::BoundaryZero { .. }
                | Error::WindingDefect { .. }
                | Error::StencilUnavailable { .. }
        )
    }
}
