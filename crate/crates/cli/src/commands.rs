use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use pmc_core::fixtures;
use pmc_core::gaussfield::pde_residual;
use pmc_core::io::{load_field, load_qdiff, save_field, save_json, save_qdiff, FieldMeta};
use pmc_core::liegroup::CriticalThreshold;
use pmc_core::modelsphere::{equator_radius, rotational_model, round_model, CLOSURE_TOL};
use pmc_core::potential::{potential_eval, zero_scan};
use pmc_core::qdiff::{
    contact_residual, dbar_identity_residual, hopf_differential_field, q_differential, zeros_and_indices, Topology,
};
use pmc_core::weierstrass::{
    mesh_gauss_map, reconstruct, relative_pde_residual, round_trip, translation_defect, write_obj, MeshSidecar,
    ReconstructOptions,
};
use pmc_core::{Backend, Chart, ChartPoint, GroupSpec, ModelSphere, PrescribedH, SurfaceMesh, TwoChartComplexField};

use crate::config::ExperimentConfig;
use crate::expr;
use crate::output::{write_json, write_node_csv};
use crate::CliError;

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "pmc", version, about = "Prescribed mean curvature surfaces in metric Lie groups")]
pub struct Cli {
    /// JSON experiment configuration; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (1 is the reference ordering).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory [default: pmc-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Isomorphism class, mu values and critical mean curvature of a group.
    Classify(GroupArgs),
    /// Evaluate the potential R(H, q) or scan it for zeros.
    Potential(PotentialArgs),
    /// Gauss map PDE residual of a field.
    Residual(ResidualArgs),
    /// Integrate a surface from its Gauss map and mean curvature.
    Reconstruct(ReconstructArgs),
    /// Rotational sphere of prescribed mean curvature.
    Sphere(SphereArgs),
    /// Quadratic differential Q of a field against the model sphere.
    Qdiff(QdiffArgs),
    /// Zeros of a quadratic differential with their windings.
    Index(IndexArgs),
    /// Surface -> (g, H) -> surface round trips on analytic fixtures.
    Roundtrip(RoundtripArgs),
}

#[derive(Debug, Args)]
pub struct GroupArgs {
    /// `r3`, `h3`, `s3`, `nil3`, `sol3`, `h2xr`, a JSON object or a JSON file.
    #[arg(long)]
    pub group: Option<String>,
    /// Structure constants `c1,c2,c3`.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["group", "nonunimodular"])]
    pub unimodular: Option<String>,
    /// Semidirect parameters `a,b`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "group")]
    pub nonunimodular: Option<String>,
}

#[derive(Debug, Args)]
pub struct PotentialArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    /// Mean curvature value.
    #[arg(long = "h", default_value_t = 0.0, allow_hyphen_values = true)]
    pub h: f64,
    /// Point `re,im` at which to evaluate R.
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<String>,
    /// Chart of `--q`.
    #[arg(long, default_value = "q")]
    pub chart: String,
    /// Scan both charts on an N x N lattice for zeros.
    #[arg(long)]
    pub scan: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FieldFixture {
    /// `g(z) = z` with constant H.
    RoundSphere,
}

#[derive(Debug, Args)]
pub struct ResidualArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    /// Field CSV (with its `.json` sidecar).
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Second field, for a convergence slope.
    #[arg(long)]
    pub field2: Option<PathBuf>,
    /// Generate the field instead of reading it.
    #[arg(long, value_enum, conflicts_with = "field")]
    pub fixture: Option<FieldFixture>,
    /// Cells per side of a generated field.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Half width of the parameter square of a generated field. Up to
    /// `1/sqrt(2)` every node stays in the `q` chart, where `g(z) = z` is
    /// linear and finite differences are exact.
    #[arg(long, default_value_t = 0.7)]
    pub half: f64,
    /// Mean curvature of a generated field.
    #[arg(long, default_value_t = 1.0)]
    pub h0: f64,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Ambient position of the base node, `x,y,z` or `x0,x1,x2,x3`.
    #[arg(long, allow_hyphen_values = true)]
    pub base: Option<String>,
    /// Maximal relative PDE residual of the input field.
    #[arg(long)]
    pub residual_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SphereArgs {
    /// Prescribed mean curvature, e.g. `1+0.3*t^2`.
    #[arg(long = "h")]
    pub h: Option<String>,
    /// Integration steps on the polar angle.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Also write the two isothermal patches with this many nodes per side.
    #[arg(long)]
    pub patch_n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct QdiffArgs {
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Prescribed mean curvature; defaults to the one recorded with the field.
    #[arg(long = "h")]
    pub h: Option<String>,
    /// Integration steps of the model profile.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Parameter chart of the field's grid.
    #[arg(long, default_value = "q")]
    pub param_chart: String,
    /// Also write the Hopf differential.
    #[arg(long)]
    pub hopf: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TopologyArg {
    Disk,
    Sphere,
    Torus,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Q CSV files written by `qdiff` (two for the sphere).
    #[arg(long = "q", required = true)]
    pub q: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "disk")]
    pub topology: TopologyArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MeshFixture {
    EuclideanSphere,
    HyperbolicSphere,
    S3Sphere,
    Cylinder,
}

#[derive(Debug, Args)]
pub struct RoundtripArgs {
    #[arg(long, value_enum, default_value = "euclidean-sphere")]
    pub fixture: MeshFixture,
    /// Cells per side, strictly increasing, e.g. `64,128,256`.
    #[arg(long)]
    pub resolutions: Option<String>,
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(&self, summary: Value) -> CliResult<Value> {
        write_json(&summary, &self.path("summary.json"))?;
        Ok(summary)
    }
}

pub fn execute(cli: Cli) -> CliResult<Value> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(CliError::Config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        // A second call (tests running several commands in one process)
        // finds the pool already built; the first setting stays.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("pmc-out"));
    std::fs::create_dir_all(&out)?;
    let ctx = Ctx { cfg, out };
    match cli.command {
        Command::Classify(a) => classify(&ctx, &a),
        Command::Potential(a) => potential(&ctx, &a),
        Command::Residual(a) => residual(&ctx, &a),
        Command::Reconstruct(a) => reconstruct_cmd(&ctx, &a),
        Command::Sphere(a) => sphere(&ctx, &a),
        Command::Qdiff(a) => qdiff(&ctx, &a),
        Command::Index(a) => index(&ctx, &a),
        Command::Roundtrip(a) => roundtrip(&ctx, &a),
    }
}

fn parse_list(s: &str, len: Option<usize>, what: &str) -> CliResult<Vec<f64>> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Validation(format!("{what}: expected comma-separated numbers, got {s:?}")))?;
    if let Some(n) = len {
        if vals.len() != n {
            return Err(CliError::Validation(format!("{what}: expected {n} numbers, got {}", vals.len())));
        }
    }
    Ok(vals)
}

pub fn parse_group(s: &str) -> CliResult<GroupSpec> {
    let named = match s.to_ascii_lowercase().as_str() {
        "r3" | "e3" => Some(GroupSpec::euclidean()),
        "h3" => Some(GroupSpec::hyperbolic()),
        "s3" => Some(GroupSpec::unimodular(2.0, 2.0, 2.0)?),
        "nil3" => Some(GroupSpec::unimodular(1.0, 0.0, 0.0)?),
        "sol3" => Some(GroupSpec::unimodular(1.0, -1.0, 0.0)?),
        "h2xr" => Some(GroupSpec::nonunimodular(1.0, 0.0)?),
        _ => None,
    };
    if let Some(g) = named {
        return Ok(g);
    }
    let text = if s.trim_start().starts_with('{') {
        s.to_string()
    } else if Path::new(s).is_file() {
        std::fs::read_to_string(s)?
    } else {
        return Err(CliError::Validation(format!("unknown group {s:?}")));
    };
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("group {s:?}: {e}")))
}

fn resolve_group(a: &GroupArgs, cfg: &ExperimentConfig, recorded: Option<GroupSpec>) -> CliResult<GroupSpec> {
    if let Some(c) = &a.unimodular {
        let c = parse_list(c, Some(3), "--unimodular")?;
        return Ok(GroupSpec::unimodular(c[0], c[1], c[2])?);
    }
    if let Some(ab) = &a.nonunimodular {
        let ab = parse_list(ab, Some(2), "--nonunimodular")?;
        return Ok(GroupSpec::nonunimodular(ab[0], ab[1])?);
    }
    if let Some(s) = &a.group {
        return parse_group(s);
    }
    Ok(cfg.group.or(recorded).unwrap_or_else(GroupSpec::euclidean))
}

struct HSpec {
    text: String,
    h: PrescribedH,
    constant: Option<f64>,
}

fn resolve_h(flag: &Option<String>, cfg: &ExperimentConfig, recorded: Option<&String>) -> CliResult<HSpec> {
    let text = flag
        .clone()
        .or_else(|| cfg.h.clone())
        .or_else(|| recorded.cloned())
        .ok_or_else(|| CliError::Validation("no prescribed mean curvature given (use --h)".into()))?;
    let parsed = expr::parse(&text).map_err(|e| CliError::Validation(format!("--h {text:?}: {e}")))?;
    let h = expr::prescribed_h(&text).map_err(|e| CliError::Validation(format!("--h {text:?}: {e}")))?;
    Ok(HSpec { constant: parsed.constant_value(), text, h })
}

fn field_path(flag: &Option<PathBuf>, cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    flag.clone().or_else(|| cfg.field.clone()).ok_or_else(|| CliError::Validation("no field given (use --field)".into()))
}

fn complex(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn classify(ctx: &Ctx, a: &GroupArgs) -> CliResult<Value> {
    let g = resolve_group(a, &ctx.cfg, None)?;
    let h0 = match g.compactness() {
        CriticalThreshold::Compact => json!("compact"),
        CriticalThreshold::Threshold(t) => json!(t),
    };
    let params = serde_json::to_value(g)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    ctx.finish(json!({
        "command": "classify",
        "group": params,
        "family": g.family(),
        "name": g.name(),
        "unimodular": g.is_unimodular(),
        "mu": g.mu(),
        "h0": h0,
    }))
}

fn potential(ctx: &Ctx, a: &PotentialArgs) -> CliResult<Value> {
    let g = resolve_group(&a.group, &ctx.cfg, None)?;
    if a.q.is_none() && a.scan.is_none() {
        return Err(CliError::Validation("potential needs --q or --scan".into()));
    }
    let mut summary = json!({"command": "potential", "group": g, "h": a.h});
    if let Some(q) = &a.q {
        let v = parse_list(q, Some(2), "--q")?;
        let chart = Chart::parse(&a.chart.to_ascii_lowercase())
            .ok_or_else(|| CliError::Validation(format!("unknown chart {:?}", a.chart)))?;
        let p = ChartPoint::new(chart, Complex64::new(v[0], v[1]));
        let ev = potential_eval(&g, a.h, &p);
        summary["eval"] = json!({
            "chart": chart.as_str(),
            "point": complex(p.value),
            "r": complex(ev.r),
            "abs_r": ev.r.norm(),
            "r_q": complex(ev.r_q),
            "r_qbar": complex(ev.r_qbar),
            "r_h": ev.r_h,
        });
    }
    if let Some(n) = a.scan {
        let zeros = zero_scan(&g, a.h, n)?;
        let list: Vec<Value> =
            zeros.iter().map(|z| json!({"chart": z.chart.as_str(), "value": complex(z.value)})).collect();
        summary["scan"] = json!({"grid_n": n, "zero_count": zeros.len(), "regular": zeros.is_empty(), "zeros": list});
    }
    ctx.finish(summary)
}

struct ResidualStats {
    max: f64,
    l2: f64,
    relative: f64,
    spacing: f64,
    values: Vec<f64>,
}

fn residual_stats(field: &TwoChartComplexField, g: &GroupSpec) -> CliResult<ResidualStats> {
    let values: Vec<f64> = pde_residual(field, g)?.iter().map(|r| r.norm()).collect();
    let h = field.grid.spacing;
    Ok(ResidualStats {
        max: values.iter().cloned().fold(0.0, f64::max),
        l2: (values.iter().map(|v| v * v).sum::<f64>() * h * h).sqrt(),
        relative: relative_pde_residual(field, g)?,
        spacing: h,
        values,
    })
}

fn residual(ctx: &Ctx, a: &ResidualArgs) -> CliResult<Value> {
    let (field, meta) = match a.fixture {
        Some(FieldFixture::RoundSphere) => {
            if a.n == 0 || !(a.half > 0.0) {
                return Err(CliError::Validation("--n and --half must be positive".into()));
            }
            let field = fixtures::round_sphere_field(a.n, a.half, a.h0);
            let meta = FieldMeta { grid: field.grid, group: Some(GroupSpec::euclidean()), h: Some(format!("{}", a.h0)) };
            save_field(&field, &meta, &ctx.path("round_sphere.csv"))?;
            (field, meta)
        }
        None => load_field(&field_path(&a.field, &ctx.cfg)?)?,
    };
    let g = resolve_group(&a.group, &ctx.cfg, meta.group)?;
    let s1 = residual_stats(&field, &g)?;
    write_node_csv(&ctx.path("residual.csv"), "residual", field.grid.nx, &s1.values)?;
    let mut summary = json!({
        "command": "residual",
        "group": g,
        "nodes": [field.grid.nx, field.grid.ny],
        "spacing": s1.spacing,
        "max_residual": s1.max,
        "l2_residual": s1.l2,
        "relative_residual": s1.relative,
    });
    if let Some(p2) = a.field2.clone().or_else(|| ctx.cfg.field2.clone()) {
        let (f2, _) = load_field(&p2)?;
        let s2 = residual_stats(&f2, &g)?;
        let slope = (s1.max / s2.max).ln() / (s1.spacing / s2.spacing).ln();
        summary["second"] = json!({"spacing": s2.spacing, "max_residual": s2.max, "l2_residual": s2.l2});
        summary["convergence_slope"] = json!(slope);
    }
    ctx.finish(summary)
}

fn reconstruct_cmd(ctx: &Ctx, a: &ReconstructArgs) -> CliResult<Value> {
    let (field, meta) = load_field(&field_path(&a.field, &ctx.cfg)?)?;
    let g = resolve_group(&a.group, &ctx.cfg, meta.group)?;
    let backend = Backend::for_group(&g)?;
    let base = match &a.base {
        Some(s) => {
            let v = parse_list(s, None, "--base")?;
            match v.len() {
                3 => [v[0], v[1], v[2], 0.0],
                4 => [v[0], v[1], v[2], v[3]],
                n => return Err(CliError::Validation(format!("--base: expected 3 or 4 numbers, got {n}"))),
            }
        }
        None => backend.identity(),
    };
    let mut opts = ReconstructOptions::default();
    if let Some(t) = a.residual_tol.or(ctx.cfg.tolerances.residual) {
        opts.residual_tol = Some(t);
    }
    if let Some(t) = ctx.cfg.tolerances.integrability {
        opts.integrability_tol = Some(t);
    }
    let relative = relative_pde_residual(&field, &g)?;
    let mesh = reconstruct(&field, &g, base, &opts)?;
    write_mesh(ctx, &mesh, "mesh")?;
    ctx.finish(json!({
        "command": "reconstruct",
        "group": g,
        "backend": backend.name(),
        "nodes": [field.grid.nx, field.grid.ny],
        "relative_residual": relative,
        "integrability_gap": mesh.integrability_gap,
        "warnings": mesh.warnings,
    }))
}

fn write_mesh(ctx: &Ctx, mesh: &SurfaceMesh, stem: &str) -> CliResult<()> {
    let file = std::fs::File::create(ctx.path(&format!("{stem}.obj")))?;
    let mut out = std::io::BufWriter::new(file);
    write_obj(mesh, &mut out)?;
    save_json(&MeshSidecar::of(mesh), &ctx.path(&format!("{stem}.json")))?;
    Ok(())
}

fn sphere(ctx: &Ctx, a: &SphereArgs) -> CliResult<Value> {
    let hs = resolve_h(&a.h, &ctx.cfg, None)?;
    let steps = a.steps.or(ctx.cfg.steps).unwrap_or(10_000);
    let (profile, model) = rotational_model(&hs.h, steps)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(ctx.path("profile.csv"))?);
    profile.write_csv(&mut out)?;
    drop(out);
    let tol = ctx.cfg.tolerances.closure.unwrap_or(CLOSURE_TOL);
    let closed = profile.closure_defect <= tol * profile.diameter;
    let mut summary = json!({
        "command": "sphere",
        "h": hs.text,
        "steps": steps,
        "closure_defect": profile.closure_defect,
        "closure_tolerance": tol * profile.diameter,
        "closed": closed,
        "diameter": profile.diameter,
        "strictly_convex": profile.strictly_convex,
        "antipodally_symmetric": profile.antipodally_symmetric,
        "prescribed_h_residual": profile.prescribed_h_residual(),
    });
    let model = match model {
        Ok(m) if closed => m,
        Ok(_) => {
            ctx.finish(summary)?;
            return Err(CliError::Numerical(pmc_core::Error::ClosureDefect {
                defect: profile.closure_defect,
                tolerance: tol * profile.diameter,
            }));
        }
        Err(e) => {
            summary["model_error"] = json!(e.to_string());
            ctx.finish(summary)?;
            return Err(e.into());
        }
    };
    summary["equator_radius"] = json!(equator_radius(&model));
    summary["patch_half_width"] = json!(model.patch_half_width(Chart::Q));
    if let Some(n) = a.patch_n {
        if n < 5 {
            return Err(CliError::Validation("--patch-n must be at least 5".into()));
        }
        for (patch, name) in model.patches(n)?.iter().zip(["model_q.csv", "model_w.csv"]) {
            let field = patch.field(&hs.h);
            let meta = FieldMeta { grid: field.grid, group: Some(GroupSpec::euclidean()), h: Some(hs.text.clone()) };
            save_field(&field, &meta, &ctx.path(name))?;
        }
        summary["patches"] = json!(["model_q.csv", "model_w.csv"]);
    }
    ctx.finish(summary)
}

fn build_model(hs: &HSpec, steps: usize) -> CliResult<ModelSphere> {
    match hs.constant {
        Some(h0) => Ok(round_model(h0, &GroupSpec::euclidean())?),
        None => Ok(rotational_model(&hs.h, steps)?.1?),
    }
}

fn qdiff(ctx: &Ctx, a: &QdiffArgs) -> CliResult<Value> {
    let (field, meta) = load_field(&field_path(&a.field, &ctx.cfg)?)?;
    let g = meta.group.or(ctx.cfg.group).unwrap_or_else(GroupSpec::euclidean);
    if !g.is_euclidean() {
        return Err(CliError::Validation(format!("model spheres are available in R3 only, field is in {}", g.name())));
    }
    let param_chart = Chart::parse(&a.param_chart.to_ascii_lowercase())
        .ok_or_else(|| CliError::Validation(format!("unknown chart {:?}", a.param_chart)))?;
    let hs = resolve_h(&a.h, &ctx.cfg, meta.h.as_ref())?;
    let model = build_model(&hs, a.steps.or(ctx.cfg.steps).unwrap_or(10_000))?;
    let field = field.with_prescribed(hs.h.clone());
    let mut q = q_differential(&field, &model)?;
    q.param_chart = param_chart;
    save_qdiff(&q, &ctx.path("q.csv"))?;
    let mut summary = json!({
        "command": "qdiff",
        "h": hs.text,
        "nodes": [field.grid.nx, field.grid.ny],
        "max_abs_q": q.max_abs(),
    });
    summary["dbar"] = match dbar_identity_residual(&q, &field, &model) {
        Ok(r) => json!({
            "max": r.max(),
            "interior_max": r.interior_max(),
            "scale": r.scale,
            "relative": r.relative(),
        }),
        Err(e) => json!({"error": e.to_string()}),
    };
    summary["contact"] = match contact_residual(&field, &model) {
        Ok(c) => json!({"max_dbar_phi": c.max(), "max_predicted": c.max_predicted()}),
        Err(e) => json!({"error": e.to_string()}),
    };
    if a.hopf {
        let mut p = hopf_differential_field(&field, &g)?;
        p.param_chart = param_chart;
        save_qdiff(&p, &ctx.path("p.csv"))?;
        let gap = q.q.iter().zip(&p.q).map(|(a, b)| (a - b / 2.0).norm()).fold(0.0, f64::max);
        summary["hopf"] = json!({"max_abs_p": p.max_abs(), "max_abs_q_minus_half_p": gap});
    }
    ctx.finish(summary)
}

fn index(ctx: &Ctx, a: &IndexArgs) -> CliResult<Value> {
    let patches = a.q.iter().map(|p| load_qdiff(p)).collect::<Result<Vec<_>, _>>()?;
    let topology = match a.topology {
        TopologyArg::Disk => Topology::Disk,
        TopologyArg::Sphere => Topology::Sphere,
        TopologyArg::Torus => Topology::Torus,
    };
    let report = zeros_and_indices(&patches, topology)?;
    save_json(&report, &ctx.path("zeros.json"))?;
    let positive = report.zeros.iter().filter(|z| z.winding > 0).count();
    ctx.finish(json!({
        "command": "index",
        "topology": topology,
        "zero_count": report.zeros.len(),
        "positive_winding_count": positive,
        "winding_sum": report.winding_sum,
        "expected": report.expected,
        "matches": report.matches,
    }))
}

fn roundtrip(ctx: &Ctx, a: &RoundtripArgs) -> CliResult<Value> {
    let resolutions: Vec<usize> = match (&a.resolutions, &ctx.cfg.resolutions) {
        (Some(s), _) => s
            .split(',')
            .map(|x| x.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Validation(format!("--resolutions: expected integers, got {s:?}")))?,
        (None, Some(r)) => r.clone(),
        (None, None) => vec![64, 128, 256],
    };
    if resolutions.is_empty() || resolutions.windows(2).any(|w| w[0] >= w[1]) || resolutions[0] < 4 {
        return Err(CliError::Validation(format!("resolutions must be >= 4 and strictly increasing, got {resolutions:?}")));
    }
    let make = |n: usize| match a.fixture {
        MeshFixture::EuclideanSphere => fixtures::euclidean_sphere(n, 1.0),
        MeshFixture::HyperbolicSphere => fixtures::hyperbolic_sphere(n, 2.0, 1.0),
        MeshFixture::S3Sphere => fixtures::s3_sphere(n, 0.8),
        MeshFixture::Cylinder => fixtures::cylinder(n),
    };
    // The fixtures are exact surfaces; the input residual guard only
    // applies when configured.
    let opts = ReconstructOptions { residual_tol: ctx.cfg.tolerances.residual, ..ReconstructOptions::default() };
    let mut errors = Vec::new();
    let mut last = None;
    for &n in &resolutions {
        let mesh = make(n);
        let (rebuilt, err) = round_trip(&mesh, &opts)?;
        errors.push(err);
        last = Some((mesh, rebuilt));
    }
    let (mesh, rebuilt) = last.expect("at least one resolution");
    write_mesh(ctx, &rebuilt, "roundtrip")?;
    let backend = Backend::for_group(&mesh.group)?;
    let shift: [f64; 4] = match backend {
        Backend::Quaternion { .. } => {
            let (s, c) = 0.3f64.sin_cos();
            [c, s * 0.6, s * 0.0, s * 0.8]
        }
        _ => [0.3, -0.2, 0.5, 0.0],
    };
    let field = mesh_gauss_map(&mesh)?;
    let base = *mesh.position(mesh.base_node.0, mesh.base_node.1);
    let defect = translation_defect(&field, &mesh.group, base, shift, &opts)?;
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let orders: Vec<f64> = ratios.iter().zip(resolutions.windows(2)).map(|(r, w)| r.ln() / (w[1] as f64 / w[0] as f64).ln()).collect();
    ctx.finish(json!({
        "command": "roundtrip",
        "fixture": format!("{:?}", a.fixture),
        "group": mesh.group,
        "resolutions": resolutions,
        "max_position_error": errors,
        "error_ratios": ratios,
        "orders": orders,
        "translation_defect": defect,
    }))
}
