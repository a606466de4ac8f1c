//! Reference spheres: the round sphere and rotationally symmetric spheres
//! of prescribed mean curvature `H = h(nu3)` in R^3, their conformal
//! parametrization, and the functions `L`, `M` built from their Gauss map.
//!
//! A rotational sphere is described by its meridian profile as a function
//! of the angle `theta` between the unit normal and the axis. The surface
//! point with normal `nu = (sin th cos phi, sin th sin phi, cos th)` is
//! `(-x(th) cos phi, -x(th) sin phi, -z(th))`, with principal curvatures
//! `kappa2 = sin th / x` along the parallels and `kappa1 = 2 h(cos th) -
//! kappa2` along the meridian, so that
//!
//! ```text
//! dx/dth = cos th / kappa1,    dz/dth = -sin th / kappa1.
//! ```
//!
//! The conformal parameter is `w = exp(u + i phi)` with `du = ds / x` along
//! the meridian. Writing `u = ln tan(th/2) + v(th)`, the Gauss map reads
//! `G(w) = w exp(-v)`. The southern patch uses `1/w`, where the Gauss map
//! is `1/G = (1/w) exp(v)` in chart `W`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussfield::{dz, dzbar, fd_partials, reduced_coefficients, stereo, Grid, PrescribedH, ReducedCoefficients, TwoChartComplexField};
use crate::liegroup::GroupSpec;
use crate::potential::{potential_eval, Chart, ChartPoint};

/// Angle from each pole at which the profile ODE takes over from the
/// series start.
pub const POLE_START: f64 = 1e-3;

/// Closure tolerance relative to the profile diameter.
pub const CLOSURE_TOL: f64 = 1e-6;

/// Half width of the per-chart squares on which `L` and `M` are tabulated.
pub const LM_TABLE_HALF: f64 = 1.25;

/// Step of the central differences giving `L_q`, `L_qbar` pointwise.
pub const LM_FD_STEP: f64 = 1e-5;

fn axial(h: &PrescribedH) -> Result<(crate::gaussfield::AxialFn, crate::gaussfield::AxialFn)> {
    h.axial_parts().ok_or_else(|| Error::InvalidInput(format!("'{}' is not a function of nu3", h.description())))
}

/// Meridian profile sampled at `theta = 0`, at `n_steps + 1` uniform angles
/// on `[POLE_START, pi - POLE_START]`, and at `theta = pi`.
#[derive(Clone, Debug)]
pub struct RotationalProfile {
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
    /// Isothermal correction `v = u - ln tan(theta/2)`, zero at the north pole.
    pub v: Vec<f64>,
    dx: Vec<f64>,
    dz: Vec<f64>,
    dv: Vec<f64>,
    pub h: PrescribedH,
    /// `|x(pi)|`, extrapolated linearly from the last integrated sample.
    pub closure_defect: f64,
    pub diameter: f64,
    pub strictly_convex: bool,
    /// `max |h(t) - h(-t)| < 1e-12` on a sample of `[-1, 1]`.
    pub antipodally_symmetric: bool,
    step: f64,
}

/// Profile quantities at one angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfilePoint {
    pub theta: f64,
    pub x: f64,
    pub z: f64,
    pub v: f64,
    /// `dv/dtheta`.
    pub dv: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl ProfilePoint {
    /// `(kappa1 - kappa2) / (kappa1 + kappa2)`.
    pub fn shear(&self) -> f64 {
        (self.kappa1 - self.kappa2) / (self.kappa1 + self.kappa2)
    }
}

fn hermite(t: f64, len: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let y = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * len * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * len * d1;
    let dy = ((6.0 * t2 - 6.0 * t) * y0 + (-6.0 * t2 + 6.0 * t) * y1) / len + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (3.0 * t2 - 2.0 * t) * d1;
    (y, dy)
}

impl RotationalProfile {
    pub fn is_closed(&self) -> bool {
        self.closure_defect <= CLOSURE_TOL * self.diameter
    }

    pub fn n_steps(&self) -> usize {
        self.theta.len() - 3
    }

    fn h_at(&self, t: f64) -> f64 {
        self.h.eval_nu([0.0, (1.0 - t * t).max(0.0).sqrt(), t])
    }

    /// Interpolated profile: cubic Hermite between samples, pole series
    /// within `POLE_START` of either pole.
    pub fn at(&self, theta: f64) -> ProfilePoint {
        let theta = theta.clamp(0.0, PI);
        let n = self.n_steps();
        let th_end = PI - POLE_START;
        let (x, z, v, dv) = if theta < POLE_START {
            let h1 = self.kappa1[0];
            let (_, dhf) = axial(&self.h).expect("profile data is axial");
            let c3 = dhf(1.0) / (4.0 * h1 * h1);
            let v1 = self.v[1];
            (
                theta.sin() / h1 + c3 * theta.powi(3),
                -(1.0 - theta.cos()) / h1,
                v1 * (theta / POLE_START).powi(2),
                2.0 * v1 * theta / (POLE_START * POLE_START),
            )
        } else if theta > th_end {
            let e = n + 1;
            let (eps, eps0) = (PI - theta, POLE_START);
            if self.is_closed() {
                let h2 = self.h_at(-1.0);
                let (_, dhf) = axial(&self.h).expect("profile data is axial");
                let c3 = -dhf(-1.0) / (4.0 * h2 * h2);
                let s = |e: f64| e.sin() / h2 + c3 * e.powi(3);
                (
                    self.x[e] * s(eps) / s(eps0),
                    self.z[e] - (eps.cos() - eps0.cos()) / h2,
                    self.v[e] + self.dv[e] * (eps0 * eps0 - eps * eps) / (2.0 * eps0),
                    self.dv[e] * eps / eps0,
                )
            } else {
                let d = theta - th_end;
                (self.x[e] + d * self.dx[e], self.z[e] + d * self.dz[e], self.v[e] + d * self.dv[e], self.dv[e])
            }
        } else {
            let s = (theta - POLE_START) / self.step;
            let k = (s.floor() as usize).min(n - 1);
            let t = s - k as f64;
            let (a, b) = (k + 1, k + 2);
            let (x, _) = hermite(t, self.step, self.x[a], self.dx[a], self.x[b], self.dx[b]);
            let (z, _) = hermite(t, self.step, self.z[a], self.dz[a], self.z[b], self.dz[b]);
            let (v, dv) = hermite(t, self.step, self.v[a], self.dv[a], self.v[b], self.dv[b]);
            (x, z, v, dv)
        };
        let hc = self.h_at(theta.cos());
        let kappa2 = if theta == 0.0 || theta == PI || x <= 0.0 { hc } else { theta.sin() / x };
        ProfilePoint { theta, x, z, v, dv, kappa1: 2.0 * hc - kappa2, kappa2 }
    }

    /// `max |(kappa1 + kappa2)/2 - h(cos theta)|` over the interior samples,
    /// with the meridian curvature recomputed as `1 / |d(x, z)/dtheta|`
    /// from fourth-order differences of the sampled curve.
    pub fn prescribed_h_residual(&self) -> f64 {
        let n = self.n_steps();
        let d = |f: &[f64], k: usize| (f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]) / (12.0 * self.step);
        (3..=n - 1)
            .into_par_iter()
            .map(|k| {
                let speed = d(&self.x, k).hypot(d(&self.z, k));
                let k2 = self.theta[k].sin() / self.x[k];
                ((1.0 / speed + k2) / 2.0 - self.h_at(self.theta[k].cos())).abs()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// CSV with columns `theta,x,z,kappa1,kappa2`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["theta", "x", "z", "kappa1", "kappa2"])?;
        for k in 0..self.theta.len() {
            let row = [self.theta[k], self.x[k], self.z[k], self.kappa1[k], self.kappa2[k]];
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates the meridian profile of the rotational sphere with mean
/// curvature `h(nu3)` from the north pole with `n_steps` RK4 steps.
pub fn rotational_profile(h: &PrescribedH, n_steps: usize) -> Result<RotationalProfile> {
    let (hf, dhf) = axial(h)?;
    if n_steps < 8 {
        return Err(Error::InvalidInput(format!("n_steps = {n_steps}, need at least 8")));
    }
    let ts: Vec<f64> = (0..=1000).map(|k| -1.0 + k as f64 / 500.0).collect();
    if !ts.iter().all(|&t| hf(t) > 0.0) {
        return Err(Error::InvalidInput(format!("h = {} must be positive on [-1, 1]", h.description())));
    }
    let asym = ts.iter().map(|&t| (hf(t) - hf(-t)).abs()).fold(0.0, f64::max);
    let rhs = |th: f64, y: [f64; 3]| -> Result<[f64; 3]> {
        let (s, c) = th.sin_cos();
        let k1 = 2.0 * hf(c) - s / y[0];
        if !(y[0] > 0.0 && k1 > 0.0) {
            return Err(Error::ProfilePinch { theta: th, kappa: k1 });
        }
        Ok([c / k1, -s / k1, 1.0 / (k1 * y[0]) - 1.0 / s])
    };

    let h1 = hf(1.0);
    let h2 = hf(-1.0);
    let th0 = POLE_START;
    let step = (PI - 2.0 * th0) / n_steps as f64;
    let c3 = dhf(1.0) / (4.0 * h1 * h1);
    let mut y = [th0.sin() / h1 + c3 * th0.powi(3), -(1.0 - th0.cos()) / h1, 0.0];
    // v' vanishes linearly at the pole and v(0) = 0.
    y[2] = rhs(th0, y)?[2] * th0 / 2.0;

    let cap = n_steps + 3;
    let mut p = RotationalProfile {
        theta: Vec::with_capacity(cap),
        x: Vec::with_capacity(cap),
        z: Vec::with_capacity(cap),
        kappa1: Vec::with_capacity(cap),
        kappa2: Vec::with_capacity(cap),
        v: Vec::with_capacity(cap),
        dx: Vec::with_capacity(cap),
        dz: Vec::with_capacity(cap),
        dv: Vec::with_capacity(cap),
        h: h.clone(),
        closure_defect: 0.0,
        diameter: 0.0,
        strictly_convex: true,
        antipodally_symmetric: asym < 1e-12,
        step,
    };
    let push = |p: &mut RotationalProfile, th: f64, y: [f64; 3], d: [f64; 3], k1: f64, k2: f64| {
        p.theta.push(th);
        p.x.push(y[0]);
        p.z.push(y[1]);
        p.v.push(y[2]);
        p.dx.push(d[0]);
        p.dz.push(d[1]);
        p.dv.push(d[2]);
        p.kappa1.push(k1);
        p.kappa2.push(k2);
    };
    push(&mut p, 0.0, [0.0; 3], [1.0 / h1, 0.0, 0.0], h1, h1);
    for k in 0..=n_steps {
        let th = th0 + k as f64 * step;
        let d = rhs(th, y)?;
        let k2 = th.sin() / y[0];
        push(&mut p, th, y, d, 2.0 * hf(th.cos()) - k2, k2);
        if k == n_steps {
            break;
        }
        let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
        let k1 = d;
        let k2 = rhs(th + 0.5 * step, add(y, k1, 0.5 * step))?;
        let k3 = rhs(th + 0.5 * step, add(y, k2, 0.5 * step))?;
        let k4 = rhs(th + step, add(y, k3, step))?;
        for i in 0..3 {
            y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let e = n_steps + 1;
    let x_pi = p.x[e] + th0 * p.dx[e];
    p.closure_defect = x_pi.abs();
    let xmax = p.x.iter().cloned().fold(0.0, f64::max);
    let (zmin, zmax) = p.z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| (a.min(z), b.max(z)));
    p.diameter = (2.0 * xmax).max(zmax - zmin);
    p.strictly_convex = p.kappa1.iter().chain(&p.kappa2).all(|&k| k > 0.0);
    let closed = p.is_closed();
    let (k1, k2) = if closed { (h2, h2) } else { (2.0 * h2, 0.0) };
    let end = [x_pi, p.z[e] + th0 * p.dz[e], p.v[e] + 0.5 * th0 * p.dv[e]];
    let d_end = [if closed { -1.0 / h2 } else { p.dx[e] }, 0.0, 0.0];
    push(&mut p, PI, end, d_end, k1, k2);
    Ok(p)
}

/// Which closed-form family a model belongs to.
#[derive(Clone, Debug)]
pub enum ModelShape {
    Round { h0: f64 },
    Rotational(Arc<RotationalProfile>),
}

/// A sphere whose Gauss map is a diffeomorphism, given through its
/// conformal parametrization by two patches (`w` around the north pole,
/// `1/w` around the south pole; recorded as charts `Q` and `W`).
#[derive(Clone, Debug)]
pub struct ModelSphere {
    pub group: GroupSpec,
    pub h: PrescribedH,
    pub shape: ModelShape,
}

/// `G` at a parameter point with its derivatives `G_z`, `G_zbar`; all three
/// refer to the chart of `g` and to the parameter chart's coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussJet {
    pub g: ChartPoint,
    pub g_z: Complex64,
    pub g_zbar: Complex64,
}

impl GaussJet {
    pub fn in_chart(self, chart: Chart) -> GaussJet {
        if self.g.chart == chart {
            return self;
        }
        let v = self.g.value;
        let s = -(v * v).inv();
        GaussJet { g: ChartPoint::new(chart, v.inv()), g_z: s * self.g_z, g_zbar: s * self.g_zbar }
    }

    pub fn canonical(self) -> GaussJet {
        self.in_chart(self.g.canonical().chart)
    }

    /// `|G_z|^2 - |G_zbar|^2`, positive for an orientation-preserving map.
    pub fn jacobian(&self) -> f64 {
        self.g_z.norm_sqr() - self.g_zbar.norm_sqr()
    }
}

/// `L`, `M` and first derivatives at a point of the Gauss sphere, in that
/// point's chart, with the reduced coefficients of the Gauss map equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmJet {
    pub l: Complex64,
    pub l_q: Complex64,
    pub l_qbar: Complex64,
    pub red: ReducedCoefficients,
}

impl LmJet {
    pub fn m(&self) -> Complex64 {
        self.red.m
    }
}

fn sign(chart: Chart) -> f64 {
    match chart {
        Chart::Q => 1.0,
        Chart::W => -1.0,
    }
}

/// Angle from the north pole of the sphere point `p`.
pub fn polar_angle(p: &ChartPoint) -> f64 {
    let a = 2.0 * p.value.norm().atan();
    match p.chart {
        Chart::Q => a,
        Chart::W => PI - a,
    }
}

pub fn round_model(h0: f64, grp: &GroupSpec) -> Result<ModelSphere> {
    if !(h0 > 0.0 && h0.is_finite()) {
        return Err(Error::InvalidInput(format!("round model needs H0 > 0, got {h0}")));
    }
    if !grp.is_euclidean() {
        return Err(Error::InvalidInput(format!(
            "closed-form round models exist only in R3; got {}; supply a reconstructed model instead",
            grp.name()
        )));
    }
    Ok(ModelSphere { group: *grp, h: PrescribedH::constant(h0), shape: ModelShape::Round { h0 } })
}

/// Profile and, when the profile closes, the model sphere built on it.
pub fn rotational_model(h: &PrescribedH, n_steps: usize) -> Result<(RotationalProfile, Result<ModelSphere>)> {
    let profile = rotational_profile(h, n_steps)?;
    let model = ModelSphere::from_profile(profile.clone());
    Ok((profile, model))
}

/// The two patches of the isothermal parametrization of a closed profile.
pub fn isothermal_reparametrization(profile: &RotationalProfile, n: usize) -> Result<[ModelPatch; 2]> {
    ModelSphere::from_profile(profile.clone())?.patches(n)
}

impl ModelSphere {
    pub fn from_profile(profile: RotationalProfile) -> Result<ModelSphere> {
        let tolerance = CLOSURE_TOL * profile.diameter;
        if !(profile.closure_defect <= tolerance) {
            return Err(Error::ClosureDefect { defect: profile.closure_defect, tolerance });
        }
        if !profile.strictly_convex {
            return Err(Error::ProfilePinch { theta: f64::NAN, kappa: 0.0 });
        }
        Ok(ModelSphere { group: GroupSpec::euclidean(), h: profile.h.clone(), shape: ModelShape::Rotational(Arc::new(profile)) })
    }

    pub fn profile(&self) -> Option<&RotationalProfile> {
        match &self.shape {
            ModelShape::Rotational(p) => Some(p),
            ModelShape::Round { .. } => None,
        }
    }

    pub fn closure_defect(&self) -> f64 {
        self.profile().map_or(0.0, |p| p.closure_defect)
    }

    /// `(v, dv/dtheta, shear)` at the given angle.
    fn sample(&self, theta: f64) -> (f64, f64, f64) {
        match &self.shape {
            ModelShape::Round { .. } => (0.0, 0.0, 0.0),
            ModelShape::Rotational(p) => {
                let pt = p.at(theta);
                (pt.v, pt.dv, pt.shear())
            }
        }
    }

    /// Angle whose isothermal coordinate is `u = ln tan(theta/2) + v(theta)`.
    fn theta_of_u(&self, u: f64) -> f64 {
        let mut lam = u;
        for _ in 0..50 {
            let th = 2.0 * lam.exp().atan();
            let (v, dv, _) = self.sample(th);
            let step = (lam + v - u) / (1.0 + dv * th.sin());
            lam -= step;
            if step.abs() <= 1e-15 * (1.0 + lam.abs()) {
                break;
            }
        }
        2.0 * lam.exp().atan()
    }

    /// Gauss map at a parameter point (chart `Q`: north patch `w`, chart `W`:
    /// south patch `1/w`), returned in its canonical chart.
    pub fn gauss_map(&self, param: &ChartPoint) -> GaussJet {
        let s = sign(param.chart);
        let p = param.value;
        let r = p.norm();
        let theta = if r == 0.0 {
            if s > 0.0 {
                0.0
            } else {
                PI
            }
        } else {
            self.theta_of_u(s * r.ln())
        };
        let (v, _, sigma) = self.sample(theta);
        let e = (-s * v).exp();
        let phase = if r == 0.0 { Complex64::new(0.0, 0.0) } else { p / p.conj() };
        GaussJet {
            g: ChartPoint::new(param.chart, p * e),
            g_z: Complex64::new(e / (1.0 - sigma), 0.0),
            g_zbar: e * sigma / (1.0 - sigma) * phase,
        }
        .canonical()
    }

    /// `G^{-1}(q)` as a parameter point in the chart of `q`.
    pub fn inverse(&self, q: &ChartPoint) -> Result<ChartPoint> {
        let theta = polar_angle(q);
        let (v, _, _) = self.sample(theta);
        let out = ChartPoint::new(q.chart, q.value * (sign(q.chart) * v).exp());
        if !out.value.is_finite() {
            return Err(Error::InverseInterpolationFailure { value: q.value, chart: q.chart });
        }
        Ok(out)
    }

    /// `L(q) = -(conj(G_zbar) / G_z)(G^{-1}(q)) M(q)` in the chart of `q`.
    pub fn l_value(&self, q: &ChartPoint, m: Complex64) -> Complex64 {
        let (_, _, sigma) = self.sample(polar_angle(q));
        let v = q.value;
        if sigma == 0.0 || v.norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        -sigma * (v.conj() / v) * m
    }

    pub fn lm(&self, q: &ChartPoint) -> Result<(Complex64, ReducedCoefficients)> {
        let red = reduced_coefficients(&self.h, &self.group, q)?;
        Ok((self.l_value(q, red.m), red))
    }

    pub fn lm_jet(&self, q: &ChartPoint) -> Result<LmJet> {
        let (l, red) = self.lm(q)?;
        let (l_q, l_qbar) = match self.shape {
            ModelShape::Round { .. } => (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
            ModelShape::Rotational(_) => {
                let s = LM_FD_STEP;
                let at = |d: Complex64| -> Result<Complex64> {
                    let p = ChartPoint::new(q.chart, q.value + d);
                    Ok(self.lm(&p)?.0)
                };
                let fx = (at(Complex64::new(s, 0.0))? - at(Complex64::new(-s, 0.0))?) / (2.0 * s);
                let fy = (at(Complex64::new(0.0, s))? - at(Complex64::new(0.0, -s))?) / (2.0 * s);
                (dz(fx, fy), dzbar(fx, fy))
            }
        };
        Ok(LmJet { l, l_q, l_qbar, red })
    }

    /// Half width of the parameter square of a patch: the modulus of the
    /// parameter on the equator `theta = pi/2`.
    pub fn patch_half_width(&self, chart: Chart) -> f64 {
        let (v, _, _) = self.sample(0.5 * PI);
        (sign(chart) * v).exp()
    }

    /// One patch sampled on an `n x n` grid.
    pub fn patch(&self, chart: Chart, n: usize) -> Result<ModelPatch> {
        if n < 5 {
            return Err(Error::InvalidInput(format!("patch needs at least 5 nodes per side, got {n}")));
        }
        let grid = Grid::square(n, self.patch_half_width(chart));
        let jets: Vec<GaussJet> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j) = grid.ij(idx);
                self.gauss_map(&ChartPoint::new(chart, grid.z(i, j)))
            })
            .collect();
        Ok(ModelPatch {
            param_chart: chart,
            grid,
            g: jets.iter().map(|j| j.g).collect(),
            g_z: jets.iter().map(|j| j.g_z).collect(),
            g_zbar: jets.iter().map(|j| j.g_zbar).collect(),
        })
    }

    /// North and south patches.
    pub fn patches(&self, n: usize) -> Result<[ModelPatch; 2]> {
        Ok([self.patch(Chart::Q, n)?, self.patch(Chart::W, n)?])
    }
}

/// The model's Gauss map on one parameter patch, with derivatives from
/// the chain rule through the profile.
#[derive(Clone, Debug)]
pub struct ModelPatch {
    pub param_chart: Chart,
    pub grid: Grid,
    pub g: Vec<ChartPoint>,
    pub g_z: Vec<Complex64>,
    pub g_zbar: Vec<Complex64>,
}

impl ModelPatch {
    /// The patch as a field with `H = h(G)`.
    pub fn field(&self, h: &PrescribedH) -> TwoChartComplexField {
        let hv = self.g.iter().map(|p| h.eval(p)).collect();
        let mut f = TwoChartComplexField::new(self.grid, self.g.clone(), hv).expect("patch arrays match the grid");
        f.prescribed = Some(h.clone());
        f
    }

    /// `min |G_z|^2 - |G_zbar|^2` over the nodes.
    pub fn orientation_margin(&self) -> f64 {
        self.g_z.iter().zip(&self.g_zbar).map(|(a, b)| a.norm_sqr() - b.norm_sqr()).fold(f64::INFINITY, f64::min)
    }
}

/// `L` and `M` sampled on the square `[-LM_TABLE_HALF, LM_TABLE_HALF]^2` of
/// one chart.
#[derive(Clone, Debug)]
pub struct LmTable {
    pub chart: Chart,
    pub grid: Grid,
    pub l: Vec<Complex64>,
    pub m: Vec<Complex64>,
}

/// `L`, `M` on `n x n` tables in both charts.
pub fn model_lm(model: &ModelSphere, n: usize) -> Result<[LmTable; 2]> {
    let table = |chart: Chart| -> Result<LmTable> {
        let grid = Grid::square(n, LM_TABLE_HALF);
        let lm: Vec<(Complex64, Complex64)> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j) = grid.ij(idx);
                let (l, red) = model.lm(&ChartPoint::new(chart, grid.z(i, j)))?;
                Ok((l, red.m))
            })
            .collect::<Result<_>>()?;
        let (l, m) = lm.into_iter().unzip();
        Ok(LmTable { chart, grid, l, m })
    };
    Ok([table(Chart::Q)?, table(Chart::W)?])
}

/// Per-node residuals of the first-order equations satisfied by `M` and
/// `L` on one table. `m_pde` uses closed-form derivatives of `M`; `m_pde_fd`
/// and `l_pde` use finite differences on the table.
#[derive(Clone, Debug)]
pub struct LmResidual {
    pub chart: Chart,
    pub grid: Grid,
    pub m_pde: Vec<f64>,
    pub m_pde_fd: Vec<f64>,
    pub l_pde: Vec<f64>,
}

impl LmResidual {
    pub fn max_m_pde(&self) -> f64 {
        self.m_pde.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_m_pde_fd(&self) -> f64 {
        self.m_pde_fd.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_l_pde(&self) -> f64 {
        self.l_pde.iter().cloned().fold(0.0, f64::max)
    }
}

/// Residuals of
/// `M_qbar + (conj(A) + B) M = h_qbar (1 + |q|^2)^2 |M|^2` and
/// `(L_q + 2 A L) conj(L) = (L_qbar + 2 B L + conj(B) M - L h_qbar conj(M) (1 + |q|^2)^2) conj(M)`
/// on `n x n` tables in both charts.
pub fn verify_lm_pdes(model: &ModelSphere, n: usize) -> Result<[LmResidual; 2]> {
    let tables = model_lm(model, n)?;
    let check = |t: &LmTable| -> Result<LmResidual> {
        let grid = t.grid;
        let rows: Vec<(f64, f64, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j) = grid.ij(idx);
                let q = ChartPoint::new(t.chart, grid.z(i, j));
                let red = reduced_coefficients(&model.h, &model.group, &q)?;
                let ev = potential_eval(&model.group, red.h, &q);
                let hqb = red.h_q.conj();
                let d2 = (1.0 + q.value.norm_sqr()).powi(2);
                let m = red.m;
                let rhs_m = hqb * d2 * m.norm_sqr();
                let m_qbar = -(ev.r_qbar + ev.r_h * hqb) / (ev.r * ev.r);
                let m_pde = (m_qbar + (red.a.conj() + red.b) * m - rhs_m).norm();
                let pm = fd_partials(|a, b| t.m[grid.index(a, b)], grid.nx, grid.ny, i, j, grid.spacing);
                let m_pde_fd = (dzbar(pm[0], pm[1]) + (red.a.conj() + red.b) * m - rhs_m).norm();
                let pl = fd_partials(|a, b| t.l[grid.index(a, b)], grid.nx, grid.ny, i, j, grid.spacing);
                let (l_q, l_qbar) = (dz(pl[0], pl[1]), dzbar(pl[0], pl[1]));
                let l = t.l[idx];
                let lhs = (l_q + 2.0 * red.a * l) * l.conj();
                let rhs = (l_qbar + 2.0 * red.b * l + red.b.conj() * m - l * hqb * m.conj() * d2) * m.conj();
                Ok((m_pde, m_pde_fd, (lhs - rhs).norm()))
            })
            .collect::<Result<_>>()?;
        Ok(LmResidual {
            chart: t.chart,
            grid,
            m_pde: rows.iter().map(|r| r.0).collect(),
            m_pde_fd: rows.iter().map(|r| r.1).collect(),
            l_pde: rows.iter().map(|r| r.2).collect(),
        })
    };
    Ok([check(&tables[0])?, check(&tables[1])?])
}

/// A rotational surface with mean curvature `h(nu3)` through the circle of
/// radius `x0` on which the normal is horizontal, in the conformal
/// parameter `z = u + i phi` (`u` isothermal along the meridian) over the
/// square `[-half, half]^2` with `n x n` nodes.
///
/// In `u` the profile equations are regular:
/// `dtheta/du = 2 h(cos theta) x - sin theta`, `dx/du = x cos theta`.
pub fn delaunay_annulus(h: &PrescribedH, x0: f64, half: f64, n: usize) -> Result<TwoChartComplexField> {
    let (hf, _) = axial(h)?;
    if !(x0 > 0.0 && half > 0.0) || n < 5 {
        return Err(Error::InvalidInput(format!("annulus needs x0 > 0, half > 0 and n >= 5 (x0 = {x0}, half = {half}, n = {n})")));
    }
    let grid = Grid::square(n, half);
    let f = |y: [f64; 2]| {
        let (s, c) = y[0].sin_cos();
        [2.0 * hf(c) * y[1] - s, y[1] * c]
    };
    let rk4 = |y: [f64; 2], du: f64| {
        let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
        let k1 = f(y);
        let k2 = f(add(y, k1, 0.5 * du));
        let k3 = f(add(y, k2, 0.5 * du));
        let k4 = f(add(y, k3, du));
        [y[0] + du / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]), y[1] + du / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])]
    };
    let substeps = 8;
    let mut states = vec![[0.0; 2]; grid.nx];
    let us: Vec<f64> = (0..grid.nx).map(|i| grid.z(i, 0).re).collect();
    let start = us.iter().position(|&u| u >= 0.0).unwrap_or(grid.nx);
    for dir in [1i64, -1] {
        let mut y = [0.5 * PI, x0];
        let mut u = 0.0;
        let mut i = if dir > 0 { start as i64 } else { start as i64 - 1 };
        while i >= 0 && (i as usize) < grid.nx {
            let target = us[i as usize];
            let m = ((target - u).abs() / grid.spacing * substeps as f64).ceil().max(1.0) as usize;
            let du = (target - u) / m as f64;
            for _ in 0..m {
                y = rk4(y, du);
            }
            u = target;
            if !(y[0] > 0.0 && y[0] < PI && y[1] > 0.0 && y[0].is_finite() && y[1].is_finite()) {
                return Err(Error::InvalidInput(format!("annulus profile leaves the regular range at u = {u}")));
            }
            states[i as usize] = y;
            i += dir;
        }
    }
    let nodes: Vec<(ChartPoint, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let phi = grid.z(i, j).im;
            let th = states[i][0];
            let (s, c) = th.sin_cos();
            let nu = [s * phi.cos(), s * phi.sin(), c];
            Ok((stereo(nu)?.canonical(), hf(c)))
        })
        .collect::<Result<_>>()?;
    let (g, hv) = nodes.into_iter().unzip();
    let mut field = TwoChartComplexField::new(grid, g, hv)?;
    field.prescribed = Some(h.clone());
    Ok(field)
}

/// Radius of the circle with horizontal normal on the model (`theta = pi/2`).
pub fn equator_radius(model: &ModelSphere) -> f64 {
    match &model.shape {
        ModelShape::Round { h0 } => 1.0 / h0,
        ModelShape::Rotational(p) => p.at(0.5 * PI).x,
    }
}
