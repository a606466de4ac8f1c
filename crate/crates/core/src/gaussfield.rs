//! Grid-sampled Gauss map fields on the two-chart sphere, finite-difference
//! Wirtinger derivatives and the elliptic PDE satisfied by the Gauss map of
//! a surface with prescribed mean curvature.
//!
//! A node stored in chart `W` carries `xi = 1/g`. The Gauss map equation
//! keeps its form for `xi` once `R` is replaced by the rescaled potential
//! `|w|^4 R(H, 1/w)`, which is what [`potential_eval`] returns in chart `W`,
//! so every per-node computation below is written once and evaluated in the
//! node's own chart.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::GroupSpec;
use crate::potential::{potential_eval, Chart, ChartPoint, PotentialEval};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `|R|` below this is treated as a zero of the potential.
pub const POTENTIAL_ZERO_TOL: f64 = 1e-13;

/// Stereographic projection from the south pole. Points with `nu3 < 0` are
/// returned in chart `W`.
pub fn stereo(nu: [f64; 3]) -> Result<ChartPoint> {
    let norm = (nu[0] * nu[0] + nu[1] * nu[1] + nu[2] * nu[2]).sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnit { norm });
    }
    Ok(if nu[2] >= 0.0 {
        ChartPoint::q(Complex64::new(nu[0], nu[1]) / (1.0 + nu[2]))
    } else {
        ChartPoint::w(Complex64::new(nu[0], -nu[1]) / (1.0 - nu[2]))
    })
}

pub fn stereo_inv(p: &ChartPoint) -> [f64; 3] {
    let v = p.value;
    let d = 1.0 + v.norm_sqr();
    match p.chart {
        Chart::Q => [2.0 * v.re / d, 2.0 * v.im / d, (1.0 - v.norm_sqr()) / d],
        Chart::W => [2.0 * v.re / d, -2.0 * v.im / d, (v.norm_sqr() - 1.0) / d],
    }
}

/// `d nu / d value` in the chart of `p` (Wirtinger derivative with respect
/// to the chart coordinate); `d nu / d conj(value)` is the conjugate.
pub fn dnu_dq(p: &ChartPoint) -> [Complex64; 3] {
    let v = p.value;
    let vb = v.conj();
    let d2 = (1.0 + v.norm_sqr()).powi(2);
    let n1 = (1.0 - vb * vb) / d2;
    let n2 = -I * (1.0 + vb * vb) / d2;
    let n3 = -2.0 * vb / d2;
    match p.chart {
        Chart::Q => [n1, n2, n3],
        Chart::W => [n1, -n2, -n3],
    }
}

/// Quantities built from `(g, g_z, H)`: the coefficients `A_i` of
/// `psi_z = sum A_i E_i`, `eta = 4 conj(g) g_z / R` and the conformal factor
/// `lambda = 2 sum |A_i|^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaCoeffs {
    pub eta: Complex64,
    pub a: [Complex64; 3],
    pub lambda: f64,
}

/// `g_z` is the derivative of the node's chart coordinate (of `1/g` in
/// chart `W`).
pub fn eta_coeffs(g: &ChartPoint, g_z: Complex64, h: f64, grp: &GroupSpec) -> Result<EtaCoeffs> {
    let ev = checked_potential(grp, h, g)?;
    Ok(eta_from_potential(g, g_z, ev.r))
}

pub(crate) fn eta_from_potential(g: &ChartPoint, g_z: Complex64, r: Complex64) -> EtaCoeffs {
    let v = g.value;
    let vb = v.conj();
    let s = match g.chart {
        Chart::Q => 1.0,
        Chart::W => -1.0,
    };
    let a1 = (vb * vb - 1.0) * g_z / r;
    let a2 = s * I * (vb * vb + 1.0) * g_z / r;
    let a3 = s * 2.0 * vb * g_z / r;
    let d = 1.0 + v.norm_sqr();
    let lambda = 4.0 * d * d * g_z.norm_sqr() / r.norm_sqr();
    EtaCoeffs { eta: 2.0 * a3, a: [a1, a2, a3], lambda }
}

pub(crate) fn checked_potential(grp: &GroupSpec, h: f64, p: &ChartPoint) -> Result<PotentialEval> {
    let ev = potential_eval(grp, h, p);
    let magnitude = ev.r.norm();
    if !(magnitude >= POTENTIAL_ZERO_TOL) {
        return Err(Error::PotentialZero { value: p.value, chart: p.chart, magnitude });
    }
    Ok(ev)
}

/// Rectangular lattice `z(i, j) = origin + spacing (i + i j)` with
/// row-major node index `j * nx + i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub origin: Complex64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, spacing: f64, origin: Complex64) -> Self {
        Grid { nx, ny, spacing, origin }
    }

    /// `n x n` nodes covering the square `[-half, half]^2`.
    pub fn square(n: usize, half: f64) -> Self {
        let spacing = 2.0 * half / (n - 1) as f64;
        Grid { nx: n, ny: n, spacing, origin: Complex64::new(-half, -half) }
    }

    /// Nodes covering `[x0, x1] x [y0, y1]` with `nx` nodes along x; the
    /// y count follows from the common spacing.
    pub fn rect(x0: f64, x1: f64, y0: f64, nx: usize, ny: usize) -> Self {
        let spacing = (x1 - x0) / (nx - 1) as f64;
        Grid { nx, ny, spacing, origin: Complex64::new(x0, y0) }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn z(&self, i: usize, j: usize) -> Complex64 {
        self.origin + self.spacing * Complex64::new(i as f64, j as f64)
    }
}

/// Real-valued function on the unit sphere.
pub type SphereFn = Arc<dyn Fn([f64; 3]) -> f64 + Send + Sync>;
/// Gradient of an extension of a [`SphereFn`] to a neighbourhood of the sphere.
pub type SphereGradFn = Arc<dyn Fn([f64; 3]) -> [f64; 3] + Send + Sync>;
/// Function of `t = nu3` for axially symmetric data.
pub type AxialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMethod {
    ClosedForm,
    CentralDifference,
}

/// Step of the central-difference fallback, in the chart coordinate.
pub const PRESCRIBED_FD_STEP: f64 = 1e-5;

/// A prescribed mean curvature `H = h(nu)` as a function on the sphere.
#[derive(Clone)]
pub struct PrescribedH {
    value: SphereFn,
    gradient: Option<SphereGradFn>,
    axial: Option<(AxialFn, Option<AxialFn>)>,
    description: String,
}

impl fmt::Debug for PrescribedH {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrescribedH")
            .field("description", &self.description)
            .field("method", &self.method())
            .field("axial", &self.axial.is_some())
            .finish()
    }
}

impl PrescribedH {
    pub fn new(description: impl Into<String>, value: SphereFn, gradient: Option<SphereGradFn>) -> Self {
        PrescribedH { value, gradient, axial: None, description: description.into() }
    }

    pub fn constant(h0: f64) -> Self {
        let value: SphereFn = Arc::new(move |_| h0);
        let gradient: SphereGradFn = Arc::new(|_| [0.0; 3]);
        let constant: AxialFn = Arc::new(move |_| h0);
        let zero: AxialFn = Arc::new(|_| 0.0);
        PrescribedH {
            value,
            gradient: Some(gradient),
            axial: Some((constant, Some(zero))),
            description: format!("{h0}"),
        }
    }

    /// `H = h(nu3)`, with `dh/dt` when known.
    pub fn axial(description: impl Into<String>, h: AxialFn, dh: Option<AxialFn>) -> Self {
        let hv = h.clone();
        let value: SphereFn = Arc::new(move |nu| hv(nu[2]));
        let gradient = dh.clone().map(|d| -> SphereGradFn { Arc::new(move |nu| [0.0, 0.0, d(nu[2])]) });
        PrescribedH { value, gradient, axial: Some((h, dh)), description: description.into() }
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn method(&self) -> DerivativeMethod {
        if self.gradient.is_some() {
            DerivativeMethod::ClosedForm
        } else {
            DerivativeMethod::CentralDifference
        }
    }

    /// `(h(t), h'(t))` access for axially symmetric data; `h'` falls back to
    /// a central difference.
    pub fn axial_parts(&self) -> Option<(AxialFn, AxialFn)> {
        let (h, dh) = self.axial.clone()?;
        let dh = dh.unwrap_or_else(|| {
            let h = h.clone();
            Arc::new(move |t| (h(t + PRESCRIBED_FD_STEP) - h(t - PRESCRIBED_FD_STEP)) / (2.0 * PRESCRIBED_FD_STEP))
        });
        Some((h, dh))
    }

    pub fn eval_nu(&self, nu: [f64; 3]) -> f64 {
        (self.value)(nu)
    }

    pub fn eval(&self, p: &ChartPoint) -> f64 {
        (self.value)(stereo_inv(p))
    }

    /// `dH/d value` in the chart of `p`; `dH/d conj(value)` is its conjugate.
    pub fn d_dq(&self, p: &ChartPoint) -> Complex64 {
        match &self.gradient {
            Some(grad) => {
                let gr = grad(stereo_inv(p));
                let dn = dnu_dq(p);
                gr[0] * dn[0] + gr[1] * dn[1] + gr[2] * dn[2]
            }
            None => self.d_dq_fd(p),
        }
    }

    /// Central-difference `dH/d value` regardless of the recorded method.
    pub fn d_dq_fd(&self, p: &ChartPoint) -> Complex64 {
        let s = PRESCRIBED_FD_STEP;
        let at = |d: Complex64| self.eval(&ChartPoint::new(p.chart, p.value + d));
        let fx = (at(Complex64::new(s, 0.0)) - at(Complex64::new(-s, 0.0))) / (2.0 * s);
        let fy = (at(Complex64::new(0.0, s)) - at(Complex64::new(0.0, -s))) / (2.0 * s);
        0.5 * Complex64::new(fx, -fy)
    }
}

/// Gauss map samples `g` (with chart flags) and mean curvature samples on
/// a rectangular grid.
#[derive(Clone, Debug)]
pub struct TwoChartComplexField {
    pub grid: Grid,
    pub g: Vec<ChartPoint>,
    pub h: Vec<f64>,
    pub prescribed: Option<PrescribedH>,
}

impl TwoChartComplexField {
    pub fn new(grid: Grid, g: Vec<ChartPoint>, h: Vec<f64>) -> Result<Self> {
        if g.len() != grid.len() || h.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} g and {} H samples for a {}x{} grid",
                g.len(),
                h.len(),
                grid.nx,
                grid.ny
            )));
        }
        Ok(TwoChartComplexField { grid, g, h, prescribed: None })
    }

    /// Samples `z -> (g(z), H(z))`, with `g` given as a sphere point.
    pub fn from_fn(grid: Grid, f: impl Fn(Complex64) -> (ChartPoint, f64) + Sync) -> Self {
        let (g, h): (Vec<_>, Vec<_>) = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j) = grid.ij(idx);
                let (p, h) = f(grid.z(i, j));
                (p.canonical(), h)
            })
            .unzip();
        TwoChartComplexField { grid, g, h, prescribed: None }
    }

    /// Samples a Gauss map and sets `H = h(g)`.
    pub fn from_prescribed(grid: Grid, prescribed: PrescribedH, g: impl Fn(Complex64) -> ChartPoint + Sync) -> Self {
        let mut field = Self::from_fn(grid, |z| (g(z), 0.0));
        field.h = field.g.par_iter().map(|p| prescribed.eval(p)).collect();
        field.prescribed = Some(prescribed);
        field
    }

    pub fn with_prescribed(mut self, prescribed: PrescribedH) -> Self {
        self.prescribed = Some(prescribed);
        self
    }

    pub fn at(&self, i: usize, j: usize) -> &ChartPoint {
        &self.g[self.grid.index(i, j)]
    }

    pub fn normal(&self, i: usize, j: usize) -> [f64; 3] {
        stereo_inv(self.at(i, j))
    }

    /// The same field with every node re-expressed in `chart` where the
    /// value stays finite and below `max_abs` in modulus.
    pub fn rechart(&self, chart: Chart, max_abs: f64) -> Self {
        let g = self
            .g
            .iter()
            .map(|p| {
                if p.chart == chart {
                    return *p;
                }
                let v = p.value_in(chart);
                if v.is_finite() && v.norm() <= max_abs {
                    ChartPoint::new(chart, v)
                } else {
                    *p
                }
            })
            .collect();
        TwoChartComplexField { g, ..self.clone() }
    }

    /// Largest node modulus of the `q`-chart values, a scale for tolerances.
    pub fn scale(&self) -> f64 {
        self.g.iter().map(|p| p.value.norm()).fold(1.0, f64::max)
    }
}

/// Finite-difference derivatives of `g` (in the node's chart) and `H`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wirtinger {
    pub g_z: Complex64,
    pub g_zbar: Complex64,
    pub g_zzbar: Complex64,
    pub h_zbar: Complex64,
    pub chart: Chart,
}

/// `(f_x, f_y, f_xx, f_yy)` at `(i, j)`: central differences inside,
/// second-order one-sided differences on the edges.
pub(crate) fn fd_partials<T>(f: impl Fn(usize, usize) -> T, nx: usize, ny: usize, i: usize, j: usize, h: f64) -> [T; 4]
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let line = |k: usize, n: usize, get: &dyn Fn(usize) -> T| -> (T, T) {
        let (d1, d2) = (0.5 / h, 1.0 / (h * h));
        let one_sided = |f0: T, f1: T, f2: T, f3: T| ((f1 * 4.0 - f0 * 3.0 - f2) * d1, (f0 * 2.0 - f1 * 5.0 + f2 * 4.0 - f3) * d2);
        if k == 0 {
            one_sided(get(0), get(1), get(2), get(3))
        } else if k == n - 1 {
            let (d, dd) = one_sided(get(k), get(k - 1), get(k - 2), get(k - 3));
            (d * -1.0, dd)
        } else {
            let (fm, f0, fp) = (get(k - 1), get(k), get(k + 1));
            ((fp - fm) * d1, (fp - f0 * 2.0 + fm) * d2)
        }
    };
    let (fx, fxx) = line(i, nx, &|k| f(k, j));
    let (fy, fyy) = line(j, ny, &|k| f(i, k));
    [fx, fy, fxx, fyy]
}

/// `(f_x, f_y, f_xx + f_yy)`, see [`fd_partials`].
pub(crate) fn fd_derivatives(
    f: impl Fn(usize, usize) -> Complex64,
    nx: usize,
    ny: usize,
    i: usize,
    j: usize,
    h: f64,
) -> (Complex64, Complex64, Complex64) {
    let [fx, fy, fxx, fyy] = fd_partials(f, nx, ny, i, j, h);
    (fx, fy, fxx + fyy)
}

/// `d/dz = (d/dx - i d/dy)/2`, `d/dzbar = (d/dx + i d/dy)/2`.
pub(crate) fn dz(fx: Complex64, fy: Complex64) -> Complex64 {
    0.5 * (fx - I * fy)
}

pub(crate) fn dzbar(fx: Complex64, fy: Complex64) -> Complex64 {
    0.5 * (fx + I * fy)
}

/// Wirtinger derivatives of the field at node `(i, j)` in that node's chart;
/// neighbours stored in the other chart are converted first.
pub fn wirtinger(field: &TwoChartComplexField, i: usize, j: usize) -> Result<Wirtinger> {
    let grid = &field.grid;
    if grid.nx < 4 || grid.ny < 4 || i >= grid.nx || j >= grid.ny {
        return Err(Error::StencilUnavailable { i, j });
    }
    let chart = field.at(i, j).chart;
    let (gx, gy, glap) =
        fd_derivatives(|a, b| field.at(a, b).value_in(chart), grid.nx, grid.ny, i, j, grid.spacing);
    let (hx, hy, _) = fd_derivatives(
        |a, b| Complex64::new(field.h[grid.index(a, b)], 0.0),
        grid.nx,
        grid.ny,
        i,
        j,
        grid.spacing,
    );
    let out = Wirtinger {
        g_z: dz(gx, gy),
        g_zbar: dzbar(gx, gy),
        g_zzbar: 0.25 * glap,
        h_zbar: dzbar(hx, hy),
        chart,
    };
    if !(out.g_z.is_finite() && out.g_zbar.is_finite() && out.g_zzbar.is_finite()) {
        return Err(Error::StencilUnavailable { i, j });
    }
    Ok(out)
}

/// Coefficients of `g_zzbar = c_mixed g_z g_zbar + c_abs |g_z|^2 + c_h H_zbar g_z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdeCoefficients {
    pub c_mixed: Complex64,
    pub c_abs: Complex64,
    pub c_h: Complex64,
}

pub fn pde_coefficients(grp: &GroupSpec, h: f64, p: &ChartPoint) -> Result<PdeCoefficients> {
    let ev = checked_potential(grp, h, p)?;
    let rq = ev.r_q / ev.r;
    Ok(PdeCoefficients { c_mixed: rq, c_abs: ev.r_qbar / ev.r - rq.conj(), c_h: ev.r_h / ev.r })
}

/// Residual of the Gauss map equation at one point given its derivatives.
pub fn pde_residual_at(grp: &GroupSpec, h: f64, p: &ChartPoint, d: &Wirtinger) -> Result<Complex64> {
    let c = pde_coefficients(grp, h, p)?;
    Ok(d.g_zzbar - c.c_mixed * d.g_z * d.g_zbar - c.c_abs * d.g_z.norm_sqr() - c.c_h * d.h_zbar * d.g_z)
}

/// Per-node residual of the Gauss map equation, derivatives by finite differences.
pub fn pde_residual(field: &TwoChartComplexField, grp: &GroupSpec) -> Result<Vec<Complex64>> {
    let grid = field.grid;
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let d = wirtinger(field, i, j)?;
            pde_residual_at(grp, field.h[idx], &field.g[idx], &d)
        })
        .collect()
}

/// `M = 1/R(h(q), q)` and the coefficients of
/// `g_zzbar = A(g) g_z g_zbar + B(g) |g_z|^2` for `H = h(g)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedCoefficients {
    pub m: Complex64,
    pub a: Complex64,
    pub b: Complex64,
    /// `h` and its chart derivative at the point, for reuse.
    pub h: f64,
    pub h_q: Complex64,
}

pub fn reduced_coefficients(pres: &PrescribedH, grp: &GroupSpec, p: &ChartPoint) -> Result<ReducedCoefficients> {
    let h = pres.eval(p);
    let h_q = pres.d_dq(p);
    let ev = checked_potential(grp, h, p)?;
    let rq = ev.r_q / ev.r;
    Ok(ReducedCoefficients {
        m: ev.r.inv(),
        a: (ev.r_q + ev.r_h * h_q) / ev.r,
        b: ev.r_qbar / ev.r - rq.conj() + ev.r_h * h_q.conj() / ev.r,
        h,
        h_q,
    })
}

/// Per-node residual of `g_zzbar = A(g) g_z g_zbar + B(g) |g_z|^2`.
pub fn reduced_residual(field: &TwoChartComplexField, grp: &GroupSpec) -> Result<Vec<Complex64>> {
    let pres = field
        .prescribed
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("field carries no prescribed mean curvature".into()))?;
    let grid = field.grid;
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let d = wirtinger(field, i, j)?;
            let c = reduced_coefficients(pres, grp, &field.g[idx])?;
            Ok(d.g_zzbar - c.a * d.g_z * d.g_zbar - c.b * d.g_z.norm_sqr())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn stereo_examples() {
        assert_eq!(stereo([0.0, 0.0, 1.0]).unwrap(), ChartPoint::q(c(0.0, 0.0)));
        assert_eq!(stereo([0.0, 0.0, -1.0]).unwrap(), ChartPoint::infinity());
        assert_eq!(stereo([1.0, 0.0, 0.0]).unwrap(), ChartPoint::q(c(1.0, 0.0)));
        assert!(matches!(stereo([1.0, 1.0, 0.0]), Err(Error::NotUnit { .. })));
    }

    #[test]
    fn w_chart_inverse_matches_q_chart() {
        let q = c(0.9, -1.3);
        let a = stereo_inv(&ChartPoint::q(q));
        let b = stereo_inv(&ChartPoint::w(q.inv()));
        for k in 0..3 {
            assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn eta_examples() {
        let r3 = GroupSpec::euclidean();
        let e = eta_coeffs(&ChartPoint::q(c(0.0, 0.0)), c(1.0, 0.0), 1.0, &r3).unwrap();
        assert_eq!(e.a, [c(-1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]);
        assert_eq!(e.lambda, 4.0);
        let e = eta_coeffs(&ChartPoint::q(c(1.0, 0.0)), c(1.0, 0.0), 1.0, &r3).unwrap();
        assert_eq!(e.eta, c(1.0, 0.0));
        assert_eq!(e.a, [c(0.0, 0.0), c(0.0, 0.5), c(0.5, 0.0)]);
        // 4 (1 + 1)^2 / 4^2 = 2 (|A_2|^2 + |A_3|^2) = 1
        assert_eq!(e.lambda, 1.0);
    }

    #[test]
    fn eta_w_chart_agrees_with_q_chart() {
        let grp = GroupSpec::nonunimodular(0.3, 0.8).unwrap();
        let q = c(1.1, 0.4);
        let qz = c(0.7, -0.2);
        let a = eta_coeffs(&ChartPoint::q(q), qz, 1.7, &grp).unwrap();
        // xi = 1/g, xi_z = -g_z / g^2
        let b = eta_coeffs(&ChartPoint::w(q.inv()), -qz / (q * q), 1.7, &grp).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!((a.a[k] - b.a[k]).norm(), 0.0, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(a.lambda, b.lambda, epsilon = 1e-13);
    }

    #[test]
    fn eta_rejects_vanishing_potential() {
        let r = eta_coeffs(&ChartPoint::q(c(0.0, 0.0)), c(1.0, 0.0), 1.0, &GroupSpec::hyperbolic());
        assert!(matches!(r, Err(Error::PotentialZero { .. })));
    }

    fn sample(n: usize, half: f64, f: impl Fn(Complex64) -> Complex64 + Sync) -> TwoChartComplexField {
        let grid = Grid::square(n, half);
        TwoChartComplexField::from_fn(grid, |z| (ChartPoint::q(f(z)), 1.0))
    }

    #[test]
    fn wirtinger_linear_field_is_exact() {
        let f = sample(9, 0.7, |z| z);
        for (i, j) in [(4, 4), (0, 0), (8, 3)] {
            let d = wirtinger(&f, i, j).unwrap();
            assert_abs_diff_eq!((d.g_z - 1.0).norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(d.g_zbar.norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(d.g_zzbar.norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn wirtinger_second_order() {
        // Node (n-1, mid) sits at z = 1 on the square [-1, 1]^2.
        let n = 65;
        let f = sample(n, 1.0, |z| z * z);
        let d = wirtinger(&f, n - 1, n / 2).unwrap();
        assert_abs_diff_eq!((d.g_z - 2.0).norm(), 0.0, epsilon = 1e-12);
        let f = sample(n, 1.0, |z| c(z.norm_sqr(), 0.0));
        let d = wirtinger(&f, n - 1, n / 2).unwrap();
        assert_abs_diff_eq!((d.g_z - 1.0).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((d.g_zbar - 1.0).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((d.g_zzbar - 1.0).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn wirtinger_needs_four_nodes() {
        let f = sample(3, 0.7, |z| z);
        assert!(matches!(wirtinger(&f, 1, 1), Err(Error::StencilUnavailable { .. })));
    }

    #[test]
    fn euclidean_coefficients_reduce() {
        let r3 = GroupSpec::euclidean();
        let q = c(0.4, -0.9);
        let co = pde_coefficients(&r3, 1.3, &ChartPoint::q(q)).unwrap();
        assert_abs_diff_eq!((co.c_mixed - 2.0 * q.conj() / (1.0 + q.norm_sqr())).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(co.c_abs.norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((co.c_h - 1.0 / 1.3).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn round_sphere_residual_vanishes() {
        // Linear in chart Q, so the differences are exact there.
        let f = sample(17, 0.7, |z| z);
        let res = pde_residual(&f, &GroupSpec::euclidean()).unwrap();
        assert!(res.iter().all(|r| r.norm() < 1e-12));
        let f = sample(17, 0.7, |z| z + 0.1 * z.conj());
        let res = pde_residual(&f, &GroupSpec::euclidean()).unwrap();
        assert!(res.iter().any(|r| r.norm() > 1e-3));
    }

    #[test]
    fn reduced_coefficients_constant_h() {
        let pres = PrescribedH::constant(2.0);
        let r3 = GroupSpec::euclidean();
        let q = c(0.2, 0.5);
        let rc = reduced_coefficients(&pres, &r3, &ChartPoint::q(q)).unwrap();
        assert_abs_diff_eq!((rc.a - 2.0 * q.conj() / (1.0 + q.norm_sqr())).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rc.b.norm(), 0.0, epsilon = 1e-15);
        let rc = reduced_coefficients(&pres, &r3, &ChartPoint::q(c(0.0, 0.0))).unwrap();
        assert_eq!(rc.m, c(0.5, 0.0));
    }

    #[test]
    fn prescribed_closed_form_matches_central_difference() {
        let h: AxialFn = Arc::new(|t| 1.0 + 0.3 * t * t);
        let dh: AxialFn = Arc::new(|t| 0.6 * t);
        let pres = PrescribedH::axial("1+0.3*t^2", h, Some(dh));
        assert_eq!(pres.method(), DerivativeMethod::ClosedForm);
        for p in [ChartPoint::q(c(0.3, 0.2)), ChartPoint::w(c(-0.5, 0.6))] {
            let a = pres.d_dq(&p);
            let b = pres.d_dq_fd(&p);
            assert!((a - b).norm() < 1e-6 * (1.0 + a.norm()), "{a} vs {b}");
        }
    }
}
