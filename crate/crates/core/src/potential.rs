//! The potential `R(H, q) = H (1 + |q|^2)^2 + Theta(q)` of a metric Lie
//! group, its Wirtinger partials in both sphere charts, and a scan for its
//! zero set.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::{CriticalThreshold, GroupParams, GroupSpec};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Chart of the Riemann sphere: `Q` uses `q` directly, `W` uses `w = 1/q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Chart {
    Q,
    W,
}

impl Chart {
    pub fn other(self) -> Chart {
        match self {
            Chart::Q => Chart::W,
            Chart::W => Chart::Q,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Chart::Q => "q",
            Chart::W => "w",
        }
    }

    pub fn parse(s: &str) -> Option<Chart> {
        match s.trim() {
            "q" | "Q" | "0" => Some(Chart::Q),
            "w" | "W" | "1" => Some(Chart::W),
            _ => None,
        }
    }
}

/// A point of the extended plane in one of the two charts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: Chart,
    pub value: Complex64,
}

/// Values with modulus at most this are kept in their chart when
/// switching to the canonical representation.
pub const CHART_SWITCH: f64 = 1.0;

impl ChartPoint {
    pub fn new(chart: Chart, value: Complex64) -> Self {
        ChartPoint { chart, value }
    }

    pub fn q(value: Complex64) -> Self {
        ChartPoint { chart: Chart::Q, value }
    }

    pub fn w(value: Complex64) -> Self {
        ChartPoint { chart: Chart::W, value }
    }

    pub fn infinity() -> Self {
        ChartPoint::w(Complex64::new(0.0, 0.0))
    }

    /// Chart `Q` when `|q| <= 1`, otherwise chart `W`.
    pub fn from_q(q: Complex64) -> Self {
        if q.norm() <= CHART_SWITCH {
            ChartPoint::q(q)
        } else {
            ChartPoint::w(q.inv())
        }
    }

    /// The same point with `|value| <= 1`.
    pub fn canonical(self) -> Self {
        if self.value.norm() <= CHART_SWITCH {
            self
        } else {
            ChartPoint::new(self.chart.other(), self.value.inv())
        }
    }

    /// Coordinate of this point in `chart`; infinite at the opposite pole.
    pub fn value_in(&self, chart: Chart) -> Complex64 {
        if chart == self.chart {
            self.value
        } else {
            self.value.inv()
        }
    }

    /// `q`, or `None` at `q = infinity`.
    pub fn to_q(&self) -> Option<Complex64> {
        match self.chart {
            Chart::Q => Some(self.value),
            Chart::W if self.value == Complex64::new(0.0, 0.0) => None,
            Chart::W => Some(self.value.inv()),
        }
    }

    /// Chordal distance between the corresponding points of the unit sphere.
    pub fn chordal_distance(&self, other: &ChartPoint) -> f64 {
        let a = crate::gaussfield::stereo_inv(self);
        let b = crate::gaussfield::stereo_inv(other);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }
}

/// `R` and its partials `R_q = dR/dq`, `R_qbar = dR/dq̄` (with `q, q̄`
/// independent) and `R_H`. In chart `W` every quantity refers to the
/// rescaled potential `R~(H, w) = |w|^4 R(H, 1/w)` and `w`-derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialEval {
    pub r: Complex64,
    pub r_q: Complex64,
    pub r_qbar: Complex64,
    pub r_h: f64,
    pub chart: Chart,
}

/// `Theta` with its two Wirtinger partials, in the chart of `p`.
pub fn theta_with_partials(g: &GroupSpec, p: &ChartPoint) -> (Complex64, Complex64, Complex64) {
    let q = p.value;
    let qb = q.conj();
    let qq = q * qb;
    match g.params() {
        GroupParams::Unimodular { .. } => {
            // Invariant under q -> 1/q after the |q|^4 rescaling.
            let [mu1, mu2, mu3] = g.mu();
            let q2 = q * q;
            let qb2 = qb * qb;
            let plus = (1.0 + q2) * (1.0 + qb2);
            let minus = (1.0 - q2) * (1.0 - qb2);
            let f = -0.5 * I;
            let th = f * (mu2 * plus + mu1 * minus + 4.0 * mu3 * qq);
            let th_q = f * (2.0 * mu2 * q * (1.0 + qb2) - 2.0 * mu1 * q * (1.0 - qb2) + 4.0 * mu3 * qb);
            let th_qb = f * (2.0 * mu2 * qb * (1.0 + q2) - 2.0 * mu1 * qb * (1.0 - q2) + 4.0 * mu3 * q);
            (th, th_q, th_qb)
        }
        GroupParams::Nonunimodular { a, b } => {
            // The rescaled W-chart form flips the sign of the first two terms.
            let s = match p.chart {
                Chart::Q => 1.0,
                Chart::W => -1.0,
            };
            let q2 = q * q;
            let qb2 = qb * qb;
            let th = -s * (1.0 - qq * qq) - s * a * (q2 - qb2) - I * b * (2.0 * qq - a * (q2 + qb2));
            let th_q = s * 2.0 * q * qb2 - s * 2.0 * a * q - I * b * (2.0 * qb - 2.0 * a * q);
            let th_qb = s * 2.0 * q2 * qb + s * 2.0 * a * qb - I * b * (2.0 * q - 2.0 * a * qb);
            (th, th_q, th_qb)
        }
    }
}

pub fn theta(g: &GroupSpec, p: &ChartPoint) -> Complex64 {
    theta_with_partials(g, p).0
}

/// `R(H, .)` and partials at `p`. The `H`-term has the same form in both
/// charts, so `R_H = (1 + |value|^2)^2` either way.
pub fn potential_eval(g: &GroupSpec, h: f64, p: &ChartPoint) -> PotentialEval {
    let q = p.value;
    let qb = q.conj();
    let d = 1.0 + q.norm_sqr();
    let (th, th_q, th_qb) = theta_with_partials(g, p);
    PotentialEval {
        r: h * d * d + th,
        r_q: 2.0 * h * qb * d + th_q,
        r_qbar: 2.0 * h * q * d + th_qb,
        r_h: d * d,
        chart: p.chart,
    }
}

/// `R(H, .)` at `p` without partials.
pub fn potential_value(g: &GroupSpec, h: f64, p: &ChartPoint) -> Complex64 {
    let d = 1.0 + p.value.norm_sqr();
    h * d * d + theta(g, p)
}

/// `lim R(H, q) / |q|^4` as `q -> infinity`.
pub fn potential_infinity_limit(g: &GroupSpec, h: f64) -> Complex64 {
    potential_value(g, h, &ChartPoint::infinity())
}

pub fn critical_threshold_h0(g: &GroupSpec) -> CriticalThreshold {
    g.compactness()
}

/// Square `[-SCAN_HALF_WIDTH, SCAN_HALF_WIDTH]^2` scanned in each chart;
/// together the two squares cover the sphere with overlap.
pub const SCAN_HALF_WIDTH: f64 = 1.05;

/// Zeros of `q -> R(H, q)` on the extended plane.
///
/// Each chart is sampled on a `grid_n x grid_n` lattice. A plaquette is a
/// candidate when the argument of `R` winds around it, when both `Re R` and
/// `Im R` change sign on its corners, or when one of its corners is a
/// discrete local minimum of `|R|` (which catches zeros of even order such
/// as `R = 2|q|^2(1+|q|^2)`). Candidates are refined by damped Gauss-Newton
/// on `(Re R, Im R)`, kept when `|R| < 1e-12` and merged within chordal
/// distance `1e-6`. Curves of zeros come back as a finite sample.
pub fn zero_scan(g: &GroupSpec, h: f64, grid_n: usize) -> Result<Vec<ChartPoint>> {
    if grid_n < 16 {
        return Err(Error::InvalidInput(format!("zero_scan needs grid_n >= 16, got {grid_n}")));
    }
    let step = 2.0 * SCAN_HALF_WIDTH / (grid_n - 1) as f64;
    let coord = |k: usize| -SCAN_HALF_WIDTH + step * k as f64;

    let mut seeds = Vec::new();
    let mut max_abs: f64 = 0.0;
    for chart in [Chart::Q, Chart::W] {
        let values: Vec<Complex64> = (0..grid_n * grid_n)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx % grid_n, idx / grid_n);
                potential_value(g, h, &ChartPoint::new(chart, Complex64::new(coord(i), coord(j))))
            })
            .collect();
        max_abs = values.iter().fold(max_abs, |m, v| m.max(v.norm()));
        let at = |i: usize, j: usize| values[j * grid_n + i];
        let is_local_min = |i: usize, j: usize| {
            let v = at(i, j).norm();
            let (i0, i1) = (i.saturating_sub(1), (i + 1).min(grid_n - 1));
            let (j0, j1) = (j.saturating_sub(1), (j + 1).min(grid_n - 1));
            (j0..=j1).all(|jj| (i0..=i1).all(|ii| at(ii, jj).norm() >= v))
        };
        let found: Vec<Complex64> = (0..(grid_n - 1) * (grid_n - 1))
            .into_par_iter()
            .filter_map(|cell| {
                let (i, j) = (cell % (grid_n - 1), cell / (grid_n - 1));
                let corners = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
                let winding = winding_of(&corners);
                let re_change = corners.iter().any(|c| c.re <= 0.0) && corners.iter().any(|c| c.re >= 0.0);
                let im_change = corners.iter().any(|c| c.im <= 0.0) && corners.iter().any(|c| c.im >= 0.0);
                let local_min = is_local_min(i, j);
                (winding != 0 || (re_change && im_change) || local_min)
                    .then(|| Complex64::new(coord(i) + 0.5 * step, coord(j) + 0.5 * step))
            })
            .collect();
        seeds.extend(found.into_iter().map(|v| ChartPoint::new(chart, v)));
    }
    if max_abs < 1e-13 {
        return Err(Error::IdenticallyZero { max_abs });
    }

    let refined: Vec<ChartPoint> = seeds
        .par_iter()
        .filter_map(|s| refine_zero(g, h, *s))
        .map(ChartPoint::canonical)
        .collect();

    let mut zeros: Vec<ChartPoint> = Vec::new();
    for z in refined {
        if zeros.iter().all(|k| k.chordal_distance(&z) >= 1e-6) {
            zeros.push(z);
        }
    }
    zeros.sort_by(|a, b| {
        a.chart
            .cmp(&b.chart)
            .then(a.value.re.total_cmp(&b.value.re))
            .then(a.value.im.total_cmp(&b.value.im))
    });
    Ok(zeros)
}

/// Net winding of the argument around a closed polygon, in whole turns.
pub(crate) fn winding_of(values: &[Complex64]) -> i32 {
    let mut total = 0.0;
    for k in 0..values.len() {
        let a = values[k];
        let b = values[(k + 1) % values.len()];
        total += (b / a).arg();
    }
    (total / std::f64::consts::TAU).round() as i32
}

/// Levenberg-Marquardt on `F(x, y) = (Re R, Im R)`; returns the point if it
/// reaches `|R| < 1e-12`.
fn refine_zero(g: &GroupSpec, h: f64, start: ChartPoint) -> Option<ChartPoint> {
    let mut p = start;
    let mut ev = potential_eval(g, h, &p);
    let mut damping = 1e-3;
    for _ in 0..400 {
        if ev.r.norm() < 1e-14 {
            break;
        }
        if p.value.norm() > 1.5 {
            p = p.canonical();
            ev = potential_eval(g, h, &p);
        }
        let dx = ev.r_q + ev.r_qbar;
        let dy = I * (ev.r_q - ev.r_qbar);
        let (j11, j12, j21, j22) = (dx.re, dy.re, dx.im, dy.im);
        let (f1, f2) = (ev.r.re, ev.r.im);
        let a11 = j11 * j11 + j21 * j21;
        let a12 = j11 * j12 + j21 * j22;
        let a22 = j12 * j12 + j22 * j22;
        let g1 = j11 * f1 + j21 * f2;
        let g2 = j12 * f1 + j22 * f2;
        let scale = a11.max(a22).max(1e-300);
        let mut accepted = false;
        for _ in 0..40 {
            let m11 = a11 + damping * scale;
            let m22 = a22 + damping * scale;
            let det = m11 * m22 - a12 * a12;
            if det == 0.0 || !det.is_finite() {
                damping *= 10.0;
                continue;
            }
            let sx = -(m22 * g1 - a12 * g2) / det;
            let sy = -(m11 * g2 - a12 * g1) / det;
            let trial = ChartPoint::new(p.chart, p.value + Complex64::new(sx, sy));
            let tev = potential_eval(g, h, &trial);
            if tev.r.norm() < ev.r.norm() {
                let tiny = sx.hypot(sy) < 1e-17 * (1.0 + p.value.norm());
                p = trial;
                ev = tev;
                damping = (damping / 3.0).max(1e-12);
                accepted = true;
                if tiny {
                    return (ev.r.norm() < 1e-12).then_some(p);
                }
                break;
            }
            damping *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    (ev.r.norm() < 1e-12).then_some(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn theta_examples() {
        let q = ChartPoint::q(c(0.3, -0.8));
        assert_eq!(theta(&GroupSpec::euclidean(), &q), c(0.0, 0.0));
        let s3 = GroupSpec::unimodular(2.0, 2.0, 2.0).unwrap();
        assert_abs_diff_eq!((theta(&s3, &ChartPoint::q(c(0.0, 0.0))) - c(0.0, -1.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((theta(&GroupSpec::hyperbolic(), &ChartPoint::q(c(0.0, 0.0))) - c(-1.0, 0.0)).norm(), 0.0);
    }

    #[test]
    fn potential_examples() {
        let r3 = GroupSpec::euclidean();
        let e = potential_eval(&r3, 1.0, &ChartPoint::q(c(0.0, 0.0)));
        assert_eq!((e.r, e.r_q, e.r_qbar, e.r_h), (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), 1.0));
        let e = potential_eval(&r3, 1.0, &ChartPoint::q(c(1.0, 0.0)));
        assert_eq!((e.r, e.r_q), (c(4.0, 0.0), c(4.0, 0.0)));
        let e = potential_eval(&GroupSpec::hyperbolic(), 1.0, &ChartPoint::q(c(0.0, 0.0)));
        assert_eq!(e.r, c(0.0, 0.0));
    }

    #[test]
    fn infinity_limits() {
        let h = 0.7;
        assert_eq!(potential_infinity_limit(&GroupSpec::euclidean(), h), c(h, 0.0));
        assert_eq!(potential_infinity_limit(&GroupSpec::hyperbolic(), h), c(h + 1.0, 0.0));
        let s3 = GroupSpec::unimodular(2.0, 2.0, 2.0).unwrap();
        assert_abs_diff_eq!((potential_infinity_limit(&s3, h) - c(h, -1.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn h0_examples() {
        assert_eq!(critical_threshold_h0(&GroupSpec::unimodular(1.0, 1.0, -1.0).unwrap()), CriticalThreshold::Threshold(0.0));
        assert_eq!(critical_threshold_h0(&GroupSpec::nonunimodular(0.5, 0.2).unwrap()), CriticalThreshold::Threshold(1.0));
        assert_eq!(critical_threshold_h0(&GroupSpec::unimodular(2.0, 2.0, 2.0).unwrap()), CriticalThreshold::Compact);
    }

    #[test]
    fn scan_h3_unit_curvature_finds_origin() {
        let zeros = zero_scan(&GroupSpec::hyperbolic(), 1.0, 32).unwrap();
        assert_eq!(zeros.len(), 1, "{zeros:?}");
        assert_eq!(zeros[0].chart, Chart::Q);
        assert!(zeros[0].value.norm() < 1e-6);
    }

    #[test]
    fn scan_without_zeros() {
        assert!(zero_scan(&GroupSpec::unimodular(2.0, 2.0, 2.0).unwrap(), 0.3, 32).unwrap().is_empty());
        assert!(zero_scan(&GroupSpec::euclidean(), 2.0, 32).unwrap().is_empty());
    }

    #[test]
    fn scan_reports_identically_zero() {
        assert!(matches!(zero_scan(&GroupSpec::euclidean(), 0.0, 16), Err(Error::IdenticallyZero { .. })));
    }

    #[test]
    fn scan_sol3_zero_curvature_finds_zeros() {
        // Sol3 with c = (1, -1, 0): mu = (-1, 1, 0), Theta = -(i/2)(|1+q^2|^2 - |1-q^2|^2)
        // vanishes where Re(q^2) = 0 at H = 0, so zeros come back on the diagonals.
        let g = GroupSpec::unimodular(1.0, -1.0, 0.0).unwrap();
        let zeros = zero_scan(&g, 0.0, 32).unwrap();
        assert!(!zeros.is_empty());
        for z in zeros {
            assert!(potential_value(&g, 0.0, &z).norm() < 1e-12);
        }
    }
}
