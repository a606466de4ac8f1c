//! Analytic surfaces and fields with known Gauss map and mean curvature,
//! used as seeds for round trips, benchmarks and the command line.
//!
//! Every mesh is conformally parametrized over a square grid of `n` cells
//! per side; normals are oriented so that `(psi_x, psi_y, N)` is positive,
//! which for spheres is the normal pointing to the centre (`H > 0`).

use num_complex::Complex64;

use crate::gaussfield::{stereo_inv, Grid, TwoChartComplexField};
use crate::liegroup::GroupSpec;
use crate::potential::ChartPoint;
use crate::weierstrass::{Point4, SurfaceMesh};

fn mesh(grid: Grid, group: GroupSpec, f: impl Fn(Complex64) -> Point4) -> SurfaceMesh {
    let positions = (0..grid.len())
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            f(grid.z(i, j))
        })
        .collect();
    SurfaceMesh::from_positions(grid, positions, group).expect("fixture mesh is regular")
}

/// `g(z) = z` with constant `H = h0` on `[-half, half]^2`.
pub fn round_sphere_field(n: usize, half: f64, h0: f64) -> TwoChartComplexField {
    TwoChartComplexField::from_fn(Grid::square(n + 1, half), |z| (ChartPoint::from_q(z), h0))
}

/// Sphere of the given radius centred at the origin,
/// `psi(z) = -radius * nu(z)` with `nu` the inverse stereographic projection.
pub fn euclidean_sphere(n: usize, radius: f64) -> SurfaceMesh {
    mesh(Grid::square(n + 1, 1.0), GroupSpec::euclidean(), |z| {
        let nu = stereo_inv(&ChartPoint::from_q(z));
        [-radius * nu[0], -radius * nu[1], -radius * nu[2], 0.0]
    })
}

/// The horizontal plane `z = height` of a semidirect (or Euclidean) model,
/// parametrized by `(x, y)` on `[-1, 1]^2`.
pub fn semidirect_leaf(group: GroupSpec, n: usize, height: f64) -> SurfaceMesh {
    mesh(Grid::square(n + 1, 1.0), group, |z| [z.re, z.im, height, 0.0])
}

/// A Euclidean round sphere of radius `rho` centred at height `t0 > rho`
/// in the upper half-space model, written in semidirect coordinates
/// `(x, y, ln t)` of `H^3`. It is a geodesic sphere with constant mean
/// curvature.
pub fn hyperbolic_sphere(n: usize, t0: f64, rho: f64) -> SurfaceMesh {
    assert!(t0 > rho, "sphere must stay in the upper half-space");
    mesh(Grid::square(n + 1, 1.0), GroupSpec::hyperbolic(), |z| {
        let nu = stereo_inv(&ChartPoint::from_q(z));
        let x = -rho * nu[0];
        let y = -rho * nu[1];
        let t = t0 - rho * nu[2];
        [x, y, t.ln(), 0.0]
    })
}

/// Mean curvature `coth r` of [`hyperbolic_sphere`], with `r` its
/// hyperbolic radius.
pub fn hyperbolic_sphere_curvature(t0: f64, rho: f64) -> f64 {
    // The vertical diameter runs from t0 - rho to t0 + rho and has
    // hyperbolic length ln((t0 + rho)/(t0 - rho)).
    let r = 0.5 * ((t0 + rho) / (t0 - rho)).ln();
    1.0 / r.tanh()
}

/// Geodesic sphere of radius `r` about `1` in the unit quaternions (the
/// group with `c = (2, 2, 2)`): `psi = cos r - sin r * nu(z)`.
pub fn s3_sphere(n: usize, r: f64) -> SurfaceMesh {
    let group = GroupSpec::unimodular(2.0, 2.0, 2.0).expect("valid constants");
    mesh(Grid::square(n + 1, 1.0), group, |z| {
        let nu = stereo_inv(&ChartPoint::from_q(z));
        [r.cos(), -r.sin() * nu[0], -r.sin() * nu[1], -r.sin() * nu[2]]
    })
}

/// Unit cylinder `psi(x, y) = (cos y, sin y, x)` over `[-1, 1]^2`, normal
/// pointing to the axis; `H = 1/2` and Hopf differential `-1/4`.
pub fn cylinder(n: usize) -> SurfaceMesh {
    mesh(Grid::square(n + 1, 1.0), GroupSpec::euclidean(), |z| [z.im.cos(), z.im.sin(), z.re, 0.0])
}
