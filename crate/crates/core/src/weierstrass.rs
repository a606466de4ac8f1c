//! Surface reconstruction from Gauss map data by integrating
//! `psi_z = sum A_i E_i(psi)` over the grid, and the inverse extraction of
//! Gauss map and mean curvature from a structured mesh.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussfield::{
    checked_potential, dz, dzbar, eta_from_potential, fd_partials, stereo, wirtinger, Grid,
    TwoChartComplexField,
};
use crate::liegroup::{connection_table, expm2, mat2_apply, ConnectionTable, GroupParams, GroupSpec, Table3};
use crate::potential::ChartPoint;

/// Ambient point: `[x, y, z, 0]` for the Euclidean and semidirect backends,
/// `[w, x, y, z]` (scalar part first) for a unit quaternion.
pub type Point4 = [f64; 4];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Backend {
    /// Flat `R^3`, constant frame.
    Euclidean,
    /// `R^2 x_A R` in coordinates `(x, y, z)`.
    Semidirect { a: [[f64; 2]; 2] },
    /// `SU(2)` as unit quaternions with `E_i(psi) = psi (lambda_i e_i)`.
    Quaternion { lambda: [f64; 3] },
}

impl Backend {
    pub fn for_group(grp: &GroupSpec) -> Result<Backend> {
        match grp.params() {
            GroupParams::Unimodular { c } if c == [0.0; 3] => Ok(Backend::Euclidean),
            GroupParams::Unimodular { c } if c.iter().all(|&x| x > 0.0) => {
                Ok(Backend::Quaternion { lambda: quaternion_lambdas(c) })
            }
            GroupParams::Unimodular { .. } => Err(Error::BackendUnsupported(grp.to_string())),
            GroupParams::Nonunimodular { .. } => Ok(Backend::Semidirect { a: grp.semidirect_matrix()? }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Euclidean => "euclidean",
            Backend::Semidirect { .. } => "semidirect",
            Backend::Quaternion { .. } => "quaternion",
        }
    }

    /// `sum_i c_i E_i(p)` in ambient coordinates.
    pub fn frame_vector(&self, p: &Point4, c: [f64; 3]) -> Point4 {
        match self {
            Backend::Euclidean => [c[0], c[1], c[2], 0.0],
            Backend::Semidirect { a } => {
                let v = mat2_apply(&expm2(a, p[2]), [c[0], c[1]]);
                [v[0], v[1], c[2], 0.0]
            }
            Backend::Quaternion { lambda } => {
                quat_mul(p, &[0.0, lambda[0] * c[0], lambda[1] * c[1], lambda[2] * c[2]])
            }
        }
    }

    /// Frame components of the ambient vector `v` at `p`.
    pub fn frame_components(&self, p: &Point4, v: &Point4) -> [f64; 3] {
        match self {
            Backend::Euclidean => [v[0], v[1], v[2]],
            Backend::Semidirect { a } => {
                let w = mat2_apply(&expm2(a, -p[2]), [v[0], v[1]]);
                [w[0], w[1], v[2]]
            }
            Backend::Quaternion { lambda } => {
                let w = quat_mul(&quat_conj(p), v);
                [w[1] / lambda[0], w[2] / lambda[1], w[3] / lambda[2]]
            }
        }
    }

    /// Derivative of `s -> frame_components(p(s), v(s))` given `p' = dp`
    /// and `v' = dv`.
    pub fn frame_components_derivative(&self, p: &Point4, dp: &Point4, v: &Point4, dv: &Point4) -> [f64; 3] {
        match self {
            Backend::Euclidean => [dv[0], dv[1], dv[2]],
            Backend::Semidirect { a } => {
                let e = expm2(a, -p[2]);
                let w = mat2_apply(&e, [v[0], v[1]]);
                let aw = mat2_apply(a, w);
                let dw = mat2_apply(&e, [dv[0], dv[1]]);
                [dw[0] - dp[2] * aw[0], dw[1] - dp[2] * aw[1], dv[2]]
            }
            Backend::Quaternion { lambda } => {
                let a = quat_mul(&quat_conj(dp), v);
                let b = quat_mul(&quat_conj(p), dv);
                [(a[1] + b[1]) / lambda[0], (a[2] + b[2]) / lambda[1], (a[3] + b[3]) / lambda[2]]
            }
        }
    }

    fn normalize(&self, p: &mut Point4) {
        if let Backend::Quaternion { .. } = self {
            let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            p.iter_mut().for_each(|x| *x /= n);
        }
    }

    /// Left translation by `a`.
    pub fn left_translate(&self, a: &Point4, p: &Point4) -> Point4 {
        match self {
            Backend::Euclidean => [a[0] + p[0], a[1] + p[1], a[2] + p[2], 0.0],
            Backend::Semidirect { a: m } => {
                let v = mat2_apply(&expm2(m, a[2]), [p[0], p[1]]);
                [a[0] + v[0], a[1] + v[1], a[2] + p[2], 0.0]
            }
            Backend::Quaternion { .. } => quat_mul(a, p),
        }
    }

    pub fn inverse(&self, p: &Point4) -> Point4 {
        match self {
            Backend::Euclidean => [-p[0], -p[1], -p[2], 0.0],
            Backend::Semidirect { a } => {
                let v = mat2_apply(&expm2(a, -p[2]), [p[0], p[1]]);
                [-v[0], -v[1], -p[2], 0.0]
            }
            Backend::Quaternion { .. } => quat_conj(p),
        }
    }

    pub fn identity(&self) -> Point4 {
        match self {
            Backend::Quaternion { .. } => [1.0, 0.0, 0.0, 0.0],
            _ => [0.0; 4],
        }
    }

    fn dim(&self) -> usize {
        match self {
            Backend::Quaternion { .. } => 4,
            _ => 3,
        }
    }
}

/// `lambda_i = sqrt(c_j c_k) / 2`, so that `[E_i, E_j] = c_k E_k` for
/// `E_i(psi) = psi (lambda_i e_i)` and cyclic `(i, j, k)`.
pub fn quaternion_lambdas(c: [f64; 3]) -> [f64; 3] {
    [(c[1] * c[2]).sqrt() / 2.0, (c[0] * c[2]).sqrt() / 2.0, (c[0] * c[1]).sqrt() / 2.0]
}

pub fn quat_mul(a: &Point4, b: &Point4) -> Point4 {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub fn quat_conj(a: &Point4) -> Point4 {
    [a[0], -a[1], -a[2], -a[3]]
}

/// Structured grid of ambient points with the unit normal stored as frame
/// components.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub grid: Grid,
    pub positions: Vec<Point4>,
    pub normals: Vec<[f64; 3]>,
    pub group: GroupSpec,
    pub backend: Backend,
    /// Node whose position was prescribed.
    pub base_node: (usize, usize),
    /// Largest node gap between row-first and column-first integration.
    pub integrability_gap: Option<f64>,
    pub warnings: Vec<String>,
}

impl SurfaceMesh {
    /// A mesh from analytic positions; normals are filled in by
    /// [`mesh_gauss_map`] style differencing.
    pub fn from_positions(grid: Grid, positions: Vec<Point4>, group: GroupSpec) -> Result<Self> {
        if positions.len() != grid.len() {
            return Err(Error::InvalidInput(format!("{} positions for {} nodes", positions.len(), grid.len())));
        }
        let backend = Backend::for_group(&group)?;
        let mut mesh = SurfaceMesh {
            grid,
            positions,
            normals: vec![[0.0; 3]; grid.len()],
            group,
            backend,
            base_node: (grid.nx / 2, grid.ny / 2),
            integrability_gap: None,
            warnings: Vec::new(),
        };
        mesh.normals = mesh_tangents(&mesh)?.into_iter().map(|t| t.normal).collect();
        Ok(mesh)
    }

    pub fn position(&self, i: usize, j: usize) -> &Point4 {
        &self.positions[self.grid.index(i, j)]
    }

    /// The mesh with the opposite orientation (`z -> conj(z)` reflects the
    /// grid rows), so every normal is reversed.
    pub fn flipped(&self) -> SurfaceMesh {
        let g = self.grid;
        let mut positions = Vec::with_capacity(g.len());
        let mut normals = Vec::with_capacity(g.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, g.ny - 1 - j);
                positions.push(self.positions[k]);
                let n = self.normals[k];
                normals.push([-n[0], -n[1], -n[2]]);
            }
        }
        SurfaceMesh {
            positions,
            normals,
            base_node: (self.base_node.0, g.ny - 1 - self.base_node.1),
            ..self.clone()
        }
    }

    /// Sup distance to another mesh in ambient coordinates.
    pub fn max_distance(&self, other: &SurfaceMesh) -> f64 {
        self.positions
            .iter()
            .zip(&other.positions)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructOptions {
    /// Reject fields whose [`relative_pde_residual`] exceeds this; `None`
    /// skips the check. The default only guards against fields that are
    /// far from any solution.
    pub residual_tol: Option<f64>,
    /// Gap between the two integration orders above which a warning is
    /// recorded; `None` skips the transpose pass.
    pub integrability_tol: Option<f64>,
    /// Node whose position is `base`; defaults to the grid centre.
    pub base_node: Option<(usize, usize)>,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions { residual_tol: Some(1e-1), integrability_tol: Some(1e-6), base_node: None }
    }
}

/// Residual of the Gauss map equation relative to the field's own scale:
/// `max |res| / max |g_z|^2` over the nodes. Exact solutions sampled on a
/// grid give `O(h^2)`; non-solutions give an `O(1)` value.
pub fn relative_pde_residual(field: &TwoChartComplexField, grp: &GroupSpec) -> Result<f64> {
    let grid = field.grid;
    let pairs: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let d = wirtinger(field, i, j)?;
            let r = crate::gaussfield::pde_residual_at(grp, field.h[idx], &field.g[idx], &d)?;
            Ok((r.norm(), d.g_z.norm_sqr()))
        })
        .collect::<Result<_>>()?;
    let num = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let den = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(if den > 0.0 { num / den } else { num })
}

/// Per-node `(2 Re A_i, -2 Im A_i)`, the coefficients of `psi_x` and `psi_y`.
fn integration_coefficients(field: &TwoChartComplexField, grp: &GroupSpec) -> Result<Vec<([f64; 3], [f64; 3])>> {
    let grid = field.grid;
    let scale = field.scale();
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let d = wirtinger(field, i, j)?;
            let p = &field.g[idx];
            if d.g_z.norm() <= 1e-10 * scale {
                return Err(Error::GaussMapDegenerate { i, j });
            }
            let ev = checked_potential(grp, field.h[idx], p)?;
            let a = eta_from_potential(p, d.g_z, ev.r).a;
            Ok((
                [2.0 * a[0].re, 2.0 * a[1].re, 2.0 * a[2].re],
                [-2.0 * a[0].im, -2.0 * a[1].im, -2.0 * a[2].im],
            ))
        })
        .collect()
}

/// Value halfway between samples `k` and `k + 1` of a line: cubic through
/// four neighbours inside, quadratic at the ends.
fn midpoint(v: &dyn Fn(usize) -> [f64; 3], k: usize, n: usize) -> [f64; 3] {
    let comb = |w: &[(usize, f64)]| {
        let mut out = [0.0; 3];
        for &(idx, c) in w {
            let x = v(idx);
            for d in 0..3 {
                out[d] += c * x[d];
            }
        }
        out
    };
    if n < 3 {
        comb(&[(k, 0.5), (k + 1, 0.5)])
    } else if k >= 1 && k + 2 < n {
        comb(&[(k - 1, -1.0 / 16.0), (k, 9.0 / 16.0), (k + 1, 9.0 / 16.0), (k + 2, -1.0 / 16.0)])
    } else if k == 0 {
        comb(&[(0, 3.0 / 8.0), (1, 6.0 / 8.0), (2, -1.0 / 8.0)])
    } else {
        comb(&[(k + 1, 3.0 / 8.0), (k, 6.0 / 8.0), (k - 1, -1.0 / 8.0)])
    }
}

fn axpy(p: &Point4, s: f64, v: &Point4) -> Point4 {
    [p[0] + s * v[0], p[1] + s * v[1], p[2] + s * v[2], p[3] + s * v[3]]
}

/// One classical Runge-Kutta step of `psi' = sum c_i(s) E_i(psi)`.
fn rk4_step(backend: &Backend, p: &Point4, h: f64, c0: [f64; 3], cm: [f64; 3], c1: [f64; 3]) -> Point4 {
    let k1 = backend.frame_vector(p, c0);
    let k2 = backend.frame_vector(&axpy(p, 0.5 * h, &k1), cm);
    let k3 = backend.frame_vector(&axpy(p, 0.5 * h, &k2), cm);
    let k4 = backend.frame_vector(&axpy(p, h, &k3), c1);
    let mut out = [0.0; 4];
    for d in 0..4 {
        out[d] = p[d] + h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
    }
    backend.normalize(&mut out);
    out
}

/// Integrates along one grid line from `start` in both directions.
fn integrate_line(
    backend: &Backend,
    coeff: &dyn Fn(usize) -> [f64; 3],
    n: usize,
    start: usize,
    base: Point4,
    h: f64,
) -> Vec<Point4> {
    let mut out = vec![[0.0; 4]; n];
    out[start] = base;
    for k in start..n - 1 {
        out[k + 1] = rk4_step(backend, &out[k], h, coeff(k), midpoint(coeff, k, n), coeff(k + 1));
    }
    for k in (1..=start).rev() {
        out[k - 1] = rk4_step(backend, &out[k], -h, coeff(k), midpoint(coeff, k - 1, n), coeff(k - 1));
    }
    out
}

/// Integrates along the base row, then every column from it. With
/// `transpose` the base column is integrated first.
fn integrate_grid(
    backend: &Backend,
    grid: &Grid,
    coeffs: &[([f64; 3], [f64; 3])],
    base_node: (usize, usize),
    base: Point4,
    transpose: bool,
) -> Vec<Point4> {
    let (nx, ny, h) = (grid.nx, grid.ny, grid.spacing);
    let (i0, j0) = base_node;
    let cx = |i: usize, j: usize| coeffs[grid.index(i, j)].0;
    let cy = |i: usize, j: usize| coeffs[grid.index(i, j)].1;
    let mut out = vec![[0.0; 4]; grid.len()];
    if !transpose {
        let row = integrate_line(backend, &|i| cx(i, j0), nx, i0, base, h);
        let cols: Vec<Vec<Point4>> = (0..nx)
            .into_par_iter()
            .map(|i| integrate_line(backend, &|j| cy(i, j), ny, j0, row[i], h))
            .collect();
        for (i, col) in cols.into_iter().enumerate() {
            for (j, p) in col.into_iter().enumerate() {
                out[grid.index(i, j)] = p;
            }
        }
    } else {
        let col = integrate_line(backend, &|j| cy(i0, j), ny, j0, base, h);
        let rows: Vec<Vec<Point4>> = (0..ny)
            .into_par_iter()
            .map(|j| integrate_line(backend, &|i| cx(i, j), nx, i0, col[j], h))
            .collect();
        for (j, row) in rows.into_iter().enumerate() {
            for (i, p) in row.into_iter().enumerate() {
                out[grid.index(i, j)] = p;
            }
        }
    }
    out
}

/// Integrates `psi_z = sum A_i E_i(psi)` with `psi(base node) = base`.
pub fn reconstruct(
    field: &TwoChartComplexField,
    grp: &GroupSpec,
    base: Point4,
    opts: &ReconstructOptions,
) -> Result<SurfaceMesh> {
    let backend = Backend::for_group(grp)?;
    let grid = field.grid;
    let normals: Vec<[f64; 3]> = field.g.iter().map(crate::gaussfield::stereo_inv).collect();
    let base_node = opts.base_node.unwrap_or((grid.nx / 2, grid.ny / 2));
    if base_node.0 >= grid.nx || base_node.1 >= grid.ny {
        return Err(Error::InvalidInput(format!("base node {base_node:?} outside the grid")));
    }
    let mut base = base;
    backend.normalize(&mut base);
    if grid.len() == 1 {
        return Ok(SurfaceMesh {
            grid,
            positions: vec![base],
            normals,
            group: *grp,
            backend,
            base_node,
            integrability_gap: None,
            warnings: Vec::new(),
        });
    }
    if let Some(tol) = opts.residual_tol {
        let residual = relative_pde_residual(field, grp)?;
        if residual > tol {
            return Err(Error::ResidualTooLarge { residual, tolerance: tol });
        }
    }
    let coeffs = integration_coefficients(field, grp)?;
    let positions = integrate_grid(&backend, &grid, &coeffs, base_node, base, false);
    let mut warnings = Vec::new();
    let mut integrability_gap = None;
    if let Some(tol) = opts.integrability_tol {
        let other = integrate_grid(&backend, &grid, &coeffs, base_node, base, true);
        let gap = positions
            .iter()
            .zip(&other)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if gap > tol {
            warnings.push(format!("integrability: row-first and column-first paths differ by {gap:.3e}"));
        }
        integrability_gap = Some(gap);
    }
    Ok(SurfaceMesh { grid, positions, normals, group: *grp, backend, base_node, integrability_gap, warnings })
}

/// Frame components of the two coordinate tangents and the unit normal at
/// one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeTangents {
    pub u: [f64; 3],
    pub v: [f64; 3],
    pub normal: [f64; 3],
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Ambient first and second derivatives of the positions at one node.
#[derive(Clone, Copy, Debug, PartialEq)]
struct AmbientDerivatives {
    pu: Point4,
    pv: Point4,
    puu: Point4,
    pvv: Point4,
    puv: Point4,
}

/// Tangents are fourth order. The Gauss map is differenced again
/// downstream, and a second-order tangent stencil that switches to a
/// one-sided form at the edge leaves an O(h^2) jump there, which turns
/// into an O(h) error in `g_z`.
/// Pure second derivatives use the direct second-difference stencils; the
/// mixed one differentiates each first derivative across the other
/// direction, which keeps all of them second order up to the edges.
/// Fourth-order first derivative along a line of `n >= 5` samples.
fn first_derivative4(f: impl Fn(usize) -> f64, n: usize, k: usize, h: f64) -> f64 {
    let s = 1.0 / (12.0 * h);
    match k {
        0 => (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)) * s,
        1 => (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)) * s,
        _ if k + 2 == n => -(-3.0 * f(n - 1) - 10.0 * f(n - 2) + 18.0 * f(n - 3) - 6.0 * f(n - 4) + f(n - 5)) * s,
        _ if k + 1 == n => -(-25.0 * f(n - 1) + 48.0 * f(n - 2) - 36.0 * f(n - 3) + 16.0 * f(n - 4) - 3.0 * f(n - 5)) * s,
        _ => (f(k - 2) - 8.0 * f(k - 1) + 8.0 * f(k + 1) - f(k + 2)) * s,
    }
}

fn ambient_derivatives(mesh: &SurfaceMesh) -> Result<Vec<AmbientDerivatives>> {
    let grid = mesh.grid;
    if grid.nx < 5 || grid.ny < 5 {
        return Err(Error::StencilUnavailable { i: 0, j: 0 });
    }
    let dim = mesh.backend.dim();
    let first: Vec<[Point4; 4]> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let mut out = [[0.0; 4]; 4];
            for d in 0..dim {
                let at = |a, b| mesh.positions[grid.index(a, b)][d];
                let p = fd_partials(at, grid.nx, grid.ny, i, j, grid.spacing);
                out[0][d] = first_derivative4(|k| at(k, j), grid.nx, i, grid.spacing);
                out[1][d] = first_derivative4(|k| at(i, k), grid.ny, j, grid.spacing);
                out[2][d] = p[2];
                out[3][d] = p[3];
            }
            out
        })
        .collect();
    Ok((0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let mut puv = [0.0; 4];
            for d in 0..dim {
                let a = fd_partials(|a, b| first[grid.index(a, b)][0][d], grid.nx, grid.ny, i, j, grid.spacing)[1];
                let b = fd_partials(|a, b| first[grid.index(a, b)][1][d], grid.nx, grid.ny, i, j, grid.spacing)[0];
                puv[d] = 0.5 * (a + b);
            }
            let [pu, pv, puu, pvv] = first[idx];
            AmbientDerivatives { pu, pv, puu, pvv, puv }
        })
        .collect())
}

/// Tangents by fourth-order differences of the positions, expressed in
/// the left-invariant frame; `normal = u x v / |u x v|`.
pub fn mesh_tangents(mesh: &SurfaceMesh) -> Result<Vec<NodeTangents>> {
    let derivs = ambient_derivatives(mesh)?;
    let grid = mesh.grid;
    derivs
        .par_iter()
        .enumerate()
        .map(|(idx, d)| {
            let p = &mesh.positions[idx];
            let u = mesh.backend.frame_components(p, &d.pu);
            let v = mesh.backend.frame_components(p, &d.pv);
            let n = cross(u, v);
            let nn = dot(n, n).sqrt();
            if !(nn > 1e-12 * dot(u, u).sqrt() * dot(v, v).sqrt()) {
                let (i, j) = grid.ij(idx);
                return Err(Error::DegenerateTangent { i, j });
            }
            Ok(NodeTangents { u, v, normal: [n[0] / nn, n[1] / nn, n[2] / nn] })
        })
        .collect()
}

/// First and second fundamental forms at one node, second derivatives
/// taken covariantly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FundamentalForms {
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub l: f64,
    pub m: f64,
    pub n: f64,
}

impl FundamentalForms {
    pub fn mean_curvature(&self) -> f64 {
        (self.l * self.g - 2.0 * self.m * self.f + self.n * self.e) / (2.0 * (self.e * self.g - self.f * self.f))
    }

    /// `<nabla_{psi_z} psi_z, N> = (L - N - 2iM)/4`, the Hopf differential.
    pub fn hopf(&self) -> Complex64 {
        Complex64::new(self.l - self.n, -2.0 * self.m) / 4.0
    }
}

fn gamma_contract(t: &Table3<f64>, a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            let w = a[i] * b[j];
            if w != 0.0 {
                for k in 0..3 {
                    out[k] += w * t[i][j][k];
                }
            }
        }
    }
    out
}

/// Fundamental forms with respect to the mesh's stored normals. The second
/// form uses `nabla_X Y = X(Y^k) E_k + X^i Y^j gamma_ij^k E_k` in frame
/// components.
pub fn fundamental_forms(mesh: &SurfaceMesh) -> Result<Vec<FundamentalForms>> {
    let derivs = ambient_derivatives(mesh)?;
    let gamma = connection_table(&mesh.group).gamma;
    let backend = &mesh.backend;
    Ok(derivs
        .par_iter()
        .enumerate()
        .map(|(idx, d)| {
            let p = &mesh.positions[idx];
            let u = backend.frame_components(p, &d.pu);
            let v = backend.frame_components(p, &d.pv);
            let nrm = mesh.normals[idx];
            let second = |x: &Point4, y: &Point4, dy: &Point4, cx: [f64; 3], cy: [f64; 3]| {
                let a = backend.frame_components_derivative(p, x, y, dy);
                let b = gamma_contract(&gamma, cx, cy);
                dot([a[0] + b[0], a[1] + b[1], a[2] + b[2]], nrm)
            };
            let l = second(&d.pu, &d.pu, &d.puu, u, u);
            let m1 = second(&d.pu, &d.pv, &d.puv, u, v);
            let m2 = second(&d.pv, &d.pu, &d.puv, v, u);
            let n = second(&d.pv, &d.pv, &d.pvv, v, v);
            FundamentalForms { e: dot(u, u), f: dot(u, v), g: dot(v, v), l, m: 0.5 * (m1 + m2), n }
        })
        .collect())
}

/// Mean curvature `(k1 + k2)/2` with respect to the stored normals.
pub fn mesh_mean_curvature(mesh: &SurfaceMesh) -> Result<Vec<f64>> {
    Ok(fundamental_forms(mesh)?.iter().map(FundamentalForms::mean_curvature).collect())
}

/// Gauss map and mean curvature of a mesh. Normals are recomputed from the
/// positions (`(psi_u, psi_v, N)` positively oriented).
pub fn mesh_gauss_map(mesh: &SurfaceMesh) -> Result<TwoChartComplexField> {
    let tangents = mesh_tangents(mesh)?;
    let mut m = mesh.clone();
    m.normals = tangents.iter().map(|t| t.normal).collect();
    let h = mesh_mean_curvature(&m)?;
    let g = m.normals.iter().map(|n| stereo(*n).map(ChartPoint::canonical)).collect::<Result<Vec<_>>>()?;
    TwoChartComplexField::new(mesh.grid, g, h)
}

/// Per-plaquette defect of the integrability condition
/// `nabla_{psi_zbar} psi_z = nabla_{psi_z} psi_zbar`, i.e.
/// `max_k |2i Im (A_k)_zbar + sum_ij conj(A_i) A_j C_ij^k|` at the plaquette
/// centres, with `A_k` from the field. Row-major over `(nx-1) x (ny-1)`.
pub fn compatibility_residual(field: &TwoChartComplexField, grp: &GroupSpec) -> Result<Vec<f64>> {
    let grid = field.grid;
    let scale = field.scale();
    let brackets = grp.brackets();
    let a: Vec<[Complex64; 3]> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let d = wirtinger(field, i, j)?;
            if d.g_z.norm() <= 1e-10 * scale {
                return Err(Error::GaussMapDegenerate { i, j });
            }
            let ev = checked_potential(grp, field.h[idx], &field.g[idx])?;
            Ok(eta_from_potential(&field.g[idx], d.g_z, ev.r).a)
        })
        .collect::<Result<_>>()?;
    let (nx, ny, h) = (grid.nx, grid.ny, grid.spacing);
    Ok((0..(nx - 1) * (ny - 1))
        .into_par_iter()
        .map(|cell| {
            let (i, j) = (cell % (nx - 1), cell / (nx - 1));
            let c = [a[grid.index(i, j)], a[grid.index(i + 1, j)], a[grid.index(i, j + 1)], a[grid.index(i + 1, j + 1)]];
            let mut worst: f64 = 0.0;
            let centre: [Complex64; 3] = std::array::from_fn(|k| 0.25 * (c[0][k] + c[1][k] + c[2][k] + c[3][k]));
            for k in 0..3 {
                let fx = (c[1][k] + c[3][k] - c[0][k] - c[2][k]) / (2.0 * h);
                let fy = (c[2][k] + c[3][k] - c[0][k] - c[1][k]) / (2.0 * h);
                let dbar = dzbar(fx, fy);
                let mut term = Complex64::new(0.0, 2.0 * dbar.im);
                for p in 0..3 {
                    for q in 0..3 {
                        term += centre[p].conj() * centre[q] * brackets[p][q][k];
                    }
                }
                worst = worst.max(term.norm());
            }
            worst
        })
        .collect())
}

/// `psi_z` in frame components from the mesh tangents, `(u - i v)/2`.
pub fn mesh_a_coefficients(tangents: &[NodeTangents]) -> Vec<[Complex64; 3]> {
    tangents
        .iter()
        .map(|t| std::array::from_fn(|k| dz(Complex64::new(t.u[k], 0.0), Complex64::new(t.v[k], 0.0))))
        .collect()
}

/// Coordinates written to OBJ files: the point itself, or for quaternions
/// the stereographic projection from `-1` to `R^3`.
pub fn display_coords(backend: &Backend, p: &Point4) -> [f64; 3] {
    match backend {
        Backend::Quaternion { .. } => {
            let d = 1.0 + p[0];
            [p[1] / d, p[2] / d, p[3] / d]
        }
        _ => [p[0], p[1], p[2]],
    }
}

fn display_normal(backend: &Backend, p: &Point4, nu: [f64; 3]) -> [f64; 3] {
    let v = backend.frame_vector(p, nu);
    let w = match backend {
        Backend::Quaternion { .. } => {
            let eps = 1e-6;
            let a = display_coords(backend, &axpy(p, eps, &v));
            let b = display_coords(backend, &axpy(p, -eps, &v));
            [(a[0] - b[0]) / (2.0 * eps), (a[1] - b[1]) / (2.0 * eps), (a[2] - b[2]) / (2.0 * eps)]
        }
        _ => [v[0], v[1], v[2]],
    };
    let n = dot(w, w).sqrt();
    [w[0] / n, w[1] / n, w[2] / n]
}

/// Writes vertices, per-vertex normals and two triangles per grid cell.
pub fn write_obj(mesh: &SurfaceMesh, mut out: impl Write) -> Result<()> {
    let grid = mesh.grid;
    writeln!(out, "# {} {}x{}", mesh.group.name(), grid.nx, grid.ny)?;
    for p in &mesh.positions {
        let c = display_coords(&mesh.backend, p);
        writeln!(out, "v {:.16e} {:.16e} {:.16e}", c[0], c[1], c[2])?;
    }
    for (p, nu) in mesh.positions.iter().zip(&mesh.normals) {
        let n = display_normal(&mesh.backend, p, *nu);
        writeln!(out, "vn {:.16e} {:.16e} {:.16e}", n[0], n[1], n[2])?;
    }
    for j in 0..grid.ny.saturating_sub(1) {
        for i in 0..grid.nx.saturating_sub(1) {
            let a = grid.index(i, j) + 1;
            let b = grid.index(i + 1, j) + 1;
            let c = grid.index(i + 1, j + 1) + 1;
            let d = grid.index(i, j + 1) + 1;
            writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}")?;
            writeln!(out, "f {a}//{a} {c}//{c} {d}//{d}")?;
        }
    }
    Ok(())
}

/// Metadata written next to an OBJ export.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshSidecar {
    pub group: GroupSpec,
    pub backend: Backend,
    pub base_node: [usize; 2],
    pub base_point: Point4,
    pub resolution: [usize; 2],
    pub spacing: f64,
    pub origin: [f64; 2],
    pub integrability_gap: Option<f64>,
    pub warnings: Vec<String>,
}

impl MeshSidecar {
    pub fn of(mesh: &SurfaceMesh) -> Self {
        MeshSidecar {
            group: mesh.group,
            backend: mesh.backend,
            base_node: [mesh.base_node.0, mesh.base_node.1],
            base_point: *mesh.position(mesh.base_node.0, mesh.base_node.1),
            resolution: [mesh.grid.nx, mesh.grid.ny],
            spacing: mesh.grid.spacing,
            origin: [mesh.grid.origin.re, mesh.grid.origin.im],
            integrability_gap: mesh.integrability_gap,
            warnings: mesh.warnings.clone(),
        }
    }
}

/// Extracts `(g, H)` from `mesh`, rebuilds it from the same base point and
/// returns the rebuilt mesh with the sup position error.
pub fn round_trip(mesh: &SurfaceMesh, opts: &ReconstructOptions) -> Result<(SurfaceMesh, f64)> {
    let field = mesh_gauss_map(mesh)?;
    let opts = ReconstructOptions { base_node: Some(mesh.base_node), ..*opts };
    let base = *mesh.position(mesh.base_node.0, mesh.base_node.1);
    let rebuilt = reconstruct(&field, &mesh.group, base, &opts)?;
    let err = rebuilt.max_distance(mesh);
    Ok((rebuilt, err))
}

/// Rebuilds `field` from `base` and from `a * base` and returns
/// `max |psi_2 - a * psi_1|`: two surfaces with the same Gauss map and
/// mean curvature differ by a left translation.
pub fn translation_defect(
    field: &TwoChartComplexField,
    grp: &GroupSpec,
    base: Point4,
    a: Point4,
    opts: &ReconstructOptions,
) -> Result<f64> {
    let backend = Backend::for_group(grp)?;
    let first = reconstruct(field, grp, base, opts)?;
    let second = reconstruct(field, grp, backend.left_translate(&a, &base), opts)?;
    let moved = SurfaceMesh {
        positions: first.positions.iter().map(|p| backend.left_translate(&a, p)).collect(),
        ..first
    };
    Ok(second.max_distance(&moved))
}

/// Connection table of the mesh's group, for callers combining frame data.
pub fn mesh_connection(mesh: &SurfaceMesh) -> ConnectionTable {
    connection_table(&mesh.group)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::gaussfield::Grid;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quaternion_lambdas_reproduce_constants() {
        let c = [2.0, 3.0, 0.5];
        let l = quaternion_lambdas(c);
        assert_abs_diff_eq!(2.0 * l[0] * l[1] / l[2], c[2], epsilon = 1e-15);
        assert_abs_diff_eq!(2.0 * l[1] * l[2] / l[0], c[0], epsilon = 1e-15);
        assert_abs_diff_eq!(2.0 * l[2] * l[0] / l[1], c[1], epsilon = 1e-15);
    }

    #[test]
    fn quaternion_frame_brackets() {
        // [X_u, X_v] = X_{uv - vu} for left-invariant X_u(psi) = psi u.
        let c = [2.0, 3.0, 0.5];
        let l = quaternion_lambdas(c);
        let e = |k: usize| {
            let mut q = [0.0; 4];
            q[k + 1] = l[k];
            q
        };
        for (i, j, k) in [(1, 2, 0), (2, 0, 1), (0, 1, 2)] {
            let a = quat_mul(&e(i), &e(j));
            let b = quat_mul(&e(j), &e(i));
            let comm: Point4 = std::array::from_fn(|d| a[d] - b[d]);
            let expected = e(k).map(|x| x * c[k]);
            for d in 0..4 {
                assert_abs_diff_eq!(comm[d], expected[d], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn unsupported_backends() {
        for c in [[1.0, 1.0, -1.0], [1.0, -1.0, 0.0], [1.0, 1.0, 0.0], [1.0, 0.0, 0.0]] {
            let g = GroupSpec::unimodular(c[0], c[1], c[2]).unwrap();
            assert!(matches!(Backend::for_group(&g), Err(Error::BackendUnsupported(_))));
        }
    }

    #[test]
    fn single_node_field_gives_base() {
        let grid = Grid::new(1, 1, 0.1, Complex64::new(0.0, 0.0));
        let field = TwoChartComplexField::new(grid, vec![ChartPoint::q(Complex64::new(0.0, 0.0))], vec![1.0]).unwrap();
        let base = [1.0, 2.0, 3.0, 0.0];
        let mesh = reconstruct(&field, &GroupSpec::euclidean(), base, &ReconstructOptions::default()).unwrap();
        assert_eq!(mesh.positions, vec![base]);
    }

    #[test]
    fn euclidean_round_sphere_lies_on_unit_sphere() {
        let field = fixtures::round_sphere_field(64, 1.0, 1.0);
        let mesh = reconstruct(&field, &GroupSpec::euclidean(), [0.0, 0.0, -1.0, 0.0], &ReconstructOptions::default())
            .unwrap();
        // g(0) = 0 sits at psi = -nu(0) = (0, 0, -1); the centre is the origin.
        let dev = mesh
            .positions
            .iter()
            .map(|p| ((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-3, "radial deviation {dev}");
    }

    #[test]
    fn leaf_mesh_has_zero_gauss_map_and_unit_curvature() {
        let mesh = fixtures::semidirect_leaf(GroupSpec::hyperbolic(), 32, 0.4);
        let field = mesh_gauss_map(&mesh).unwrap();
        for (p, h) in field.g.iter().zip(&field.h) {
            assert!(p.value.norm() < 1e-12);
            assert_abs_diff_eq!(*h, 1.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn flat_plane_has_zero_curvature() {
        let mesh = fixtures::semidirect_leaf(GroupSpec::euclidean(), 16, 0.0);
        for h in mesh_mean_curvature(&mesh).unwrap() {
            assert_abs_diff_eq!(h, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn flipping_orientation_is_antipodal() {
        let mesh = fixtures::euclidean_sphere(32, 1.0);
        let g1 = mesh_gauss_map(&mesh).unwrap();
        let g2 = mesh_gauss_map(&mesh.flipped()).unwrap();
        let grid = mesh.grid;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let a = stereo_inv_pt(g1.at(i, j));
                let b = stereo_inv_pt(g2.at(i, grid.ny - 1 - j));
                for k in 0..3 {
                    assert_abs_diff_eq!(a[k], -b[k], epsilon = 1e-12);
                }
            }
        }
    }

    fn stereo_inv_pt(p: &ChartPoint) -> [f64; 3] {
        crate::gaussfield::stereo_inv(p)
    }

    #[test]
    fn obj_export_counts() {
        let mesh = fixtures::euclidean_sphere(4, 1.0);
        let mut buf = Vec::new();
        write_obj(&mesh, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().filter(|l| l.starts_with("v ")).count(), 25);
        assert_eq!(s.lines().filter(|l| l.starts_with("vn ")).count(), 25);
        assert_eq!(s.lines().filter(|l| l.starts_with("f ")).count(), 32);
    }
}
