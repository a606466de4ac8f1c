//! Quadratic differentials on grid surfaces: the Hopf differential, the
//! differential `Q = L(g) g_z^2 + M(g) g_z conj(g_zbar)` built from a model
//! sphere, the first-order equation `Q_zbar = alpha Q + beta conj(Q)` it
//! satisfies on surfaces of the same prescribed mean curvature, zero
//! counting by the argument principle, and the holomorphicity defect of
//! the contact map `G^{-1} o g`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use num_rational::Rational32;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussfield::{dz, dzbar, eta_from_potential, checked_potential, fd_partials, stereo_inv, wirtinger, Grid, TwoChartComplexField};
use crate::liegroup::{connection_table, GroupSpec};
use crate::modelsphere::ModelSphere;
use crate::potential::{Chart, ChartPoint};
use crate::weierstrass::{mesh_a_coefficients, mesh_gauss_map, mesh_tangents, SurfaceMesh};

/// Coefficient of `dz^2` at each node of a grid in the parameter chart
/// `param_chart` (`Q`: `z`, `W`: `1/z`).
#[derive(Clone, Debug, PartialEq)]
pub struct QDiffField {
    pub grid: Grid,
    pub q: Vec<Complex64>,
    pub param_chart: Chart,
}

impl QDiffField {
    pub fn from_fn(grid: Grid, param_chart: Chart, f: impl Fn(Complex64) -> Complex64 + Sync) -> Self {
        let q = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j) = grid.ij(idx);
                f(grid.z(i, j))
            })
            .collect();
        QDiffField { grid, q, param_chart }
    }

    pub fn max_abs(&self) -> f64 {
        self.q.iter().map(|q| q.norm()).fold(0.0, f64::max)
    }

    /// CSV with columns `i,j,re_q,im_q,abs_q,arg_q`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "re_q", "im_q", "abs_q", "arg_q"])?;
        for (idx, q) in self.q.iter().enumerate() {
            let (i, j) = self.grid.ij(idx);
            let vals = [q.re, q.im, q.norm(), q.arg()];
            let mut rec = vec![i.to_string(), j.to_string()];
            rec.extend(vals.iter().map(|v| format!("{v:.16e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The coefficient at parameter value `z` re-expressed in the other
/// parameter chart `zeta = 1/z`: `Q (dz/dzeta)^2 = Q z^4`.
pub fn switch_param_chart(q: Complex64, z: Complex64) -> Complex64 {
    q * z.powi(4)
}

/// `P = -<nabla_{psi_z} N, psi_z>` computed directly from the mesh as
/// `-sum_k A_k ((nu_k)_z + sum_ij gamma_ij^k A_i nu_j)`, with `A` the frame
/// components of `psi_z` and `nu` those of the normal. Needs no potential.
pub fn hopf_differential_direct(mesh: &SurfaceMesh) -> Result<QDiffField> {
    let tangents = mesh_tangents(mesh)?;
    let a = mesh_a_coefficients(&tangents);
    let nu: Vec<[f64; 3]> = tangents.iter().map(|t| t.normal).collect();
    let gamma = connection_table(&mesh.group).gamma;
    let grid = mesh.grid;
    let q = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let mut p = Complex64::new(0.0, 0.0);
            for k in 0..3 {
                let d = fd_partials(|x, y| nu[grid.index(x, y)][k], grid.nx, grid.ny, i, j, grid.spacing);
                let mut term = dz(Complex64::new(d[0], 0.0), Complex64::new(d[1], 0.0));
                for ii in 0..3 {
                    for jj in 0..3 {
                        term += gamma[ii][jj][k] * a[idx][ii] * nu[idx][jj];
                    }
                }
                p -= a[idx][k] * term;
            }
            p
        })
        .collect();
    Ok(QDiffField { grid, q, param_chart: Chart::Q })
}

/// `P = 2 g_z conj(g_zbar) / R(H, g) - sum gamma_ij^k A_i nu_j A_k` from a
/// Gauss map field; `A_i` come from `(g, g_z, H)`.
pub fn hopf_differential_field(field: &TwoChartComplexField, grp: &GroupSpec) -> Result<QDiffField> {
    let gamma = connection_table(grp).gamma;
    let grid = field.grid;
    let q = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let d = wirtinger(field, i, j)?;
            let g = &field.g[idx];
            let ev = checked_potential(grp, field.h[idx], g)?;
            let a = eta_from_potential(g, d.g_z, ev.r).a;
            let nu = stereo_inv(g);
            let mut p = 2.0 * d.g_z * d.g_zbar.conj() / ev.r;
            for ii in 0..3 {
                for jj in 0..3 {
                    for k in 0..3 {
                        p -= gamma[ii][jj][k] * a[ii] * nu[jj] * a[k];
                    }
                }
            }
            Ok(p)
        })
        .collect::<Result<_>>()?;
    Ok(QDiffField { grid, q, param_chart: Chart::Q })
}

/// Hopf differential of a mesh through its extracted `(g, H)`.
pub fn hopf_differential(mesh: &SurfaceMesh) -> Result<QDiffField> {
    hopf_differential_field(&mesh_gauss_map(mesh)?, &mesh.group)
}

/// `L(g) g_z^2 + M(g) g_z conj(g_zbar)` at one point, all in the chart of `g`.
pub fn q_differential_at(model: &ModelSphere, g: &ChartPoint, g_z: Complex64, g_zbar: Complex64) -> Result<Complex64> {
    let (l, red) = model.lm(g)?;
    Ok(l * g_z * g_z + red.m * g_z * g_zbar.conj())
}

pub fn q_differential(field: &TwoChartComplexField, model: &ModelSphere) -> Result<QDiffField> {
    let grid = field.grid;
    let q = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let d = wirtinger(field, i, j)?;
            q_differential_at(model, &field.g[idx], d.g_z, d.g_zbar)
        })
        .collect::<Result<_>>()?;
    Ok(QDiffField { grid, q, param_chart: Chart::Q })
}

/// Nodes this close to the grid edge see a one-sided stencil applied to
/// values that were themselves differentiated one-sidedly, which costs an
/// order of accuracy there.
pub const DBAR_MARGIN: usize = 2;

/// Per-node `|Q_zbar - alpha Q - beta conj(Q)|` and the scale
/// `max (|Q_zbar| + |alpha Q| + |beta conj(Q)|)` it is measured against.
#[derive(Clone, Debug)]
pub struct DbarResidual {
    pub grid: Grid,
    pub residual: Vec<f64>,
    pub scale: f64,
}

impl DbarResidual {
    /// Maximum over all nodes, edges included.
    pub fn max(&self) -> f64 {
        self.residual.iter().cloned().fold(0.0, f64::max)
    }

    /// Maximum over nodes at least [`DBAR_MARGIN`] away from the edge.
    pub fn interior_max(&self) -> f64 {
        let g = self.grid;
        let m = DBAR_MARGIN;
        (0..g.len())
            .filter(|&idx| {
                let (i, j) = g.ij(idx);
                i >= m && j >= m && i + m < g.nx && j + m < g.ny
            })
            .map(|idx| self.residual[idx])
            .fold(0.0, f64::max)
    }

    /// `interior_max / scale`.
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.interior_max() / self.scale
        } else {
            0.0
        }
    }
}

/// Checks `Q_zbar = alpha Q + beta conj(Q)` with
/// `alpha = conj(h_q)(g) conj(M(g)) (1 + |g|^2)^2 conj(g_z)` and
/// `beta = ((L_q + 2 A L) / conj(M))(g) g_z^2 / conj(g_z)`, `Q_zbar` by
/// finite differences.
pub fn dbar_identity_residual(q: &QDiffField, field: &TwoChartComplexField, model: &ModelSphere) -> Result<DbarResidual> {
    let grid = field.grid;
    if q.grid != grid {
        return Err(Error::InvalidInput("Q and field are sampled on different grids".into()));
    }
    let rows: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let d = wirtinger(field, i, j)?;
            if d.g_z.norm() == 0.0 {
                return Err(Error::GaussMapDegenerate { i, j });
            }
            let g = &field.g[idx];
            let jet = model.lm_jet(g)?;
            let m = jet.m();
            if m.norm() < 1e-300 {
                return Err(Error::InvalidInput(format!("|M| underflows at node ({i}, {j})")));
            }
            let d2 = (1.0 + g.value.norm_sqr()).powi(2);
            let alpha = jet.red.h_q.conj() * m.conj() * d2 * d.g_z.conj();
            let beta = (jet.l_q + 2.0 * jet.red.a * jet.l) / m.conj() * d.g_z * d.g_z / d.g_z.conj();
            let p = fd_partials(|a, b| q.q[grid.index(a, b)], grid.nx, grid.ny, i, j, grid.spacing);
            let q_zbar = dzbar(p[0], p[1]);
            let qv = q.q[idx];
            let (aq, bq) = (alpha * qv, beta * qv.conj());
            Ok(((q_zbar - aq - bq).norm(), q_zbar.norm() + aq.norm() + bq.norm()))
        })
        .collect::<Result<_>>()?;
    Ok(DbarResidual {
        grid,
        residual: rows.iter().map(|r| r.0).collect(),
        scale: rows.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Disk,
    Sphere,
    Torus,
}

impl Topology {
    pub fn genus(self) -> Option<i32> {
        match self {
            Topology::Disk => None,
            Topology::Sphere => Some(0),
            Topology::Torus => Some(1),
        }
    }

    pub fn parse(s: &str) -> Option<Topology> {
        match s {
            "disk" => Some(Topology::Disk),
            "sphere" => Some(Topology::Sphere),
            "torus" => Some(Topology::Torus),
            _ => None,
        }
    }
}

/// An isolated zero (or pole, with negative winding) of `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroRecord {
    pub patch: usize,
    /// Lower-left node of the plaquette, or the node itself for a zero
    /// sitting on a node.
    pub cell: (usize, usize),
    pub on_node: bool,
    pub center: Complex64,
    /// Zero of the bilinear interpolant inside the plaquette.
    pub location: Complex64,
    pub winding: i32,
    pub line_field_index: Rational32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub topology: Topology,
    pub zeros: Vec<ZeroRecord>,
    pub winding_sum: i32,
    /// `4 genus - 4` for closed surfaces.
    pub expected: Option<i32>,
    pub matches: Option<bool>,
}

/// Edge length of the coarsest blocks: three halvings down to plaquettes.
const COARSE_BLOCK: usize = 8;

/// Relative size below which a node value counts as a zero of `Q`.
const NODE_ZERO_REL: f64 = 1e-12;

struct Scanner<'a> {
    f: &'a QDiffField,
    periodic: bool,
    eps: f64,
}

impl Scanner<'_> {
    fn node(&self, i: usize, j: usize) -> (usize, usize) {
        if self.periodic {
            (i % self.f.grid.nx, j % self.f.grid.ny)
        } else {
            (i, j)
        }
    }

    fn value(&self, i: usize, j: usize) -> Complex64 {
        let (a, b) = self.node(i, j);
        self.f.q[self.f.grid.index(a, b)]
    }

    fn is_zero(&self, i: usize, j: usize) -> bool {
        self.value(i, j).norm() <= self.eps
    }

    /// Boundary of the node rectangle `[i0, i1] x [j0, j1]`, counterclockwise.
    fn ring(&self, i0: usize, j0: usize, i1: usize, j1: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(2 * (i1 - i0 + j1 - j0));
        out.extend((i0..i1).map(|i| (i, j0)));
        out.extend((j0..j1).map(|j| (i1, j)));
        out.extend((i0 + 1..=i1).rev().map(|i| (i, j1)));
        out.extend((j0 + 1..=j1).rev().map(|j| (i0, j)));
        out
    }

    /// Winding of `Q` around the ring, or `None` if a node on it vanishes.
    fn winding(&self, ring: &[(usize, usize)]) -> Result<Option<i32>> {
        if ring.iter().any(|&(i, j)| self.is_zero(i, j)) {
            return Ok(None);
        }
        let vals: Vec<Complex64> = ring.iter().map(|&(i, j)| self.value(i, j)).collect();
        let mut total = 0.0;
        for k in 0..vals.len() {
            total += (vals[(k + 1) % vals.len()] / vals[k]).arg();
        }
        let turns = total / (2.0 * PI);
        let k = turns.round();
        let defect = (turns - k).abs();
        if defect >= 0.2 {
            return Err(Error::WindingDefect { defect });
        }
        Ok(Some(k as i32))
    }

    fn refine(&self, i: usize, j: usize) -> (f64, f64) {
        let (q00, q10, q01, q11) = (self.value(i, j), self.value(i + 1, j), self.value(i, j + 1), self.value(i + 1, j + 1));
        let (mut s, mut t) = (0.5, 0.5);
        for _ in 0..30 {
            let f = (1.0 - s) * (1.0 - t) * q00 + s * (1.0 - t) * q10 + (1.0 - s) * t * q01 + s * t * q11;
            let fs = (1.0 - t) * (q10 - q00) + t * (q11 - q01);
            let ft = (1.0 - s) * (q01 - q00) + s * (q11 - q10);
            let det = fs.re * ft.im - fs.im * ft.re;
            if det.abs() < 1e-300 {
                break;
            }
            let ds = (f.re * ft.im - f.im * ft.re) / det;
            let dt = (fs.re * f.im - fs.im * f.re) / det;
            s = (s - ds).clamp(0.0, 1.0);
            t = (t - dt).clamp(0.0, 1.0);
            if ds.abs() + dt.abs() < 1e-14 {
                break;
            }
        }
        (s, t)
    }

    fn record(&self, patch: usize, i: usize, j: usize, winding: i32, on_node: bool) -> ZeroRecord {
        let g = &self.f.grid;
        let h = g.spacing;
        let (center, location) = if on_node {
            let z = g.origin + h * Complex64::new(i as f64, j as f64);
            (z, z)
        } else {
            let (s, t) = self.refine(i, j);
            let z0 = g.origin + h * Complex64::new(i as f64, j as f64);
            (z0 + h * Complex64::new(0.5, 0.5), z0 + h * Complex64::new(s, t))
        };
        ZeroRecord { patch, cell: (i, j), on_node, center, location, winding, line_field_index: Rational32::new(-winding, 2) }
    }

    /// Cell rectangle `[i0, i0 + w) x [j0, j0 + h)` of plaquettes. When the
    /// windings of the sub-blocks do not add up to that of the block (a
    /// multiple zero aliased on the fine loops) the block is reported as a
    /// single zero.
    fn scan_block(&self, patch: usize, i0: usize, j0: usize, w: usize, h: usize) -> Result<Vec<ZeroRecord>> {
        let ring = self.ring(i0, j0, i0 + w, j0 + h);
        let winding = self.winding(&ring)?;
        if w == 1 && h == 1 {
            return Ok(match winding {
                Some(k) if k != 0 => vec![self.record(patch, i0, j0, k, false)],
                _ => Vec::new(),
            });
        }
        if winding == Some(0) {
            return Ok(Vec::new());
        }
        let (wa, ha) = (w.div_ceil(2), h.div_ceil(2));
        let mut out = Vec::new();
        for (di, dw) in [(0, wa), (wa, w - wa)] {
            for (dj, dh) in [(0, ha), (ha, h - ha)] {
                if dw > 0 && dh > 0 {
                    out.extend(self.scan_block(patch, i0 + di, j0 + dj, dw, dh)?);
                }
            }
        }
        if let Some(k) = winding {
            let sum: i32 = out.iter().filter(|r| !r.on_node).map(|r| r.winding).sum();
            if sum != k && !ring_has_zero_inside(self, i0, j0, w, h) {
                let hs = self.f.grid.spacing;
                let z0 = self.f.grid.origin + hs * Complex64::new(i0 as f64, j0 as f64);
                let center = z0 + hs * Complex64::new(w as f64 / 2.0, h as f64 / 2.0);
                let location = if out.is_empty() {
                    center
                } else {
                    out.iter().map(|r| r.location).sum::<Complex64>() / out.len() as f64
                };
                return Ok(vec![ZeroRecord {
                    patch,
                    cell: (i0, j0),
                    on_node: false,
                    center,
                    location,
                    winding: k,
                    line_field_index: Rational32::new(-k, 2),
                }]);
            }
        }
        Ok(out)
    }
}

/// Whether a node strictly inside the block vanishes; such zeros are
/// counted separately through their neighbour rings.
fn ring_has_zero_inside(sc: &Scanner, i0: usize, j0: usize, w: usize, h: usize) -> bool {
    (i0 + 1..i0 + w).any(|i| (j0 + 1..j0 + h).any(|j| sc.is_zero(i, j)))
}

fn scan_patch(f: &QDiffField, patch: usize, periodic: bool) -> Result<Vec<ZeroRecord>> {
    let grid = f.grid;
    if grid.nx < 2 || grid.ny < 2 {
        return Err(Error::InvalidInput("Q needs at least 2x2 nodes".into()));
    }
    let eps = NODE_ZERO_REL * f.max_abs();
    let sc = Scanner { f, periodic, eps };
    let (cx, cy) = if periodic { (grid.nx, grid.ny) } else { (grid.nx - 1, grid.ny - 1) };
    if !periodic {
        let border = sc.ring(0, 0, cx, cy);
        if let Some(&(i, j)) = border.iter().find(|&&(i, j)| sc.is_zero(i, j)) {
            return Err(Error::BoundaryZero { i, j });
        }
    }
    let blocks: Vec<(usize, usize)> =
        (0..cy).step_by(COARSE_BLOCK).flat_map(|j| (0..cx).step_by(COARSE_BLOCK).map(move |i| (i, j))).collect();
    let mut found: Vec<Vec<ZeroRecord>> = blocks
        .par_iter()
        .map(|&(i, j)| {
            sc.scan_block(patch, i, j, COARSE_BLOCK.min(cx - i), COARSE_BLOCK.min(cy - j))
        })
        .collect::<Result<_>>()?;
    // Zeros sitting on nodes: winding around the ring of the eight neighbours.
    let mut on_nodes = Vec::new();
    for idx in 0..grid.len() {
        let (i, j) = grid.ij(idx);
        if !sc.is_zero(i, j) {
            continue;
        }
        let inner = periodic || (i > 0 && j > 0 && i + 1 < grid.nx && j + 1 < grid.ny);
        if !inner {
            return Err(Error::BoundaryZero { i, j });
        }
        let (bi, bj) = if periodic { (i + grid.nx - 1, j + grid.ny - 1) } else { (i - 1, j - 1) };
        match sc.winding(&sc.ring(bi, bj, bi + 2, bj + 2))? {
            Some(k) => on_nodes.push(sc.record(patch, i, j, k, true)),
            None => return Err(Error::BoundaryZero { i, j }),
        }
    }
    let mut out = merge_adjacent(found.drain(..).flatten().chain(on_nodes).collect(), grid, periodic);
    out.sort_by_key(|r| (r.cell.1, r.cell.0, r.on_node));
    Ok(out)
}

/// Records whose cells touch (including diagonally) are one zero seen on
/// neighbouring plaquettes; they are merged and their windings added.
fn merge_adjacent(records: Vec<ZeroRecord>, grid: Grid, periodic: bool) -> Vec<ZeroRecord> {
    let near = |a: usize, b: usize, n: usize| {
        let d = a.abs_diff(b);
        d <= 1 || (periodic && d + 1 >= n)
    };
    let mut clusters: Vec<Vec<ZeroRecord>> = Vec::new();
    for r in records {
        let hits: Vec<usize> = (0..clusters.len())
            .filter(|&c| clusters[c].iter().any(|o| near(o.cell.0, r.cell.0, grid.nx) && near(o.cell.1, r.cell.1, grid.ny)))
            .collect();
        let mut merged = vec![r];
        for &c in hits.iter().rev() {
            merged.extend(clusters.swap_remove(c));
        }
        clusters.push(merged);
    }
    clusters
        .into_iter()
        .filter_map(|mut c| {
            if c.len() == 1 {
                return c.pop();
            }
            let winding: i32 = c.iter().map(|r| r.winding).sum();
            if winding == 0 {
                return None;
            }
            let n = c.len() as f64;
            let first = c.iter().min_by_key(|r| (r.cell.1, r.cell.0)).expect("non-empty cluster");
            Some(ZeroRecord {
                patch: first.patch,
                cell: first.cell,
                on_node: c.iter().any(|r| r.on_node),
                center: c.iter().map(|r| r.center).sum::<Complex64>() / n,
                location: c.iter().map(|r| r.location).sum::<Complex64>() / n,
                winding,
                line_field_index: Rational32::new(-winding, 2),
            })
        })
        .collect()
}

/// Zeros of `Q` with their windings, and for closed surfaces the winding
/// sum against `4 genus - 4`.
///
/// Disk and torus take one patch; the torus grid is periodic (node `nx` is
/// node `0`). The sphere takes two patches in parameter charts `Q` and `W`;
/// zeros are kept from the first where `|z| < 1` and from the second where
/// `|1/z| <= 1`. Poles count with negative winding.
pub fn zeros_and_indices(patches: &[QDiffField], topology: Topology) -> Result<IndexReport> {
    let zeros = match topology {
        Topology::Disk | Topology::Torus => {
            if patches.len() != 1 {
                return Err(Error::InvalidInput(format!("{topology:?} takes one patch, got {}", patches.len())));
            }
            scan_patch(&patches[0], 0, topology == Topology::Torus)?
        }
        Topology::Sphere => {
            if patches.len() != 2 || patches[0].param_chart == patches[1].param_chart {
                return Err(Error::InvalidInput("sphere takes two patches in opposite parameter charts".into()));
            }
            let mut out = Vec::new();
            for (k, p) in patches.iter().enumerate() {
                let keep = |z: Complex64| if p.param_chart == Chart::Q { z.norm() < 1.0 } else { z.norm() <= 1.0 };
                out.extend(scan_patch(p, k, false)?.into_iter().filter(|r| keep(r.location)));
            }
            out
        }
    };
    let winding_sum = zeros.iter().map(|z| z.winding).sum();
    let expected = topology.genus().map(|g| 4 * g - 4);
    Ok(IndexReport { topology, zeros, winding_sum, expected, matches: expected.map(|e| e == winding_sum) })
}

/// `phi = G^{-1} o g` per node with `|phi_zbar|` by finite differences and
/// the magnitude of
/// `(conj(G_z) g_zbar - G_zbar conj(g_z)) / (|G_z|^2 - |G_zbar|^2)` at `phi`.
#[derive(Clone, Debug)]
pub struct ContactResidual {
    pub phi: Vec<ChartPoint>,
    pub dbar: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl ContactResidual {
    pub fn max(&self) -> f64 {
        self.dbar.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_predicted(&self) -> f64 {
        self.predicted.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn contact_residual(field: &TwoChartComplexField, model: &ModelSphere) -> Result<ContactResidual> {
    let grid = field.grid;
    let phi: Vec<ChartPoint> = field
        .g
        .par_iter()
        .map(|g| {
            model.inverse(g).map(ChartPoint::canonical).map_err(|_| Error::ModelDomainMiss { value: g.value, chart: g.chart })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let c = phi[idx].chart;
            let p = fd_partials(|a, b| phi[grid.index(a, b)].value_in(c), grid.nx, grid.ny, i, j, grid.spacing);
            let d = wirtinger(field, i, j)?;
            let jet = model.gauss_map(&phi[idx]).in_chart(field.g[idx].chart);
            let rhs = (jet.g_z.conj() * d.g_zbar - jet.g_zbar * d.g_z.conj()) / jet.jacobian();
            Ok((dzbar(p[0], p[1]).norm(), rhs.norm()))
        })
        .collect::<Result<_>>()?;
    Ok(ContactResidual { phi, dbar: rows.iter().map(|r| r.0).collect(), predicted: rows.iter().map(|r| r.1).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::modelsphere::round_model;
    use crate::gaussfield::PrescribedH;

    fn disk(n: usize) -> Grid {
        Grid::square(n, 1.0)
    }

    #[test]
    fn powers_of_z() {
        for k in 1..=3 {
            let f = QDiffField::from_fn(disk(40), Chart::Q, |z| (z - Complex64::new(0.013, -0.021)).powi(k));
            let r = zeros_and_indices(&[f], Topology::Disk).unwrap();
            assert_eq!(r.zeros.len(), 1);
            assert_eq!(r.zeros[0].winding, k);
            assert_eq!(r.zeros[0].line_field_index, Rational32::new(-k, 2));
            assert_eq!(r.expected, None);
        }
    }

    #[test]
    fn zero_on_a_node() {
        let f = QDiffField::from_fn(disk(41), Chart::Q, |z| z * z);
        let r = zeros_and_indices(&[f], Topology::Disk).unwrap();
        assert_eq!(r.zeros.len(), 1);
        assert!(r.zeros[0].on_node);
        assert_eq!(r.zeros[0].winding, 2);
    }

    #[test]
    fn conjugate_has_positive_index() {
        let f = QDiffField::from_fn(disk(40), Chart::Q, |z| z.conj());
        let r = zeros_and_indices(&[f], Topology::Disk).unwrap();
        assert_eq!(r.zeros.len(), 1);
        assert_eq!(r.zeros[0].winding, -1);
        assert_eq!(r.zeros[0].line_field_index, Rational32::new(1, 2));
    }

    #[test]
    fn boundary_zero_is_reported() {
        let f = QDiffField::from_fn(disk(41), Chart::Q, |z| z - Complex64::new(1.0, 0.0));
        assert!(matches!(zeros_and_indices(&[f], Topology::Disk), Err(Error::BoundaryZero { .. })));
    }

    #[test]
    fn torus_windings_cancel() {
        let n = 96;
        let grid = Grid::new(n, n, 2.0 * PI / n as f64, Complex64::new(0.0, 0.0));
        let f = QDiffField::from_fn(grid, Chart::Q, |z| Complex64::new(z.re.cos() - 0.7f64.cos(), z.im.sin()));
        let r = zeros_and_indices(&[f], Topology::Torus).unwrap();
        assert_eq!(r.zeros.len(), 4);
        assert_eq!(r.winding_sum, 0);
        assert_eq!(r.matches, Some(true));
    }

    #[test]
    fn constant_differential_on_the_sphere() {
        // dz^2 has a pole of order four at infinity.
        let grid = Grid::square(64, 1.3);
        let north = QDiffField::from_fn(grid, Chart::Q, |_| Complex64::new(1.0, 0.0));
        let south = QDiffField::from_fn(grid, Chart::W, |z| switch_param_chart(Complex64::new(1.0, 0.0), z.inv()));
        let r = zeros_and_indices(&[north, south], Topology::Sphere).unwrap();
        assert_eq!(r.winding_sum, -4);
        assert_eq!(r.matches, Some(true));
    }

    #[test]
    fn cylinder_hopf() {
        let mesh = fixtures::cylinder(64);
        for p in [hopf_differential(&mesh).unwrap(), hopf_differential_direct(&mesh).unwrap()] {
            let err = p.q.iter().map(|q| (q - Complex64::new(-0.25, 0.0)).norm()).fold(0.0, f64::max);
            assert!(err < 1e-3, "{err}");
        }
    }

    #[test]
    fn round_sphere_hopf_vanishes() {
        let p = hopf_differential(&fixtures::euclidean_sphere(64, 1.0)).unwrap();
        assert!(p.max_abs() < 1e-3, "{}", p.max_abs());
    }

    #[test]
    fn hyperbolic_leaf_is_umbilic() {
        let mesh = fixtures::semidirect_leaf(GroupSpec::hyperbolic(), 16, 0.3);
        let p = hopf_differential_direct(&mesh).unwrap();
        assert!(p.max_abs() < 1e-12, "{}", p.max_abs());
        // R(1, 0) = 0: the potential route is unavailable.
        assert!(matches!(hopf_differential(&mesh), Err(Error::PotentialZero { .. })));
    }

    #[test]
    fn cmc_q_is_half_hopf() {
        let field = fixtures::round_sphere_field(32, 1.0, 1.0).with_prescribed(PrescribedH::constant(1.0));
        let twisted = TwoChartComplexField::from_fn(field.grid, |z| (ChartPoint::from_q(z + 0.2 * z * z.conj()), 1.0));
        let model = round_model(1.0, &GroupSpec::euclidean()).unwrap();
        let q = q_differential(&twisted, &model).unwrap();
        let p = hopf_differential_field(&twisted, &GroupSpec::euclidean()).unwrap();
        for (a, b) in q.q.iter().zip(&p.q) {
            assert!((a - b / 2.0).norm() < 1e-10 * (1.0 + b.norm()));
        }
    }
}
