//! Three-dimensional metric Lie groups: the unimodular family with
//! structure constants `(c1, c2, c3)` and the non-unimodular semidirect
//! products `R^2 x_A R` with `A = A(a, b)` of trace 2.

use std::fmt;
use std::ops::Neg;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw group parameters as they appear in JSON input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroupParams {
    Unimodular { c: [f64; 3] },
    Nonunimodular { a: f64, b: f64 },
}

/// A validated metric Lie group model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GroupParams", into = "GroupParams")]
pub struct GroupSpec {
    params: GroupParams,
}

impl TryFrom<GroupParams> for GroupSpec {
    type Error = Error;

    fn try_from(params: GroupParams) -> Result<Self> {
        make_group(params)
    }
}

impl From<GroupSpec> for GroupParams {
    fn from(g: GroupSpec) -> Self {
        g.params
    }
}

/// Validates raw parameters.
///
/// Unimodular constants may have at most one negative entry; the
/// non-unimodular parameters must both be non-negative.
pub fn make_group(params: GroupParams) -> Result<GroupSpec> {
    match params {
        GroupParams::Unimodular { c } => {
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidGroup(format!("non-finite structure constant in {c:?}")));
            }
            if c.iter().filter(|&&x| x < 0.0).count() >= 2 {
                return Err(Error::InvalidGroup(format!(
                    "at most one structure constant may be negative, got {c:?}"
                )));
            }
        }
        GroupParams::Nonunimodular { a, b } => {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidGroup(format!("non-finite parameters a={a}, b={b}")));
            }
            if a < 0.0 || b < 0.0 {
                return Err(Error::InvalidGroup(format!("need a >= 0 and b >= 0, got a={a}, b={b}")));
            }
        }
    }
    Ok(GroupSpec { params })
}

pub fn mu_values(c1: f64, c2: f64, c3: f64) -> [f64; 3] {
    [0.5 * (-c1 + c2 + c3), 0.5 * (c1 - c2 + c3), 0.5 * (c1 + c2 - c3)]
}

/// Whether [`GroupSpec::compactness`] found the SU(2) sign pattern.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CriticalThreshold {
    /// `R(H, q)` never vanishes.
    Compact,
    /// `R(H, .)` has no zeros for `|H|` above this value.
    Threshold(f64),
}

impl GroupSpec {
    pub fn unimodular(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        make_group(GroupParams::Unimodular { c: [c1, c2, c3] })
    }

    pub fn nonunimodular(a: f64, b: f64) -> Result<Self> {
        make_group(GroupParams::Nonunimodular { a, b })
    }

    /// Flat Euclidean space, `c = (0, 0, 0)`.
    pub fn euclidean() -> Self {
        GroupSpec { params: GroupParams::Unimodular { c: [0.0; 3] } }
    }

    /// Hyperbolic space as the semidirect product with `A = I`.
    pub fn hyperbolic() -> Self {
        GroupSpec { params: GroupParams::Nonunimodular { a: 0.0, b: 0.0 } }
    }

    pub fn params(&self) -> GroupParams {
        self.params
    }

    pub fn is_unimodular(&self) -> bool {
        matches!(self.params, GroupParams::Unimodular { .. })
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.params, GroupParams::Unimodular { c } if c == [0.0; 3])
    }

    /// Structure constants, `None` for the non-unimodular family.
    pub fn structure_constants(&self) -> Option<[f64; 3]> {
        match self.params {
            GroupParams::Unimodular { c } => Some(c),
            GroupParams::Nonunimodular { .. } => None,
        }
    }

    /// `(a, b)`, `None` for the unimodular family.
    pub fn semidirect_parameters(&self) -> Option<(f64, f64)> {
        match self.params {
            GroupParams::Nonunimodular { a, b } => Some((a, b)),
            GroupParams::Unimodular { .. } => None,
        }
    }

    /// `mu_i` for unimodular groups, zero otherwise.
    pub fn mu(&self) -> [f64; 3] {
        match self.params {
            GroupParams::Unimodular { c } => mu_values(c[0], c[1], c[2]),
            GroupParams::Nonunimodular { .. } => [0.0; 3],
        }
    }

    /// The matrix `A` of the semidirect model. Euclidean space is admitted
    /// with `A = 0`.
    pub fn semidirect_matrix(&self) -> Result<[[f64; 2]; 2]> {
        match self.params {
            GroupParams::Nonunimodular { a, b } => Ok(matrix_a(a, b)),
            GroupParams::Unimodular { c } if c == [0.0; 3] => Ok([[0.0; 2]; 2]),
            GroupParams::Unimodular { .. } => Err(Error::NotSemidirect(self.name().to_string())),
        }
    }

    pub fn compactness(&self) -> CriticalThreshold {
        match self.params {
            GroupParams::Unimodular { c } if c.iter().all(|&x| x > 0.0) => CriticalThreshold::Compact,
            GroupParams::Unimodular { .. } => CriticalThreshold::Threshold(0.0),
            GroupParams::Nonunimodular { .. } => CriticalThreshold::Threshold(1.0),
        }
    }

    /// Isomorphism class of the underlying Lie group.
    pub fn family(&self) -> &'static str {
        match self.params {
            GroupParams::Nonunimodular { a, b } => {
                if a == 0.0 && b == 0.0 {
                    "H3"
                } else if a == 1.0 && b == 0.0 {
                    "H2 x R"
                } else {
                    "R2 x_A R"
                }
            }
            GroupParams::Unimodular { c } => {
                let pos = c.iter().filter(|&&x| x > 0.0).count();
                let neg = c.iter().filter(|&&x| x < 0.0).count();
                match (pos, neg) {
                    (3, 0) => "SU(2)",
                    (2, 1) => "SL~(2,R)",
                    (2, 0) => "E~(2)",
                    (1, 1) => "Sol3",
                    (1, 0) | (0, 1) => "Nil3",
                    _ => "R3",
                }
            }
        }
    }

    /// The most specific label available, e.g. `"S3"` for equal positive
    /// constants or `"Berger S3"` when exactly two agree.
    pub fn name(&self) -> &'static str {
        let family = self.family();
        let GroupParams::Unimodular { c } = self.params else {
            return family;
        };
        let pairs_equal = [c[0] == c[1], c[1] == c[2], c[0] == c[2]];
        let all_equal = pairs_equal.iter().all(|&e| e);
        match family {
            "SU(2)" if all_equal => "S3",
            "SU(2)" if pairs_equal.iter().any(|&e| e) => "Berger S3",
            "E~(2)" => {
                let mut p = c.iter().filter(|&&x| x > 0.0);
                if p.next() == p.next() {
                    "E(2) flat"
                } else {
                    family
                }
            }
            _ => family,
        }
    }

    /// `C_ij^k` with `[E_i, E_j] = sum_k C_ij^k E_k`.
    pub fn brackets(&self) -> [[[f64; 3]; 3]; 3] {
        match self.params {
            GroupParams::Unimodular { c } => unimodular_brackets(c[0], c[1], c[2]),
            GroupParams::Nonunimodular { a, b } => nonunimodular_brackets(a, b),
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.params {
            GroupParams::Unimodular { c } => write!(f, "{} (c = {:?})", self.name(), c),
            GroupParams::Nonunimodular { a, b } => write!(f, "{} (a = {a}, b = {b})", self.name()),
        }
    }
}

/// `A(a, b)`, the trace-2 matrix of the semidirect product.
pub fn matrix_a(a: f64, b: f64) -> [[f64; 2]; 2] {
    [[1.0 + a, -(1.0 - a) * b], [(1.0 + a) * b, 1.0 - a]]
}

pub type Table3<T> = [[[T; 3]; 3]; 3];

fn zero_table<T: Zero + Copy>() -> Table3<T> {
    [[[T::zero(); 3]; 3]; 3]
}

/// Brackets `[E2,E3] = c1 E1`, `[E3,E1] = c2 E2`, `[E1,E2] = c3 E3`.
pub fn unimodular_brackets<T>(c1: T, c2: T, c3: T) -> Table3<T>
where
    T: Zero + Copy + Neg<Output = T>,
{
    let mut t = zero_table();
    let mut set = |i: usize, j: usize, k: usize, v: T| {
        t[i][j][k] = v;
        t[j][i][k] = -v;
    };
    set(1, 2, 0, c1);
    set(2, 0, 1, c2);
    set(0, 1, 2, c3);
    t
}

/// Brackets of the semidirect product with `A = A(a, b)`:
/// `[E1,E2] = 0`, `[E3,E1] = a11 E1 + a21 E2`, `[E3,E2] = a12 E1 + a22 E2`.
pub fn nonunimodular_brackets<T>(a: T, b: T) -> Table3<T>
where
    T: Zero + One + Copy + Neg<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<Output = T>,
{
    let one = T::one();
    let a11 = one + a;
    let a12 = -((one - a) * b);
    let a21 = (one + a) * b;
    let a22 = one - a;
    let mut t = zero_table();
    let mut set = |i: usize, j: usize, k: usize, v: T| {
        t[i][j][k] = v;
        t[j][i][k] = -v;
    };
    set(2, 0, 0, a11);
    set(2, 0, 1, a21);
    set(2, 1, 0, a12);
    set(2, 1, 1, a22);
    t
}

/// Levi-Civita coefficients `gamma_ij^k = <nabla_{E_i} E_j, E_k>` of an
/// orthonormal frame from its bracket table, by the Koszul formula
/// `gamma_ij^k = (C_ij^k - C_jk^i + C_ki^j) / 2`.
pub fn koszul<T>(c: &Table3<T>) -> Table3<T>
where
    T: Zero + One + Copy + std::ops::Sub<Output = T> + std::ops::Div<Output = T>,
{
    let two = T::one() + T::one();
    let mut g = zero_table();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                g[i][j][k] = (c[i][j][k] - c[j][k][i] + c[k][i][j]) / two;
            }
        }
    }
    g
}

/// Connection coefficients of a group's canonical frame, indexed from 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectionTable {
    pub gamma: Table3<f64>,
}

impl ConnectionTable {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.gamma[i][j][k]
    }

    pub fn is_flat(&self) -> bool {
        self.gamma.iter().flatten().flatten().all(|&x| x == 0.0)
    }
}

pub fn connection_table(g: &GroupSpec) -> ConnectionTable {
    ConnectionTable { gamma: koszul(&g.brackets()) }
}

/// `exp(zM)` for a real 2x2 matrix `M`.
///
/// Writes `M = mI + N` with `N^2 = delta I`, so that
/// `exp(zM) = e^{zm} (C(z) I + S(z) N)` with `C, S` the hyperbolic or
/// trigonometric pair according to the sign of `delta`. Near `delta = 0`
/// both are replaced by their Taylor series.
pub fn expm2(m: &[[f64; 2]; 2], z: f64) -> [[f64; 2]; 2] {
    let half_tr = 0.5 * (m[0][0] + m[1][1]);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let delta = half_tr * half_tr - det;
    let n = [[m[0][0] - half_tr, m[0][1]], [m[1][0], m[1][1] - half_tr]];
    let scale = half_tr * half_tr + det.abs();
    let (c, s) = if scale == 0.0 || delta.abs() <= 1e-8 * scale {
        series_cs(delta, z)
    } else if delta > 0.0 {
        let r = delta.sqrt();
        ((r * z).cosh(), (r * z).sinh() / r)
    } else {
        let r = (-delta).sqrt();
        ((r * z).cos(), (r * z).sin() / r)
    };
    let e = (half_tr * z).exp();
    [
        [e * (c + s * n[0][0]), e * s * n[0][1]],
        [e * s * n[1][0], e * (c + s * n[1][1])],
    ]
}

/// Taylor sums `C = sum (delta z^2)^k / (2k)!`, `S = z sum (delta z^2)^k / (2k+1)!`
/// over twelve terms.
fn series_cs(delta: f64, z: f64) -> (f64, f64) {
    let x = delta * z * z;
    let (mut c, mut s) = (0.0, 0.0);
    let (mut tc, mut ts) = (1.0, 1.0);
    for k in 0..12 {
        c += tc;
        s += ts;
        let k = k as f64;
        tc *= x / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
        ts *= x / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
    }
    (c, z * s)
}

#[allow(non_snake_case)]
pub fn exp_zA(a: f64, b: f64, z: f64) -> [[f64; 2]; 2] {
    expm2(&matrix_a(a, b), z)
}

pub fn mat2_mul(p: &[[f64; 2]; 2], q: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [p[0][0] * q[0][0] + p[0][1] * q[1][0], p[0][0] * q[0][1] + p[0][1] * q[1][1]],
        [p[1][0] * q[0][0] + p[1][1] * q[1][0], p[1][0] * q[0][1] + p[1][1] * q[1][1]],
    ]
}

pub fn mat2_apply(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// A point `(p, z)` of `R^2 x_A R`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SemidirectPoint {
    pub p: [f64; 2],
    pub z: f64,
}

impl SemidirectPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        SemidirectPoint { p: [x, y], z }
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.p[0], self.p[1], self.z]
    }
}

/// `(p1, z1) * (p2, z2) = (p1 + e^{z1 A} p2, z1 + z2)`.
pub fn group_multiply(g: &GroupSpec, p1: &SemidirectPoint, p2: &SemidirectPoint) -> Result<SemidirectPoint> {
    let a = g.semidirect_matrix()?;
    Ok(multiply_with(&a, p1, p2))
}

pub(crate) fn multiply_with(a: &[[f64; 2]; 2], p1: &SemidirectPoint, p2: &SemidirectPoint) -> SemidirectPoint {
    let e = expm2(a, p1.z);
    let v = mat2_apply(&e, p2.p);
    SemidirectPoint { p: [p1.p[0] + v[0], p1.p[1] + v[1]], z: p1.z + p2.z }
}

pub fn group_inverse(g: &GroupSpec, p: &SemidirectPoint) -> Result<SemidirectPoint> {
    let a = g.semidirect_matrix()?;
    let e = expm2(&a, -p.z);
    let v = mat2_apply(&e, p.p);
    Ok(SemidirectPoint { p: [-v[0], -v[1]], z: -p.z })
}

/// The canonical frame at `pt` in coordinates `(d/dx, d/dy, d/dz)`:
/// `E1, E2` are the columns of `e^{zA}` and `E3 = d/dz`.
pub fn frame_at(g: &GroupSpec, pt: &SemidirectPoint) -> Result<[[f64; 3]; 3]> {
    let a = g.semidirect_matrix()?;
    Ok(frame_with(&a, pt.z))
}

pub(crate) fn frame_with(a: &[[f64; 2]; 2], z: f64) -> [[f64; 3]; 3] {
    let e = expm2(a, z);
    [[e[0][0], e[1][0], 0.0], [e[0][1], e[1][1], 0.0], [0.0, 0.0, 1.0]]
}
