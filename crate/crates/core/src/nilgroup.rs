//! The free two-step nilpotent group `F(p)` in exponential coordinates.
//!
//! An element is written `exp(X + A)` with `X` in the generating space
//! `V = R^p` and `A` in the centre `Z`, identified with antisymmetric
//! `p x p` matrices. The bracket on `V` is `[X, Y] = Y X^T - X Y^T`, so that
//! `[X, Y] v = <X, v> Y - <Y, v> X`, and the group law is the two-step
//! Baker–Campbell–Hausdorff product
//!
//! ```text
//! (X, A) . (X', A') = (X + X', A + A' + 1/2 [X, X'])
//! ```
//!
//! `O(p)` acts by automorphisms through `k . (X, A) = (kX, k A k^T)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};

/// Per-entry tolerance for `k^T k = I`.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;
/// Relative cutoff (against `|a|_F`) below which canonical-form values are zero.
pub const CANONICAL_ZERO_REL: f64 = 1e-12;
/// Relative tolerance (against `lambda_1`) for grouping equal spectral values.
pub const GROUPING_REL: f64 = 1e-9;

/// Sign convention for the 2x2 generator used in block forms.
///
/// The block form `D2(Lambda)` is built from `J = [[0, 1], [-1, 0]]`, while the
/// bracket of canonical basis vectors satisfies `[X_1, X_2] = -J` as a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JConvention {
    /// `J = [[0, 1], [-1, 0]]`, used by [`d2`].
    Standard,
    /// `[X_1, X_2] = [[0, -1], [1, 0]] = -J`.
    Bracket,
}

impl JConvention {
    /// The `(0, 1)` entry of the generator in this convention.
    pub fn upper_sign(self) -> f64 {
        match self {
            JConvention::Standard => 1.0,
            JConvention::Bracket => -1.0,
        }
    }
}

/// A vector of the generating space `V = R^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VecV {
    coords: Vec<f64>,
}

impl VecV {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(invalid(format!("p must be at least 2, got {}", coords.len())));
        }
        Ok(Self { coords })
    }

    pub fn zeros(p: usize) -> Self {
        Self { coords: vec![0.0; p] }
    }

    /// The canonical basis vector `X_{i+1}` (zero-based index `i`).
    pub fn basis(p: usize, i: usize) -> Self {
        let mut coords = vec![0.0; p];
        coords[i] = 1.0;
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn dot(&self, other: &VecV) -> f64 {
        self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> VecV {
        VecV { coords: self.coords.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &VecV) -> Result<VecV> {
        check_dim(self.dim(), other.dim())?;
        Ok(VecV { coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect() })
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }
}

#[inline]
pub(crate) fn upper_index(p: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < p);
    i * (2 * p - i - 1) / 2 + (j - i - 1)
}

/// An element of the centre, stored as the strict upper triangle (row-major)
/// of an antisymmetric matrix so that `A + A^T = 0` holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewZ {
    p: usize,
    upper: Vec<f64>,
}

impl SkewZ {
    pub fn zeros(p: usize) -> Self {
        Self { p, upper: vec![0.0; p * (p - 1) / 2] }
    }

    /// Build from the strict upper triangle, ordered `(0,1), (0,2), ..., (1,2), ...`.
    pub fn from_upper(p: usize, upper: Vec<f64>) -> Result<Self> {
        if p < 2 {
            return Err(invalid(format!("p must be at least 2, got {p}")));
        }
        check_dim(p * (p - 1) / 2, upper.len())?;
        Ok(Self { p, upper })
    }

    /// Build from a dense matrix, which must be antisymmetric up to `1e-12` relative.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let p = m.nrows();
        check_dim(p, m.ncols())?;
        let scale = m.norm().max(1.0);
        let skew = (m + m.transpose()).amax();
        if skew > 1e-12 * scale {
            return Err(invalid(format!("matrix is not antisymmetric (|A + A^T| = {skew:e})")));
        }
        Ok(Self::antisymmetric_part(m))
    }

    /// The strict upper triangle of `(m - m^T) / 2`.
    pub fn antisymmetric_part(m: &DMatrix<f64>) -> Self {
        let p = m.nrows();
        let mut upper = Vec::with_capacity(p * (p - 1) / 2);
        for i in 0..p {
            for j in i + 1..p {
                upper.push(0.5 * (m[(i, j)] - m[(j, i)]));
            }
        }
        Self { p, upper }
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Equal => 0.0,
            Ordering::Less => self.upper[upper_index(self.p, i, j)],
            Ordering::Greater => -self.upper[upper_index(self.p, j, i)],
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.p, |i, j| self.get(i, j))
    }

    pub fn add(&self, other: &SkewZ) -> Result<SkewZ> {
        check_dim(self.p, other.p)?;
        Ok(SkewZ {
            p: self.p,
            upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> SkewZ {
        SkewZ { p: self.p, upper: self.upper.iter().map(|a| a * s).collect() }
    }

    /// `A . x` as a matrix-vector product.
    pub fn apply(&self, x: &VecV) -> Result<VecV> {
        check_dim(self.p, x.dim())?;
        let mut out = vec![0.0; self.p];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..self.p).map(|j| self.get(i, j) * x.coords[j]).sum();
        }
        Ok(VecV { coords: out })
    }

    /// Norm induced by [`z_inner`].
    pub fn norm(&self) -> f64 {
        self.upper.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// A point `exp(X + A)` of `F(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElem {
    pub x: VecV,
    pub a: SkewZ,
}

impl GroupElem {
    pub fn new(x: VecV, a: SkewZ) -> Result<Self> {
        check_dim(x.dim(), a.dim())?;
        Ok(Self { x, a })
    }

    pub fn identity(p: usize) -> Self {
        Self { x: VecV::zeros(p), a: SkewZ::zeros(p) }
    }

    pub fn from_parts(x: Vec<f64>, a_upper: Vec<f64>) -> Result<Self> {
        let x = VecV::new(x)?;
        let a = SkewZ::from_upper(x.dim(), a_upper)?;
        Ok(Self { x, a })
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn inverse(&self) -> GroupElem {
        GroupElem { x: self.x.scale(-1.0), a: self.a.scale(-1.0) }
    }

    /// Concatenated exponential coordinates `(X, strict upper triangle of A)`.
    pub fn coords(&self) -> Vec<f64> {
        self.x.coords.iter().chain(&self.a.upper).copied().collect()
    }

    pub fn from_coords(p: usize, coords: &[f64]) -> Result<Self> {
        check_dim(p + p * (p - 1) / 2, coords.len())?;
        Self::from_parts(coords[..p].to_vec(), coords[p..].to_vec())
    }

    pub fn is_identity(&self) -> bool {
        self.x.coords.iter().chain(&self.a.upper).all(|c| *c == 0.0)
    }
}

/// An orthogonal matrix `k` in `O(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthMat {
    m: DMatrix<f64>,
}

impl OrthMat {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let p = m.nrows();
        check_dim(p, m.ncols())?;
        let defect = (m.transpose() * &m - DMatrix::<f64>::identity(p, p)).amax();
        if defect > ORTHOGONALITY_TOL {
            return Err(invalid(format!("matrix is not orthogonal (|k^T k - I| = {defect:e})")));
        }
        Ok(Self { m })
    }

    /// Wraps a matrix whose orthogonality is guaranteed by construction.
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        debug_assert!((m.transpose() * &m - DMatrix::<f64>::identity(m.nrows(), m.nrows())).amax() < 1e-10);
        Self { m }
    }

    pub fn identity(p: usize) -> Self {
        Self { m: DMatrix::identity(p, p) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn transpose(&self) -> OrthMat {
        OrthMat { m: self.m.transpose() }
    }

    pub fn mul(&self, other: &OrthMat) -> Result<OrthMat> {
        check_dim(self.dim(), other.dim())?;
        Ok(OrthMat { m: &self.m * &other.m })
    }

    pub fn determinant(&self) -> f64 {
        self.m.determinant()
    }

    /// `(k x)_i`.
    #[inline]
    pub(crate) fn apply_row(&self, i: usize, x: &[f64]) -> f64 {
        let p = self.dim();
        let mut s = 0.0;
        for (j, xj) in x.iter().enumerate().take(p) {
            s += self.m[(i, j)] * xj;
        }
        s
    }

    /// `(k A k^T)_{ij}`.
    #[inline]
    pub(crate) fn conj_entry(&self, a: &SkewZ, i: usize, j: usize) -> f64 {
        let p = self.dim();
        let mut s = 0.0;
        for b in 0..p {
            for c in (b + 1)..p {
                let v = a.upper[upper_index(p, b, c)];
                if v != 0.0 {
                    s += v * (self.m[(i, b)] * self.m[(j, c)] - self.m[(i, c)] * self.m[(j, b)]);
                }
            }
        }
        s
    }
}

/// Canonical spectral data of a central parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaParams {
    /// `lambda_1 >= ... >= lambda_{p'} >= 0`.
    pub lambdas: Vec<f64>,
    /// Number of nonzero values.
    pub p0: usize,
    /// Number of distinct nonzero values.
    pub p1: usize,
    /// Distinct nonzero values, strictly decreasing.
    pub mu: Vec<f64>,
    /// Multiplicities `m_1, ..., m_{p1}` of the distinct values.
    pub mult: Vec<usize>,
    /// `|Lambda| = (sum lambda_j^2)^{1/2}`.
    pub norm: f64,
}

impl LambdaParams {
    /// `p' = floor(p / 2)`.
    pub fn p_prime(&self) -> usize {
        self.lambdas.len()
    }

    /// Partial sums `m'_0 = 0, m'_j = m_1 + ... + m_j`.
    pub fn mult_prefix(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.p1 + 1);
        out.push(0);
        let mut acc = 0;
        for m in &self.mult {
            acc += m;
            out.push(acc);
        }
        out
    }

    /// Rescale every value by `s > 0`; block structure is unchanged.
    pub fn scaled(&self, s: f64) -> Result<LambdaParams> {
        if !(s > 0.0) {
            return Err(invalid(format!("scale must be positive, got {s}")));
        }
        let mut out = self.clone();
        out.lambdas.iter_mut().for_each(|l| *l *= s);
        out.mu.iter_mut().for_each(|l| *l *= s);
        out.norm *= s;
        Ok(out)
    }
}

/// Computes `p0, p1, mu, mult, |Lambda|` from a nonincreasing nonnegative vector.
///
/// Consecutive values within `1e-9 * lambda_1` of the first value of their
/// group are treated as equal; `mu_j` is the mean of its group.
pub fn spectral_params(lambdas: &[f64]) -> Result<LambdaParams> {
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(invalid(format!("spectral values must be finite and nonnegative, got {bad}")));
    }
    if lambdas.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("spectral values must be nonincreasing"));
    }
    let tol = GROUPING_REL * lambdas.first().copied().unwrap_or(0.0);
    let nonzero: Vec<f64> = lambdas.iter().copied().filter(|l| *l > 0.0).collect();
    let mut mu = Vec::new();
    let mut mult = Vec::new();
    let mut i = 0;
    while i < nonzero.len() {
        let head = nonzero[i];
        let mut j = i + 1;
        while j < nonzero.len() && head - nonzero[j] <= tol {
            j += 1;
        }
        mu.push(nonzero[i..j].iter().sum::<f64>() / (j - i) as f64);
        mult.push(j - i);
        i = j;
    }
    Ok(LambdaParams {
        lambdas: lambdas.to_vec(),
        p0: nonzero.len(),
        p1: mu.len(),
        mu,
        mult,
        norm: lambdas.iter().map(|l| l * l).sum::<f64>().sqrt(),
    })
}

/// `D2(Lambda)`: blocks `lambda_i J` on the diagonal, zero-padded to `p x p`.
pub fn d2(lambdas: &[f64], p: usize) -> Result<SkewZ> {
    d2_with(lambdas, p, JConvention::Standard)
}

pub fn d2_with(lambdas: &[f64], p: usize, convention: JConvention) -> Result<SkewZ> {
    if lambdas.len() > p / 2 {
        return Err(invalid(format!("{} spectral values do not fit in p = {p}", lambdas.len())));
    }
    let mut a = SkewZ::zeros(p);
    for (i, l) in lambdas.iter().enumerate() {
        a.upper[upper_index(p, 2 * i, 2 * i + 1)] = convention.upper_sign() * l;
    }
    Ok(a)
}

/// `[x, y] = y x^T - x y^T`.
pub fn bracket(x: &VecV, y: &VecV) -> Result<SkewZ> {
    check_dim(x.dim(), y.dim())?;
    let p = x.dim();
    let mut a = SkewZ::zeros(p);
    for i in 0..p {
        for j in i + 1..p {
            a.upper[upper_index(p, i, j)] = y.coords[i] * x.coords[j] - x.coords[i] * y.coords[j];
        }
    }
    Ok(a)
}

/// `<a, b> = 1/2 tr(a^T b)`, i.e. the sum over the strict upper triangle.
pub fn z_inner(a: &SkewZ, b: &SkewZ) -> Result<f64> {
    check_dim(a.p, b.p)?;
    Ok(a.upper.iter().zip(&b.upper).map(|(x, y)| x * y).sum())
}

pub fn group_mul(g: &GroupElem, h: &GroupElem) -> Result<GroupElem> {
    check_dim(g.dim(), h.dim())?;
    let x = g.x.add(&h.x)?;
    let a = g.a.add(&h.a)?.add(&bracket(&g.x, &h.x)?.scale(0.5))?;
    Ok(GroupElem { x, a })
}

/// `k . (X, A) = (k X, k A k^T)`.
pub fn act(k: &OrthMat, g: &GroupElem) -> Result<GroupElem> {
    let p = g.dim();
    check_dim(p, k.dim())?;
    let x = (0..p).map(|i| k.apply_row(i, g.x.as_slice())).collect();
    let mut a = SkewZ::zeros(p);
    for i in 0..p {
        for j in i + 1..p {
            a.upper[upper_index(p, i, j)] = k.conj_entry(&g.a, i, j);
        }
    }
    Ok(GroupElem { x: VecV { coords: x }, a })
}

/// Orthogonal reduction `k^T a k = D2(Lambda)` with `Lambda` nonincreasing.
///
/// Uses a real Schur decomposition; for antisymmetric input the Schur form is
/// block diagonal with 2x2 skew blocks and 1x1 zeros. Blocks are sorted by
/// magnitude and column pairs swapped where needed to make each block `+lambda J`.
pub fn canonical_form(a: &SkewZ) -> (LambdaParams, OrthMat) {
    let p = a.dim();
    let m = a.matrix();
    let scale = m.norm();
    let zero_cut = CANONICAL_ZERO_REL * scale;
    if scale == 0.0 {
        let params = spectral_params(&vec![0.0; p / 2]).expect("zeros are valid");
        return (params, OrthMat::identity(p));
    }
    let (q, t) = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 100_000)
        .expect("real Schur iteration on a normal matrix converges")
        .unpack();

    // (lambda, first column, second column); lambda carries the sign of t[c1, c2].
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    let mut singles: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < p {
        if i + 1 < p && t[(i + 1, i)] != 0.0 {
            let lam = 0.5 * (t[(i, i + 1)] - t[(i + 1, i)]);
            pairs.push((lam, i, i + 1));
            i += 2;
        } else {
            singles.push(i);
            i += 1;
        }
    }
    pairs.sort_by(|x, y| y.0.abs().total_cmp(&x.0.abs()));

    let mut cols: Vec<usize> = Vec::with_capacity(p);
    let mut lambdas = vec![0.0; p / 2];
    let mut rest: Vec<usize> = Vec::new();
    let mut n_pairs = 0;
    for (lam, c1, c2) in pairs {
        if lam.abs() <= zero_cut {
            rest.push(c1);
            rest.push(c2);
            continue;
        }
        if lam > 0.0 {
            cols.extend([c1, c2]);
        } else {
            cols.extend([c2, c1]);
        }
        lambdas[n_pairs] = lam.abs();
        n_pairs += 1;
    }
    rest.extend(singles);
    cols.extend(rest);

    let k = DMatrix::from_fn(p, p, |r, c| q[(r, cols[c])]);
    let params = spectral_params(&lambdas).expect("sorted magnitudes are valid");
    (params, OrthMat::from_trusted(k))
}

/// Inverse of an element in exponential coordinates.
pub fn inverse(g: &GroupElem) -> GroupElem {
    g.inverse()
}
