//! Bounded spherical functions on the Heisenberg group `H^{p0}` for the
//! stabilizer `K(m) = U(m_1) x ... x U(m_{p1})`.
//!
//! Group law: `(z, t) . (z', t') = (z + z', t + t' + 1/2 sum Im(z_i conj(z'_i)))`.
//! The left-invariant fields along `Re z_i`, `Im z_i` are
//! `X_i = d/dx_i + (y_i/2) d/dt` and `Y_i = d/dy_i - (x_i/2) d/dt`.
//!
//! Type 1 (`lambda != 0`): `e^{i lambda t} prod_j q_{l_j}^{(m_j)}(|lambda| |z_j|^2)`.
//! Type 2: `prod_j E_{m_j}(|omega_j| |z_j|)` with
//! `E_n(s) = sum_k (-1)^k (s/2)^{2k} / (k! (n)_k)`, the average of
//! `e^{i Re<z, k omega>}` over the block-unitary group.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, NilError, Result};
use crate::haar::{derive_seed, Estimate};
use crate::laguerre::{self, invariant_dim, profile_coefficients, radial_profile, MAX_DEGREE};

/// Largest truncation degree the series evaluator will use.
pub const MAX_SERIES_DEGREE: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergPoint {
    pub z: Vec<Complex64>,
    pub t: f64,
    /// Block sizes `m_1, ..., m_{p1}`; they sum to `z.len()`.
    pub blocks: Vec<usize>,
}

fn check_blocks(blocks: &[usize], p0: usize) -> Result<()> {
    if blocks.contains(&0) {
        return Err(invalid("block sizes must be positive"));
    }
    check_dim(p0, blocks.iter().sum())
}

impl HeisenbergPoint {
    pub fn new(z: Vec<Complex64>, t: f64, blocks: Vec<usize>) -> Result<Self> {
        check_blocks(&blocks, z.len())?;
        Ok(Self { z, t, blocks })
    }

    /// A point with a single unitary block of size `z.len()`.
    pub fn single_block(z: Vec<Complex64>, t: f64) -> Self {
        let n = z.len();
        Self { z, t, blocks: vec![n] }
    }

    pub fn identity(blocks: &[usize]) -> Self {
        Self { z: vec![Complex64::new(0.0, 0.0); blocks.iter().sum()], t: 0.0, blocks: blocks.to_vec() }
    }

    pub fn inverse(&self) -> Self {
        Self { z: self.z.iter().map(|z| -z).collect(), t: -self.t, blocks: self.blocks.clone() }
    }

    /// `|z_j|^2` for each block.
    pub fn block_norms_sq(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut start = 0;
        for &m in &self.blocks {
            out.push(self.z[start..start + m].iter().map(|z| z.norm_sqr()).sum());
            start += m;
        }
        out
    }
}

pub fn h_mul(h: &HeisenbergPoint, g: &HeisenbergPoint) -> Result<HeisenbergPoint> {
    check_dim(h.z.len(), g.z.len())?;
    if h.blocks != g.blocks {
        return Err(invalid("block partitions differ"));
    }
    let z = h.z.iter().zip(&g.z).map(|(a, b)| a + b).collect();
    let twist: f64 = h.z.iter().zip(&g.z).map(|(a, b)| (a * b.conj()).im).sum();
    Ok(HeisenbergPoint { z, t: h.t + g.t + 0.5 * twist, blocks: h.blocks.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HSphericalLabel {
    Type1 { lambda: f64, l: Vec<u32>, blocks: Vec<usize> },
    Type2 { omega: Vec<Complex64>, blocks: Vec<usize> },
}

impl HSphericalLabel {
    pub fn type1(lambda: f64, l: Vec<u32>, blocks: Vec<usize>) -> Result<Self> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(invalid("type-1 labels need a finite nonzero lambda"));
        }
        if blocks.is_empty() {
            return Err(invalid("type-1 labels need at least one block"));
        }
        check_blocks(&blocks, blocks.iter().sum())?;
        check_dim(blocks.len(), l.len())?;
        if let Some(bad) = l.iter().find(|l| **l > MAX_DEGREE) {
            return Err(invalid(format!("Laguerre index {bad} exceeds the supported maximum {MAX_DEGREE}")));
        }
        Ok(Self::Type1 { lambda, l, blocks })
    }

    pub fn type2(omega: Vec<Complex64>, blocks: Vec<usize>) -> Result<Self> {
        check_blocks(&blocks, omega.len())?;
        Ok(Self::Type2 { omega, blocks })
    }

    pub fn blocks(&self) -> &[usize] {
        match self {
            Self::Type1 { blocks, .. } | Self::Type2 { blocks, .. } => blocks,
        }
    }

    fn check_point(&self, h: &HeisenbergPoint) -> Result<()> {
        if h.blocks != self.blocks() {
            return Err(invalid(format!(
                "point blocks {:?} do not match label blocks {:?}",
                h.blocks,
                self.blocks()
            )));
        }
        Ok(())
    }
}

/// Type-1 value from the block radii `|z_j|^2`; no allocation.
#[inline]
pub(crate) fn type1_from_block_sq(lambda: f64, t: f64, l: &[u32], blocks: &[usize], block_sq: &[f64]) -> Complex64 {
    let mut radial = 1.0;
    for ((lj, mj), r2) in l.iter().zip(blocks).zip(block_sq) {
        radial *= radial_profile(*lj, *mj, lambda.abs() * r2);
    }
    Complex64::from_polar(radial, lambda * t)
}

pub fn type1_value(label: &HSphericalLabel, h: &HeisenbergPoint) -> Result<Complex64> {
    match label {
        HSphericalLabel::Type1 { lambda, l, blocks } => {
            label.check_point(h)?;
            Ok(type1_from_block_sq(*lambda, h.t, l, blocks, &h.block_norms_sq()))
        }
        HSphericalLabel::Type2 { .. } => Err(NilError::KindMismatch("type1_value needs a type-1 label".into())),
    }
}

/// A truncated series value with its certified error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: Complex64,
    /// Truncation bound plus a rounding allowance.
    pub tail_bound: f64,
    /// Highest total degree kept.
    pub degree: usize,
}

/// Smallest `M` whose tail `sum_{m > M} binom(A+m-1, m) Y^m / m!` is certified
/// below `eps` by a geometric bound with ratio at most 1/2.
///
/// The term ratio `(A+m) Y / (m+1)^2` decreases in `m`, so once it drops to
/// `rho <= 1/2` the tail from `M+1` on is at most `t_{M+1} / (1 - rho)`.
pub fn truncation_degree(a: usize, y: f64, eps: f64) -> Result<(usize, f64)> {
    let a = a.max(1) as f64;
    let mut t = 1.0; // t_m
    let mut m = 0usize;
    loop {
        let rho = (a + m as f64) / ((m + 1) as f64).powi(2) * y;
        let t_next = t * rho;
        let rho_next = (a + (m + 1) as f64) / ((m + 2) as f64).powi(2) * y;
        if rho_next <= 0.5 {
            let tail = t_next / (1.0 - rho_next);
            if tail <= eps {
                return Ok((m, tail));
            }
        }
        if m >= MAX_SERIES_DEGREE {
            return Err(NilError::Unsupported(format!("series needs more than {MAX_SERIES_DEGREE} terms")));
        }
        t = t_next;
        m += 1;
    }
}

/// Per-block sequences `d -> term_d`, convolved and summed over total degree `<= max`.
fn sum_block_series(seqs: &[Vec<f64>], max: usize) -> (f64, f64) {
    let mut acc = vec![0.0; max + 1];
    let mut acc_abs = vec![0.0; max + 1];
    acc[0] = 1.0;
    acc_abs[0] = 1.0;
    for s in seqs {
        let mut next = vec![0.0; max + 1];
        let mut next_abs = vec![0.0; max + 1];
        for (i, (a, aa)) in acc.iter().zip(&acc_abs).enumerate() {
            if *aa == 0.0 {
                continue;
            }
            for (d, v) in s.iter().enumerate().take(max + 1 - i) {
                next[i + d] += a * v;
                next_abs[i + d] += aa * v.abs();
            }
        }
        acc = next;
        acc_abs = next_abs;
    }
    (acc.iter().sum(), acc_abs.iter().sum())
}

/// `w_d = (y/2)^d / d!` for `d = 0..=max`, i.e. `|lambda|^d p_d(z)` with `y = |lambda| |z|^2`.
fn power_terms(y: f64, max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut w = 1.0;
    for d in 0..=max {
        if d > 0 {
            w *= 0.5 * y / d as f64;
        }
        out.push(w);
    }
    out
}

/// Evaluates `e^{i lambda t} sum_{|delta| <= M} |lambda|^{|delta|} coeff(delta) p_delta(z)`.
pub fn type1_series_value(label: &HSphericalLabel, h: &HeisenbergPoint, eps: f64) -> Result<SeriesValue> {
    let HSphericalLabel::Type1 { lambda, l, blocks } = label else {
        return Err(NilError::KindMismatch("type1_series_value needs a type-1 label".into()));
    };
    if !(eps > 0.0) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    label.check_point(h)?;
    let block_sq = h.block_norms_sq();
    let a: usize = blocks.iter().sum::<usize>() + l.iter().map(|x| *x as usize).sum::<usize>();
    let y = 0.5 * lambda.abs() * block_sq.iter().sum::<f64>();
    let (degree, tail) = truncation_degree(a, y, eps)?;
    let seqs: Vec<Vec<f64>> = l
        .iter()
        .zip(blocks)
        .zip(&block_sq)
        .map(|((lj, mj), r2)| {
            let c = profile_coefficients(*lj, *mj, degree);
            power_terms(lambda.abs() * r2, degree).iter().zip(&c).map(|(w, c)| w * c).collect()
        })
        .collect();
    let (sum, abs_sum) = sum_block_series(&seqs, degree);
    let rounding = 2.0 * (degree + 16) as f64 * f64::EPSILON * abs_sum + f64::EPSILON;
    Ok(SeriesValue { value: Complex64::from_polar(sum, lambda * h.t), tail_bound: tail + rounding, degree })
}

/// `E_n(s) = sum_k (-1)^k (s/2)^{2k} / (k! (n)_k)`, summed until terms are negligible.
pub fn block_bessel(n: usize, s: f64) -> f64 {
    let q = 0.25 * s * s;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0usize;
    loop {
        k += 1;
        term *= -q / (k as f64 * (n + k - 1) as f64);
        sum += term;
        if (k as f64) > s && term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            return sum;
        }
        if k > 10_000 {
            return sum;
        }
    }
}

pub fn type2_value(label: &HSphericalLabel, h: &HeisenbergPoint) -> Result<Complex64> {
    let HSphericalLabel::Type2 { omega, blocks } = label else {
        return Err(NilError::KindMismatch("type2_value needs a type-2 label".into()));
    };
    label.check_point(h)?;
    let zs = h.block_norms_sq();
    let omega_pt = HeisenbergPoint { z: omega.clone(), t: 0.0, blocks: blocks.clone() };
    let ws = omega_pt.block_norms_sq();
    let mut v = 1.0;
    for ((n, z2), w2) in blocks.iter().zip(&zs).zip(&ws) {
        v *= block_bessel(*n, (z2 * w2).sqrt());
    }
    Ok(Complex64::new(v, 0.0))
}

/// Haar-random element of `U(n)`: QR of a complex Gaussian matrix with the
/// phases of the `R`-diagonal moved into `Q`.
pub fn unitary_sample(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let g = DMatrix::<Complex64>::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Monte Carlo estimate of `int_K e^{i Re<z, k omega>} dk` over the block-unitary group.
pub fn type2_orbit_integral(omega: &[Complex64], h: &HeisenbergPoint, samples: usize, seed: u64) -> Result<Estimate> {
    check_dim(h.z.len(), omega.len())?;
    if samples < 2 {
        return Err(invalid("orbit integral needs at least two samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let (mut s, mut sq_re, mut sq_im) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
    for _ in 0..samples {
        let mut phase = 0.0;
        let mut start = 0;
        for &m in &h.blocks {
            let k = unitary_sample(m, &mut rng);
            for i in 0..m {
                let mut kw = Complex64::new(0.0, 0.0);
                for j in 0..m {
                    kw += k[(i, j)] * omega[start + j];
                }
                phase += (h.z[start + i] * kw.conj()).re;
            }
            start += m;
        }
        let v = Complex64::from_polar(1.0, phase);
        s += v;
        sq_re += v.re * v.re;
        sq_im += v.im * v.im;
    }
    let n = samples as f64;
    let mean = s / n;
    let var = (sq_re / n - mean.re * mean.re).max(0.0) + (sq_im / n - mean.im * mean.im).max(0.0);
    Ok(Estimate { value: mean, err: (var / (n - 1.0)).sqrt() })
}

/// Eigenvalue data of a Heisenberg spherical function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigRecord {
    pub label: HSphericalLabel,
    /// Eigenvalue of `d/dt`: `i lambda` (type 1) or `0` (type 2).
    pub t_hat: Complex64,
    /// Block sublaplacian eigenvalues: `-|lambda| (2 l_j + m_j)` (type 1), `-|omega_j|^2` (type 2).
    pub lgamma_hat: Vec<f64>,
    /// Series coefficients `L_{p_delta} / dim(P_delta)` keyed by block degree multi-index.
    pub coeff: BTreeMap<Vec<usize>, f64>,
}

fn multi_indices(blocks: usize, max_degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..blocks {
        let mut next = Vec::new();
        for prefix in &out {
            let used: usize = prefix.iter().sum();
            for d in 0..=max_degree - used {
                let mut v = prefix.clone();
                v.push(d);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

pub fn eig_record(label: &HSphericalLabel, max_degree: usize) -> EigRecord {
    let blocks = label.blocks();
    let (t_hat, lgamma_hat, per_block): (Complex64, Vec<f64>, Vec<Vec<f64>>) = match label {
        HSphericalLabel::Type1 { lambda, l, blocks } => (
            Complex64::new(0.0, *lambda),
            l.iter().zip(blocks).map(|(lj, mj)| -lambda.abs() * (2.0 * *lj as f64 + *mj as f64)).collect(),
            // Coefficients are stated at |lambda| = 1; the series carries |lambda|^{|delta|}.
            l.iter().zip(blocks).map(|(lj, mj)| profile_coefficients(*lj, *mj, max_degree)).collect(),
        ),
        HSphericalLabel::Type2 { omega, blocks } => {
            let w = HeisenbergPoint { z: omega.clone(), t: 0.0, blocks: blocks.clone() }.block_norms_sq();
            let per_block = w
                .iter()
                .zip(blocks)
                .map(|(w2, n)| {
                    // (-1)^d p_d(omega_j) / dim(P_d)
                    power_terms(*w2, max_degree)
                        .iter()
                        .enumerate()
                        .map(|(d, p)| if d % 2 == 0 { 1.0 } else { -1.0 } * p / invariant_dim(*n, d))
                        .collect()
                })
                .collect();
            (Complex64::new(0.0, 0.0), w.iter().map(|w2| -w2).collect(), per_block)
        }
    };
    let coeff = multi_indices(blocks.len(), max_degree)
        .into_iter()
        .map(|delta| {
            let c = delta.iter().zip(&per_block).map(|(d, c)| c[*d]).product();
            (delta, c)
        })
        .collect();
    EigRecord { label: label.clone(), t_hat, lgamma_hat, coeff }
}

/// `dim(P_delta) = prod_j binom(delta_j + m_j - 1, delta_j)`.
pub fn multi_dim(blocks: &[usize], delta: &[usize]) -> f64 {
    blocks.iter().zip(delta).map(|(n, d)| invariant_dim(*n, *d)).product()
}

pub use laguerre::coeff_bound;

/// Central-difference estimates of `(d/dt f)/f` and of the block sublaplacians
/// `(sum_{i in block} X_i^2 + Y_i^2) f / f` at `h`, using left translations.
pub fn finite_difference_eigenvalues<F>(f: F, h: &HeisenbergPoint, step: f64) -> Result<(Complex64, Vec<Complex64>)>
where
    F: Fn(&HeisenbergPoint) -> Result<Complex64>,
{
    let f0 = f(h)?;
    let shift_t = |s: f64| HeisenbergPoint { t: h.t + s, ..h.clone() };
    let dt = (f(&shift_t(step))? - f(&shift_t(-step))?) / (2.0 * step);
    let mut out = Vec::with_capacity(h.blocks.len());
    let mut start = 0;
    for &m in &h.blocks {
        let mut lap = Complex64::new(0.0, 0.0);
        for i in start..start + m {
            for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                let along = |s: f64| {
                    let mut e = HeisenbergPoint::identity(&h.blocks);
                    e.z[i] = dir * s;
                    h_mul(h, &e)
                };
                let fp = f(&along(step)?)?;
                let fm = f(&along(-step)?)?;
                lap += (fp - 2.0 * f0 + fm) / (step * step);
            }
        }
        out.push(lap / f0);
        start += m;
    }
    Ok((dt / f0, out))
}
