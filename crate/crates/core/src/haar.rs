//! Integration over `O(p)` against normalized Haar measure.
//!
//! `O(2)` and `O(3)` have deterministic product rules (Gauss–Legendre in the
//! rotation angle, resp. ZYZ Euler angles with the `sin(beta)` weight absorbed
//! by `u = cos(beta)`),
//! each combined with the reflection coset at weight one half. Any `p` can be
//! sampled by Monte Carlo: QR of a Gaussian matrix with the sign of the
//! `R`-diagonal pushed into `Q`, followed by a fair coin on the last column.
//!
//! Samples are generated in fixed-size chunks, chunk `c` drawing from its own
//! generator seeded with `derive_seed(seed, c)`, so results do not depend on
//! the number of worker threads.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, NilError, Result};
use crate::nilgroup::OrthMat;
use crate::quadrature::gauss_legendre;

/// Default Monte Carlo sample budget.
pub const DEFAULT_MC_SAMPLES: usize = 20_000;
/// Default angle nodes for the `O(2)` rule.
pub const DEFAULT_EXACT2_NODES: usize = 64;
/// Default angle nodes per Euler angle for the `O(3)` rule.
pub const DEFAULT_EXACT3_NODES: usize = 16;

const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadMode {
    Exact2,
    Exact3,
    MonteCarlo,
}

impl QuadMode {
    pub fn name(self) -> &'static str {
        match self {
            QuadMode::Exact2 => "exact2",
            QuadMode::Exact3 => "exact3",
            QuadMode::MonteCarlo => "montecarlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub mode: QuadMode,
    /// Angle nodes per dimension (exact modes) or sample count (Monte Carlo).
    pub nodes: usize,
    pub seed: u64,
}

impl QuadratureSpec {
    pub fn exact2(nodes: usize) -> Self {
        Self { mode: QuadMode::Exact2, nodes, seed: 0 }
    }

    pub fn exact3(nodes: usize) -> Self {
        Self { mode: QuadMode::Exact3, nodes, seed: 0 }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self { mode: QuadMode::MonteCarlo, nodes: samples, seed }
    }

    /// Exact rule for `p` in `{2, 3}`, Monte Carlo at the default budget otherwise.
    pub fn default_for(p: usize, seed: u64) -> Self {
        match p {
            2 => Self::exact2(DEFAULT_EXACT2_NODES),
            3 => Self::exact3(DEFAULT_EXACT3_NODES),
            _ => Self::monte_carlo(DEFAULT_MC_SAMPLES, seed),
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.nodes == 0 {
            return Err(invalid("quadrature needs at least one node"));
        }
        match (self.mode, p) {
            (QuadMode::Exact2, 2) | (QuadMode::Exact3, 3) | (QuadMode::MonteCarlo, _) => Ok(()),
            (mode, p) => Err(NilError::QuadratureMismatch { mode: mode.name(), p }),
        }
    }
}

/// An integral estimate with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: Complex64,
    pub err: f64,
}

impl Estimate {
    pub fn exact(value: Complex64) -> Self {
        Self { value, err: 0.0 }
    }
}

/// SplitMix64 finalizer of `(seed, index)`; used for every per-task stream.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_one(p: usize, rng: &mut ChaCha8Rng) -> OrthMat {
    let g = DMatrix::<f64>::from_fn(p, p, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if rng.random::<bool>() {
        q.column_mut(p - 1).neg_mut();
    }
    OrthMat::from_trusted(q)
}

fn sample_chunk(p: usize, seed: u64, chunk: usize, len: usize) -> Vec<OrthMat> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, chunk as u64));
    (0..len).map(|_| sample_one(p, &mut rng)).collect()
}

fn chunk_lengths(count: usize) -> Vec<usize> {
    (0..count.div_ceil(CHUNK)).map(|c| CHUNK.min(count - c * CHUNK)).collect()
}

/// `count` i.i.d. Haar samples on `O(p)`, deterministic in `seed`.
///
/// This is exactly the stream consumed by Monte Carlo integration.
pub fn haar_sample(p: usize, seed: u64, count: usize) -> Vec<OrthMat> {
    chunk_lengths(count)
        .into_par_iter()
        .enumerate()
        .flat_map_iter(|(c, len)| sample_chunk(p, seed, c, len))
        .collect()
}

fn rot2(theta: f64, reflect: bool) -> OrthMat {
    let (s, c) = theta.sin_cos();
    let m = if reflect {
        DMatrix::from_row_slice(2, 2, &[c, s, s, -c])
    } else {
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    };
    OrthMat::from_trusted(m)
}

fn exact2_rule(n: usize) -> (Vec<OrthMat>, Vec<f64>) {
    let gl = gauss_legendre(n);
    let mut ks = Vec::with_capacity(2 * n);
    let mut ws = Vec::with_capacity(2 * n);
    for reflect in [false, true] {
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            ks.push(rot2(PI * (x + 1.0), reflect));
            ws.push(0.25 * w);
        }
    }
    (ks, ws)
}

fn exact3_rule(n: usize) -> (Vec<OrthMat>, Vec<f64>) {
    let gl = gauss_legendre(n);
    let rz = |a: f64| {
        let (s, c) = a.sin_cos();
        DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
    };
    let ry = |u: f64| {
        let s = (1.0 - u * u).max(0.0).sqrt();
        DMatrix::from_row_slice(3, 3, &[u, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, u])
    };
    // Periodic angles use the equispaced rule, which is exact for trigonometric
    // polynomials of degree < n; u = cos(beta) uses Gauss–Legendre.
    let angles: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
    let wa = 1.0 / n as f64;
    let mut ks = Vec::with_capacity(2 * n * n * n);
    let mut ws = Vec::with_capacity(2 * n * n * n);
    for a in &angles {
        let ma = rz(*a);
        for (u, wu) in gl.nodes.iter().zip(&gl.weights) {
            let mab = &ma * ry(*u);
            for g in &angles {
                let k = &mab * rz(*g);
                let w = wa * wa * wu / 4.0;
                ks.push(OrthMat::from_trusted(-&k));
                ws.push(w);
                ks.push(OrthMat::from_trusted(k));
                ws.push(w);
            }
        }
    }
    (ks, ws)
}

/// A materialized integration rule over `O(p)`.
///
/// Exact modes keep a coarse companion rule with `ceil(n/2)` nodes per
/// dimension; the error estimate is the fine/coarse difference plus a
/// rounding floor. Monte Carlo keeps the samples and reports the standard
/// error `sqrt(var(Re) + var(Im)) / sqrt(n)` plus the same kind of floor.
#[derive(Debug, Clone)]
pub struct HaarRule {
    pub p: usize,
    pub mode: QuadMode,
    pub points: Vec<OrthMat>,
    pub weights: Vec<f64>,
    seed: u64,
    coarse: Option<(Vec<OrthMat>, Vec<f64>)>,
}

impl HaarRule {
    pub fn new(p: usize, spec: &QuadratureSpec) -> Result<Self> {
        spec.validate(p)?;
        let n = spec.nodes;
        let (points, weights, coarse) = match spec.mode {
            QuadMode::Exact2 => {
                let (k, w) = exact2_rule(n);
                (k, w, Some(exact2_rule(n.div_ceil(2))))
            }
            QuadMode::Exact3 => {
                let (k, w) = exact3_rule(n);
                (k, w, Some(exact3_rule(n.div_ceil(2))))
            }
            QuadMode::MonteCarlo => {
                let k = haar_sample(p, spec.seed, n);
                (k, vec![1.0 / n as f64; n], None)
            }
        };
        Ok(Self { p, mode: spec.mode, points, weights, seed: spec.seed, coarse })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates a vector-valued integrand of width `width`.
    pub fn integrate_many<F>(&self, width: usize, f: F) -> Vec<Estimate>
    where
        F: Fn(&OrthMat, &mut [Complex64]) + Sync,
    {
        let fine = weighted_sums(&self.points, &self.weights, width, &f);
        match &self.coarse {
            None => {
                let n = self.points.len();
                fine.iter().map(|s| Estimate { value: s.sum, err: s.standard_error(n) }).collect()
            }
            Some((ck, cw)) => {
                let coarse = weighted_sums(ck, cw, width, &f);
                let floor_factor = f64::EPSILON * (self.points.len() as f64).sqrt();
                fine.iter()
                    .zip(&coarse)
                    .map(|(s, c)| Estimate {
                        value: s.sum,
                        err: (s.sum - c.sum).norm() + floor_factor * s.abs_sum + f64::EPSILON,
                    })
                    .collect()
            }
        }
    }

    pub fn integrate<F>(&self, f: F) -> Estimate
    where
        F: Fn(&OrthMat) -> Complex64 + Sync,
    {
        self.integrate_many(1, |k, out| out[0] = f(k))[0]
    }

    /// `int_K int_K f(k1, k2) dk1 dk2`: tensor rule in exact modes,
    /// independent sample pairs in Monte Carlo mode.
    pub fn integrate_pairs<F>(&self, f: F) -> Estimate
    where
        F: Fn(&OrthMat, &OrthMat) -> Complex64 + Sync,
    {
        match &self.coarse {
            None => {
                let n = self.points.len();
                let second = haar_sample(self.p, derive_seed(self.seed, u64::MAX), n);
                let idx: Vec<usize> = (0..n).collect();
                let s = weighted_sums_indexed(&idx, &self.weights, 1, &|i: usize, out: &mut [Complex64]| {
                    out[0] = f(&self.points[i], &second[i])
                });
                Estimate { value: s[0].sum, err: s[0].standard_error(n) }
            }
            Some((ck, cw)) => {
                let tensor = |ks: &[OrthMat], ws: &[f64]| -> Sums {
                    let outer: Vec<Sums> = ks
                        .par_iter()
                        .zip(ws)
                        .map(|(k1, w1)| {
                            let mut acc = Sums::default();
                            for (k2, w2) in ks.iter().zip(ws) {
                                acc.add(w1 * w2, f(k1, k2));
                            }
                            acc
                        })
                        .collect();
                    outer.into_iter().fold(Sums::default(), |a, b| a.merge(&b))
                };
                let fine = tensor(&self.points, &self.weights);
                let coarse = tensor(ck, cw);
                let n = self.points.len() as f64;
                Estimate {
                    value: fine.sum,
                    err: (fine.sum - coarse.sum).norm() + f64::EPSILON * n * fine.abs_sum + f64::EPSILON,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    sum: Complex64,
    sq_re: f64,
    sq_im: f64,
    abs_sum: f64,
}

impl Sums {
    fn add(&mut self, w: f64, v: Complex64) {
        self.sum += v * w;
        self.sq_re += w * v.re * v.re;
        self.sq_im += w * v.im * v.im;
        self.abs_sum += w.abs() * v.norm();
    }

    /// For equal weights `1/n`: `sqrt((var Re + var Im) / (n - 1))`, plus a
    /// summation rounding floor.
    fn standard_error(&self, n: usize) -> f64 {
        if n < 2 {
            return self.abs_sum;
        }
        let var = (self.sq_re - self.sum.re * self.sum.re).max(0.0) + (self.sq_im - self.sum.im * self.sum.im).max(0.0);
        (var / (n - 1) as f64).sqrt() + f64::EPSILON * ((n as f64).sqrt() * self.abs_sum + 1.0)
    }

    fn merge(mut self, other: &Sums) -> Sums {
        self.sum += other.sum;
        self.sq_re += other.sq_re;
        self.sq_im += other.sq_im;
        self.abs_sum += other.abs_sum;
        self
    }
}

fn weighted_sums<F>(ks: &[OrthMat], ws: &[f64], width: usize, f: &F) -> Vec<Sums>
where
    F: Fn(&OrthMat, &mut [Complex64]) + Sync,
{
    let idx: Vec<usize> = (0..ks.len()).collect();
    weighted_sums_indexed(&idx, ws, width, &|i: usize, out: &mut [Complex64]| f(&ks[i], out))
}

fn weighted_sums_indexed<F>(idx: &[usize], ws: &[f64], width: usize, f: &F) -> Vec<Sums>
where
    F: Fn(usize, &mut [Complex64]) + Sync,
{
    let partials: Vec<Vec<Sums>> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![Sums::default(); width];
            let mut buf = vec![Complex64::new(0.0, 0.0); width];
            for &i in chunk {
                f(i, &mut buf);
                for (a, v) in acc.iter_mut().zip(&buf) {
                    a.add(ws[i], *v);
                }
            }
            acc
        })
        .collect();
    partials.into_iter().fold(vec![Sums::default(); width], |acc, part| {
        acc.iter().zip(&part).map(|(a, b)| a.merge(b)).collect()
    })
}

fn rule_cache() -> &'static Mutex<HashMap<(usize, QuadMode, usize), Arc<HaarRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, QuadMode, usize), Arc<HaarRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl HaarRule {
    /// Like [`HaarRule::new`], but deterministic rules are built once per process.
    pub fn shared(p: usize, spec: &QuadratureSpec) -> Result<Arc<HaarRule>> {
        if spec.mode == QuadMode::MonteCarlo {
            return Ok(Arc::new(HaarRule::new(p, spec)?));
        }
        spec.validate(p)?;
        let key = (p, spec.mode, spec.nodes);
        if let Some(rule) = rule_cache().lock().expect("rule cache poisoned").get(&key) {
            return Ok(rule.clone());
        }
        let rule = Arc::new(HaarRule::new(p, spec)?);
        rule_cache().lock().expect("rule cache poisoned").insert(key, rule.clone());
        Ok(rule)
    }
}

/// Estimate of `int_{O(p)} f(k) dk`.
pub fn haar_integrate<F>(f: F, p: usize, spec: &QuadratureSpec) -> Result<Estimate>
where
    F: Fn(&OrthMat) -> Complex64 + Sync,
{
    Ok(HaarRule::new(p, spec)?.integrate(f))
}
