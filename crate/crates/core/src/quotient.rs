//! Reduction from `F(p)` to the Heisenberg group `H^{p0}` and the bounded
//! `O(p)`-spherical functions of type 1 and type 2.
//!
//! For a central parameter with canonical values `lambda_1 >= ... > 0` the
//! projection sends `exp(X + A)` (coordinates taken in the `D2`-aligned basis) to
//!
//! ```text
//! z_j = sqrt(lambda_j / |Lambda|) (X_{2j-1} + i X_{2j}),   t = <A, D2(Lambda)> / |Lambda|
//! ```
//!
//! which is a homomorphism onto `H^{p0}` with parameter `|Lambda|`. Then
//!
//! ```text
//! type 1:  phi(n) = int_K e^{i r (k.X)_p} omega_{Lambda,l}(proj(k.n)) dk
//! type 2:  phi(n) = int_K e^{i r (k.X)_p} dk
//! ```
//!
//! where `omega_{Lambda,l}` is the block-product Laguerre function on `H^{p0}`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, NilError, Result};
use crate::haar::{derive_seed, Estimate, HaarRule, QuadMode, QuadratureSpec};
use crate::heisenberg::{HSphericalLabel, HeisenbergPoint};
use crate::laguerre::{radial_profile, MAX_DEGREE};
use crate::nilgroup::{act, canonical_form, group_mul, GroupElem, LambdaParams, OrthMat, SkewZ, VecV};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Type1,
    Type2,
}

/// A point of the Gelfand spectrum of `(O(p), F(p))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SphericalLabel {
    Type1 { p: usize, r: f64, lam: LambdaParams, l: Vec<u32> },
    Type2 { p: usize, r: f64 },
}

impl SphericalLabel {
    /// Type-1 label; `r` must vanish when `2 p0 = p`.
    pub fn type1(p: usize, r: f64, lam: LambdaParams, l: Vec<u32>) -> Result<Self> {
        if 2 * lam.p0 == p && r != 0.0 {
            return Err(invalid(format!("r must be 0 when 2 p0 = p (got r = {r})")));
        }
        Self::type1_unconstrained(p, r, lam, l)
    }

    /// Type-1 function without the `r = 0` restriction for `2 p0 = p`.
    ///
    /// The result is still a well-defined K-average, used by the density
    /// experiment, but it is not a point of the spectrum when `2 p0 = p` and `r != 0`.
    pub fn type1_unconstrained(p: usize, r: f64, lam: LambdaParams, l: Vec<u32>) -> Result<Self> {
        if p < 2 {
            return Err(invalid(format!("p must be at least 2, got {p}")));
        }
        check_dim(p / 2, lam.p_prime())?;
        if !(lam.norm > 0.0) {
            return Err(invalid("type-1 labels need |Lambda| > 0"));
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(invalid(format!("r must be finite and nonnegative, got {r}")));
        }
        check_dim(lam.p1, l.len())?;
        if let Some(bad) = l.iter().find(|l| **l > MAX_DEGREE) {
            return Err(invalid(format!("Laguerre index {bad} exceeds the supported maximum {MAX_DEGREE}")));
        }
        Ok(Self::Type1 { p, r, lam, l })
    }

    pub fn type2(p: usize, r: f64) -> Result<Self> {
        if p < 2 {
            return Err(invalid(format!("p must be at least 2, got {p}")));
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(invalid(format!("r must be finite and nonnegative, got {r}")));
        }
        Ok(Self::Type2 { p, r })
    }

    pub fn kind(&self) -> LabelKind {
        match self {
            Self::Type1 { .. } => LabelKind::Type1,
            Self::Type2 { .. } => LabelKind::Type2,
        }
    }

    pub fn p(&self) -> usize {
        match self {
            Self::Type1 { p, .. } | Self::Type2 { p, .. } => *p,
        }
    }

    pub fn r(&self) -> f64 {
        match self {
            Self::Type1 { r, .. } | Self::Type2 { r, .. } => *r,
        }
    }

    /// The Heisenberg label `omega_{Lambda,l}` carried by a type-1 label.
    pub fn heisenberg_label(&self) -> Option<HSphericalLabel> {
        match self {
            Self::Type1 { lam, l, .. } => {
                Some(HSphericalLabel::type1(lam.norm, l.clone(), lam.mult.clone()).expect("validated label"))
            }
            Self::Type2 { .. } => None,
        }
    }
}

/// The projection onto `H^{p0}` for a central direction `k D2(Lambda) k^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientMap {
    pub lam: LambdaParams,
    pub basis_rotation: OrthMat,
}

impl QuotientMap {
    /// Projection for `D2(Lambda)` itself.
    pub fn aligned(lam: LambdaParams) -> Result<Self> {
        if !(lam.norm > 0.0) {
            return Err(invalid("the projection needs |Lambda| > 0"));
        }
        let p = 2 * lam.p_prime();
        Ok(Self { lam, basis_rotation: OrthMat::identity(p.max(2)) })
    }

    /// Projection for an arbitrary nonzero central element, via its canonical form.
    pub fn from_central(a: &SkewZ) -> Result<Self> {
        let (lam, k) = canonical_form(a);
        if !(lam.norm > 0.0) {
            return Err(invalid("the projection needs a nonzero central element"));
        }
        Ok(Self { lam, basis_rotation: k })
    }

    pub fn dim(&self) -> usize {
        self.basis_rotation.dim()
    }
}

pub fn project_to_heisenberg(q: &QuotientMap, g: &GroupElem) -> Result<HeisenbergPoint> {
    let p = g.dim();
    if q.lam.p_prime() != p / 2 {
        return Err(NilError::DimensionMismatch { expected: 2 * q.lam.p_prime(), got: p });
    }
    let rotation = if q.dim() == p { q.basis_rotation.clone() } else { OrthMat::identity(p) };
    let aligned = act(&rotation.transpose(), g)?;
    let x = aligned.x.as_slice();
    let norm = q.lam.norm;
    let mut z = Vec::with_capacity(q.lam.p0);
    let mut t = 0.0;
    for (j, lj) in q.lam.lambdas.iter().take(q.lam.p0).enumerate() {
        let c = (lj / norm).sqrt();
        z.push(Complex64::new(c * x[2 * j], c * x[2 * j + 1]));
        t += lj * aligned.a.get(2 * j, 2 * j + 1);
    }
    HeisenbergPoint::new(z, t / norm, q.lam.mult.clone())
}

/// A K-averaged function `phi(n) = int_K F(k, n) dk`.
///
/// Besides the spectrum labels this covers rescaled and averaged combinations,
/// which are K-invariant but in general not spherical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KFunction {
    Label(SphericalLabel),
    Scaled(Box<KFunction>, f64),
    Average(Vec<KFunction>),
}

impl From<SphericalLabel> for KFunction {
    fn from(label: SphericalLabel) -> Self {
        KFunction::Label(label)
    }
}

impl KFunction {
    pub fn p(&self) -> usize {
        match self {
            KFunction::Label(l) => l.p(),
            KFunction::Scaled(f, _) => f.p(),
            KFunction::Average(fs) => fs.first().map(|f| f.p()).unwrap_or(2),
        }
    }

    fn validate(&self) -> Result<()> {
        if let KFunction::Average(fs) = self {
            let first = fs.first().ok_or_else(|| invalid("cannot average zero functions"))?;
            for f in fs {
                check_dim(first.p(), f.p())?;
                f.validate()?;
            }
        }
        if let KFunction::Scaled(f, _) = self {
            f.validate()?;
        }
        Ok(())
    }

    /// The integrand `F(k, n)`; allocation-free for labels.
    pub fn integrand(&self, k: &OrthMat, g: &GroupElem) -> Complex64 {
        match self {
            KFunction::Label(label) => label_integrand(label, k, g),
            KFunction::Scaled(f, s) => f.integrand(k, g) * *s,
            KFunction::Average(fs) => {
                fs.iter().map(|f| f.integrand(k, g)).sum::<Complex64>() / fs.len() as f64
            }
        }
    }
}

#[inline]
fn label_integrand(label: &SphericalLabel, k: &OrthMat, g: &GroupElem) -> Complex64 {
    let x = g.x.as_slice();
    match label {
        SphericalLabel::Type2 { p, r } => {
            if *r == 0.0 {
                return Complex64::new(1.0, 0.0);
            }
            Complex64::from_polar(1.0, r * k.apply_row(p - 1, x))
        }
        SphericalLabel::Type1 { p, r, lam, l } => {
            let mut phase = if *r == 0.0 { 0.0 } else { r * k.apply_row(p - 1, x) };
            let mut radial = 1.0;
            let mut i = 0;
            for (mj, lj) in lam.mult.iter().zip(l) {
                let mut sq = 0.0;
                for _ in 0..*mj {
                    let li = lam.lambdas[i];
                    let u = k.apply_row(2 * i, x);
                    let v = k.apply_row(2 * i + 1, x);
                    sq += li * (u * u + v * v);
                    // |Lambda| t = sum lambda_i (k A k^T)_{2i-1, 2i}
                    phase += li * k.conj_entry(&g.a, 2 * i, 2 * i + 1);
                    i += 1;
                }
                radial *= radial_profile(*lj, *mj, sq);
            }
            Complex64::from_polar(radial, phase)
        }
    }
}

fn check_point(f: &KFunction, g: &GroupElem) -> Result<()> {
    f.validate()?;
    check_dim(f.p(), g.dim())
}

/// `phi(g)` with its quadrature error.
pub fn spherical_value(f: &KFunction, g: &GroupElem, spec: &QuadratureSpec) -> Result<Estimate> {
    check_point(f, g)?;
    let rule = HaarRule::shared(f.p(), spec)?;
    Ok(rule.integrate(|k| f.integrand(k, g)))
}

pub fn type1_spherical(label: &SphericalLabel, g: &GroupElem, spec: &QuadratureSpec) -> Result<Estimate> {
    if label.kind() != LabelKind::Type1 {
        return Err(NilError::KindMismatch("type1_spherical needs a type-1 label".into()));
    }
    spherical_value(&KFunction::Label(label.clone()), g, spec)
}

pub fn type2_spherical(label: &SphericalLabel, g: &GroupElem, spec: &QuadratureSpec) -> Result<Estimate> {
    if label.kind() != LabelKind::Type2 {
        return Err(NilError::KindMismatch("type2_spherical needs a type-2 label".into()));
    }
    spherical_value(&KFunction::Label(label.clone()), g, spec)
}

/// Result of the functional-equation test for one pair `(g, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// `|int_K phi(g . k.h) dk - phi(g) phi(h)|`.
    pub residual: f64,
    /// Propagated quadrature error of the two sides.
    pub err: f64,
}

/// `|int_K phi(g . act(k, h)) dk - phi(g) phi(h)|`, with linear error propagation
/// `err = err_avg + |phi(g)| err_h + |phi(h)| err_g + err_g err_h`.
pub fn spherical_residual(f: &KFunction, g: &GroupElem, h: &GroupElem, spec: &QuadratureSpec) -> Result<Residual> {
    check_point(f, g)?;
    check_dim(g.dim(), h.dim())?;
    let p = f.p();
    let rule_for = |i: u64| -> Result<std::sync::Arc<HaarRule>> {
        HaarRule::shared(p, &spec.with_seed(derive_seed(spec.seed, i)))
    };
    let phi_g = rule_for(0)?.integrate(|k| f.integrand(k, g));
    let phi_h = rule_for(1)?.integrate(|k| f.integrand(k, h));
    let avg = rule_for(2)?.integrate_pairs(|k1, k2| {
        let n = group_mul(g, &act(k1, h).expect("dimensions checked")).expect("dimensions checked");
        f.integrand(k2, &n)
    });
    let residual = (avg.value - phi_g.value * phi_h.value).norm();
    let err = avg.err + phi_g.value.norm() * phi_h.err + phi_h.value.norm() * phi_g.err + phi_g.err * phi_h.err;
    Ok(Residual { residual, err })
}

/// A finite evaluation set standing in for a compact subset of `F(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactGrid {
    pub description: String,
    pub points: Vec<GroupElem>,
}

#[derive(Serialize, Deserialize)]
struct GridDoc {
    description: String,
    points: Vec<(Vec<f64>, Vec<f64>)>,
}

impl CompactGrid {
    pub fn new(description: impl Into<String>, points: Vec<GroupElem>) -> Result<Self> {
        let first = points.first().ok_or_else(|| invalid("a grid needs at least one point"))?;
        let p = first.dim();
        for g in &points {
            check_dim(p, g.dim())?;
        }
        Ok(Self { description: description.into(), points })
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Lattice points with spacing `radius / per_axis` inside the coordinate ball.
    pub fn ball(p: usize, radius: f64, per_axis: usize) -> Result<Self> {
        if p < 2 || per_axis == 0 || !(radius > 0.0) {
            return Err(invalid("ball grid needs p >= 2, radius > 0 and per_axis >= 1"));
        }
        let d = p + p * (p - 1) / 2;
        let h = radius / per_axis as f64;
        let side = 2 * per_axis + 1;
        let total = side.checked_pow(d as u32).ok_or_else(|| invalid("ball grid too large"))?;
        if total > 5_000_000 {
            return Err(invalid("ball grid too large"));
        }
        let mut points = Vec::new();
        let mut coords = vec![0.0; d];
        for mut idx in 0..total {
            for c in coords.iter_mut() {
                *c = ((idx % side) as f64 - per_axis as f64) * h;
                idx /= side;
            }
            if coords.iter().map(|c| c * c).sum::<f64>() <= radius * radius * (1.0 + 1e-12) {
                points.push(GroupElem::from_coords(p, &coords)?);
            }
        }
        Self::new(format!("ball radius {radius}, mesh {h}, p = {p}"), points)
    }

    /// Points `x X_1 + a [X_1, X_2]`-slice: `X = x e_1`, `A_{12} = a`, with
    /// `x, a >= 0` on a lattice inside the quarter disc of the given radius.
    ///
    /// For `p = 2` every point of `F(2)` is K-conjugate to such a point up to
    /// the sign of `a`, and all spherical functions are even in `a`.
    pub fn orbit_slice(p: usize, radius: f64, per_axis: usize) -> Result<Self> {
        if p < 2 || per_axis == 0 || !(radius > 0.0) {
            return Err(invalid("orbit slice needs p >= 2, radius > 0 and per_axis >= 1"));
        }
        let h = radius / per_axis as f64;
        let mut points = Vec::new();
        for i in 0..=per_axis {
            for j in 0..=per_axis {
                let (x, a) = (i as f64 * h, j as f64 * h);
                if x * x + a * a <= radius * radius * (1.0 + 1e-12) {
                    let mut xv = vec![0.0; p];
                    xv[0] = x;
                    let mut au = vec![0.0; p * (p - 1) / 2];
                    au[0] = a;
                    points.push(GroupElem::from_parts(xv, au)?);
                }
            }
        }
        Self::new(format!("orbit slice radius {radius}, mesh {h}, p = {p}"), points)
    }

    /// `count` uniform points of the coordinate ball plus the identity.
    pub fn random_ball(p: usize, radius: f64, count: usize, seed: u64) -> Result<Self> {
        let d = p + p * (p - 1) / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
        let mut points = vec![GroupElem::identity(p)];
        while points.len() < count + 1 {
            let c: Vec<f64> = (0..d).map(|_| rng.random_range(-radius..radius)).collect();
            if c.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
                points.push(GroupElem::from_coords(p, &c)?);
            }
        }
        Self::new(format!("{count} random points in ball radius {radius}, p = {p}"), points)
    }

    pub fn to_json(&self) -> String {
        let doc = GridDoc {
            description: self.description.clone(),
            points: self.points.iter().map(|g| (g.x.as_slice().to_vec(), g.a.upper().to_vec())).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("grid serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GridDoc = serde_json::from_str(text).map_err(|e| invalid(format!("grid JSON: {e}")))?;
        let points = doc
            .points
            .into_iter()
            .map(|(x, a)| GroupElem::from_parts(x, a))
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.description, points)
    }
}

/// Values of several functions on a grid, `out[f][point]`.
///
/// All functions share the quadrature nodes at a given point; Monte Carlo
/// seeds are derived per point, so results are deterministic and independent
/// of scheduling.
pub fn grid_eval_many(fs: &[KFunction], grid: &CompactGrid, spec: &QuadratureSpec) -> Result<Vec<Vec<Estimate>>> {
    let p = grid.dim();
    for f in fs {
        f.validate()?;
        check_dim(p, f.p())?;
    }
    spec.validate(p)?;
    let shared = if spec.mode == QuadMode::MonteCarlo { None } else { Some(HaarRule::shared(p, spec)?) };
    let per_point: Vec<Vec<Estimate>> = grid
        .points
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let rule = match &shared {
                Some(r) => r.clone(),
                None => std::sync::Arc::new(
                    HaarRule::new(p, &spec.with_seed(derive_seed(spec.seed, i as u64))).expect("validated spec"),
                ),
            };
            rule.integrate_many(fs.len(), |k, out| {
                for (o, f) in out.iter_mut().zip(fs) {
                    *o = f.integrand(k, g);
                }
            })
        })
        .collect();
    Ok((0..fs.len()).map(|j| per_point.iter().map(|row| row[j]).collect()).collect())
}

pub fn grid_eval(label: &SphericalLabel, grid: &CompactGrid, spec: &QuadratureSpec) -> Result<Vec<Estimate>> {
    Ok(grid_eval_many(&[KFunction::Label(label.clone())], grid, spec)?.remove(0))
}

/// A random element of the stabilizer of `r X_p + D2(Lambda)`: unitary blocks
/// on each eigenspace of `D2(Lambda)` (realified with the complex structure of
/// `J`) and an orthogonal block on the kernel, which fixes `X_p` when `r != 0`.
pub fn stabilizer_sample(lam: &LambdaParams, p: usize, r: f64, seed: u64) -> OrthMat {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let mut m = nalgebra::DMatrix::<f64>::zeros(p, p);
    let mut start = 0;
    for &mj in &lam.mult {
        let u = crate::heisenberg::unitary_sample(mj, &mut rng);
        for a in 0..mj {
            for b in 0..mj {
                let (re, im) = (u[(a, b)].re, u[(a, b)].im);
                let (ra, cb) = (2 * (start + a), 2 * (start + b));
                m[(ra, cb)] = re;
                m[(ra, cb + 1)] = -im;
                m[(ra + 1, cb)] = im;
                m[(ra + 1, cb + 1)] = re;
            }
        }
        start += mj;
    }
    let kernel_start = 2 * lam.p0;
    let kernel_end = if r != 0.0 { p - 1 } else { p };
    let kd = kernel_end - kernel_start;
    if kd > 0 {
        let o = crate::haar::haar_sample(kd, rng.random(), 1).remove(0);
        for a in 0..kd {
            for b in 0..kd {
                m[(kernel_start + a, kernel_start + b)] = o.matrix()[(a, b)];
            }
        }
    }
    if kernel_end < p {
        m[(p - 1, p - 1)] = 1.0;
    }
    OrthMat::new(m).expect("block construction is orthogonal")
}

/// `r X_p + D2(Lambda)` as a pair `(vector, central)`.
pub fn dual_point(lam: &LambdaParams, p: usize, r: f64) -> Result<(VecV, SkewZ)> {
    let mut x = vec![0.0; p];
    x[p - 1] = r;
    Ok((VecV::new(x)?, crate::nilgroup::d2(&lam.lambdas, p)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heisenberg::{h_mul, type1_value};
    use crate::nilgroup::{d2, spectral_params};
    use std::f64::consts::PI;

    fn random_elem(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> GroupElem {
        let d = p + p * (p - 1) / 2;
        let c: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..scale)).collect();
        GroupElem::from_coords(p, &c).unwrap()
    }

    fn random_lambda(rng: &mut ChaCha8Rng, p: usize) -> LambdaParams {
        let mut l: Vec<f64> = (0..p / 2).map(|_| rng.random_range(0.2..2.0)).collect();
        l.sort_by(|a, b| b.total_cmp(a));
        spectral_params(&l).unwrap()
    }

    #[test]
    fn projection_examples() {
        let lam = spectral_params(&[1.0]).unwrap();
        let q = QuotientMap::aligned(lam).unwrap();
        let g = GroupElem::from_parts(vec![0.3, -1.2], vec![0.0]).unwrap();
        let h = project_to_heisenberg(&q, &g).unwrap();
        assert_eq!(h.z, vec![Complex64::new(0.3, -1.2)]);
        assert_eq!(h.t, 0.0);

        let g = GroupElem::new(VecV::zeros(2), d2(&[1.0], 2).unwrap().scale(0.7)).unwrap();
        let h = project_to_heisenberg(&q, &g).unwrap();
        assert!(h.z[0].norm() == 0.0 && (h.t - 0.7).abs() < 1e-15);
        assert!(QuotientMap::aligned(spectral_params(&[0.0]).unwrap()).is_err());
    }

    #[test]
    fn projection_is_a_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in 2..=5 {
            for _ in 0..100 {
                let q = QuotientMap::aligned(random_lambda(&mut rng, p)).unwrap();
                let (g, h) = (random_elem(&mut rng, p, 2.0), random_elem(&mut rng, p, 2.0));
                let lhs = project_to_heisenberg(&q, &group_mul(&g, &h).unwrap()).unwrap();
                let rhs =
                    h_mul(&project_to_heisenberg(&q, &g).unwrap(), &project_to_heisenberg(&q, &h).unwrap()).unwrap();
                assert!((lhs.t - rhs.t).abs() < 1e-10);
                for (a, b) in lhs.z.iter().zip(&rhs.z) {
                    assert!((a - b).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn projection_for_rotated_central_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = 4;
        let k = crate::haar::haar_sample(p, 3, 1).remove(0);
        let base = GroupElem::new(VecV::zeros(p), d2(&[1.5, 0.5], p).unwrap()).unwrap();
        let a = act(&k, &base).unwrap().a;
        let q = QuotientMap::from_central(&a).unwrap();
        assert!((q.lam.lambdas[0] - 1.5).abs() < 1e-12 && (q.lam.lambdas[1] - 0.5).abs() < 1e-12);
        for _ in 0..20 {
            let (g, h) = (random_elem(&mut rng, p, 1.5), random_elem(&mut rng, p, 1.5));
            let lhs = project_to_heisenberg(&q, &group_mul(&g, &h).unwrap()).unwrap();
            let rhs = h_mul(&project_to_heisenberg(&q, &g).unwrap(), &project_to_heisenberg(&q, &h).unwrap()).unwrap();
            assert!((lhs.t - rhs.t).abs() < 1e-10);
        }
        // The central direction itself projects onto the t-axis with t = |Lambda|.
        let centre = GroupElem::new(VecV::zeros(p), a).unwrap();
        let t = project_to_heisenberg(&q, &centre).unwrap().t;
        assert!((t - (1.5f64.powi(2) + 0.25).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn label_constraints() {
        let lam = spectral_params(&[1.0]).unwrap();
        assert!(SphericalLabel::type1(2, 0.5, lam.clone(), vec![0]).is_err());
        assert!(SphericalLabel::type1_unconstrained(2, 0.5, lam.clone(), vec![0]).is_ok());
        assert!(SphericalLabel::type1(3, 0.5, lam.clone(), vec![0]).is_ok());
        assert!(SphericalLabel::type1(2, 0.0, spectral_params(&[0.0]).unwrap(), vec![]).is_err());
        assert!(SphericalLabel::type1(2, 0.0, lam, vec![0, 1]).is_err());
        assert!(SphericalLabel::type2(3, -1.0).is_err());
    }

    #[test]
    fn identity_gives_one() {
        let g = GroupElem::identity(3);
        let lam = spectral_params(&[1.2]).unwrap();
        for label in [SphericalLabel::type1(3, 0.7, lam, vec![2]).unwrap(), SphericalLabel::type2(3, 1.3).unwrap()] {
            let v = spherical_value(&label.into(), &g, &QuadratureSpec::exact3(8)).unwrap();
            assert!((v.value - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        }
        let grid = CompactGrid::new("identity", vec![GroupElem::identity(2)]).unwrap();
        let v = grid_eval(&SphericalLabel::type2(2, 2.0).unwrap(), &grid, &QuadratureSpec::exact2(32)).unwrap();
        assert!((v[0].value - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn central_elements_are_fixed_by_type2() {
        let g = GroupElem::from_parts(vec![0.0; 3], vec![0.5, -1.0, 2.0]).unwrap();
        let v = type2_spherical(&SphericalLabel::type2(3, 1.7).unwrap(), &g, &QuadratureSpec::exact3(8)).unwrap();
        assert!((v.value - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        let v = type2_spherical(&SphericalLabel::type2(3, 0.0).unwrap(), &random_elem(&mut ChaCha8Rng::seed_from_u64(1), 3, 2.0), &QuadratureSpec::exact3(8)).unwrap();
        assert!((v.value - Complex64::new(1.0, 0.0)).norm() < 1e-13);
    }

    /// `J_0` by its power series; accurate for the arguments used here.
    fn bessel_j0(x: f64) -> f64 {
        let q = 0.25 * x * x;
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 1..200 {
            term *= -q / (k * k) as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn p2_type2_is_bessel() {
        let label = SphericalLabel::type2(2, 1.3).unwrap();
        for (x1, x2, a) in [(0.5, 0.0, 0.0), (1.0, -2.0, 0.4), (2.5, 1.5, -1.0)] {
            let g = GroupElem::from_parts(vec![x1, x2], vec![a]).unwrap();
            let want = bessel_j0(1.3 * f64::hypot(x1, x2));
            let v = type2_spherical(&label, &g, &QuadratureSpec::exact2(64)).unwrap();
            assert!((v.value.re - want).abs() <= 3.0 * v.err.max(1e-14) && v.value.im.abs() < 1e-13);
            let mc = type2_spherical(&label, &g, &QuadratureSpec::monte_carlo(20_000, 9)).unwrap();
            assert!((mc.value.re - want).abs() <= 3.0 * mc.err);
        }
    }

    #[test]
    fn p3_type2_is_sinc() {
        let label = SphericalLabel::type2(3, 0.9).unwrap();
        let g = GroupElem::from_parts(vec![1.0, -0.5, 2.0], vec![0.3, 0.1, -0.2]).unwrap();
        let s = 0.9 * g.x.norm();
        let v = type2_spherical(&label, &g, &QuadratureSpec::exact3(16)).unwrap();
        assert!((v.value.re - s.sin() / s).abs() < 1e-10);
    }

    #[test]
    fn p2_type1_matches_circle_average() {
        // Independent route: average the Heisenberg closed form over rotations and reflections.
        let lam = spectral_params(&[1.4]).unwrap();
        let hl = HSphericalLabel::type1(1.4, vec![2], vec![1]).unwrap();
        let label = SphericalLabel::type1(2, 0.0, lam, vec![2]).unwrap();
        let rule = crate::quadrature::gauss_legendre(40).mapped(0.0, 2.0 * PI);
        for (x1, x2, a) in [(0.3, 0.4, 0.5), (-1.0, 1.5, -0.8), (2.0, 0.0, 2.0)] {
            let g = GroupElem::from_parts(vec![x1, x2], vec![a]).unwrap();
            let mut want = Complex64::new(0.0, 0.0);
            for (th, w) in rule.nodes.iter().zip(&rule.weights) {
                let z = Complex64::from_polar(f64::hypot(x1, x2), *th);
                for sign in [1.0, -1.0] {
                    let h = HeisenbergPoint::single_block(vec![z], sign * a);
                    want += type1_value(&hl, &h).unwrap() * (w / (4.0 * PI));
                }
            }
            let v = type1_spherical(&label, &g, &QuadratureSpec::exact2(64)).unwrap();
            assert!((v.value - want).norm() <= 3.0 * v.err.max(1e-14), "{:?} vs {want}", v.value);
        }
    }

    #[test]
    fn k_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lam = spectral_params(&[1.1]).unwrap();
        let label = SphericalLabel::type1(3, 0.8, lam, vec![1]).unwrap();
        let spec = QuadratureSpec::exact3(16);
        for i in 0..5 {
            let g = random_elem(&mut rng, 3, 1.5);
            let k0 = crate::haar::haar_sample(3, i, 1).remove(0);
            let a = type1_spherical(&label, &g, &spec).unwrap();
            let b = type1_spherical(&label, &act(&k0, &g).unwrap(), &spec).unwrap();
            assert!((a.value - b.value).norm() <= 3.0 * (a.err + b.err));
        }
    }

    #[test]
    fn grid_values_are_bounded_and_deterministic() {
        let lam = spectral_params(&[0.9]).unwrap();
        let label = SphericalLabel::type1(3, 1.2, lam, vec![0]).unwrap();
        let grid = CompactGrid::random_ball(3, 2.0, 12, 5).unwrap();
        let spec = QuadratureSpec::monte_carlo(4000, 17);
        let a = grid_eval(&label, &grid, &spec).unwrap();
        let b = grid_eval(&label, &grid, &spec).unwrap();
        assert_eq!(a, b);
        for e in &a {
            assert!(e.value.norm() <= 1.0 + 3.0 * e.err);
        }
    }

    #[test]
    fn residual_vanishes_for_labels_and_not_for_averages() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = QuadratureSpec::exact2(48);
        let lam = spectral_params(&[1.0]).unwrap();
        let labels = [SphericalLabel::type1(2, 0.0, lam, vec![1]).unwrap(), SphericalLabel::type2(2, 1.5).unwrap()];
        for label in &labels {
            for _ in 0..5 {
                let (g, h) = (random_elem(&mut rng, 2, 1.5), random_elem(&mut rng, 2, 1.5));
                let res = spherical_residual(&label.clone().into(), &g, &h, &spec).unwrap();
                assert!(res.residual <= 3.0 * res.err, "{res:?}");
            }
        }
        let avg = KFunction::Average(vec![
            SphericalLabel::type2(2, 0.5).unwrap().into(),
            SphericalLabel::type2(2, 2.0).unwrap().into(),
        ]);
        let g = GroupElem::from_parts(vec![1.0, 0.0], vec![0.0]).unwrap();
        let h = GroupElem::from_parts(vec![0.0, 1.5], vec![0.0]).unwrap();
        let res = spherical_residual(&avg, &g, &h, &spec).unwrap();
        assert!(res.residual > 10.0 * res.err, "{res:?}");
        let res = spherical_residual(&avg, &GroupElem::identity(2), &GroupElem::identity(2), &spec).unwrap();
        assert!(res.residual < 1e-13);
    }

    #[test]
    fn stabilizer_fixes_dual_point() {
        for (lams, p, r) in [(vec![2.0, 2.0, 1.0], 7, 0.8), (vec![1.0, 0.0], 5, 0.0), (vec![1.5, 1.5], 4, 0.0)] {
            let lam = spectral_params(&lams).unwrap();
            let (x, a) = dual_point(&lam, p, r).unwrap();
            let g = GroupElem::new(x, a).unwrap();
            for seed in 0..5 {
                let k = stabilizer_sample(&lam, p, r, seed);
                let kg = act(&k, &g).unwrap();
                for (u, v) in kg.coords().iter().zip(g.coords()) {
                    assert!((u - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn grid_json_round_trip() {
        let grid = CompactGrid::orbit_slice(3, 2.0, 3).unwrap();
        let back = CompactGrid::from_json(&grid.to_json()).unwrap();
        assert_eq!(grid, back);
        assert!(CompactGrid::from_json(r#"{"description": "x", "points": []}"#).is_err());
        let ball = CompactGrid::ball(2, 1.0, 2).unwrap();
        assert!(ball.points.iter().all(|g| g.coords().iter().map(|c| c * c).sum::<f64>() <= 1.0 + 1e-12));
        assert!(ball.points.contains(&GroupElem::identity(2)));
    }
}
