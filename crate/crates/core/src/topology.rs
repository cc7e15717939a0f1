//! Sequence experiments for the compact-open topology on the spectrum:
//! uniform convergence on a grid against convergence of eigenvalues and
//! parameters, completeness of limits, and approximation of type-2 functions
//! by rescaled type-1 functions.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, NilError, Result};
use crate::haar::{derive_seed, QuadratureSpec};
use crate::quotient::{grid_eval_many, spherical_residual, CompactGrid, KFunction, LabelKind, SphericalLabel};

/// Ratio to the error floor below which a distance counts as vanished.
pub const FLOOR_FACTOR: f64 = 5.0;
/// A trend counts as decaying when the final value is at most this fraction of the midpoint value.
pub const TREND_RATIO: f64 = 0.75;

pub fn sup_distance(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
}

/// Eigenvalues tracked for a type-1 label: `T = i |Lambda|` and the block
/// sublaplacians `-|Lambda| (2 l_j + m_j)`.
fn type1_eigenvalues(label: &SphericalLabel) -> Option<(f64, Vec<usize>, Vec<f64>)> {
    match label {
        SphericalLabel::Type1 { lam, l, .. } => Some((
            lam.norm,
            lam.mult.clone(),
            l.iter().zip(&lam.mult).map(|(lj, mj)| -lam.norm * (2.0 * *lj as f64 + *mj as f64)).collect(),
        )),
        SphericalLabel::Type2 { .. } => None,
    }
}

/// Max distance over the tracked eigenvalue set and `r`.
///
/// Type-1 labels with different block structures are infinitely far apart.
pub fn eig_distance(a: &SphericalLabel, b: &SphericalLabel) -> Result<f64> {
    if a.kind() != b.kind() {
        return Err(NilError::KindMismatch("eig_distance needs labels of the same type".into()));
    }
    check_dim(a.p(), b.p())?;
    let dr = (a.r() - b.r()).abs();
    match (type1_eigenvalues(a), type1_eigenvalues(b)) {
        (Some((ta, ma, la)), Some((tb, mb, lb))) => {
            if ma != mb {
                return Ok(f64::INFINITY);
            }
            let blocks = la.iter().zip(&lb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            Ok(dr.max((ta - tb).abs()).max(blocks))
        }
        _ => Ok(dr),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSequence {
    pub labels: Vec<SphericalLabel>,
    pub limit: SphericalLabel,
}

impl LabelSequence {
    pub fn new(labels: Vec<SphericalLabel>, limit: SphericalLabel) -> Result<Self> {
        if labels.is_empty() {
            return Err(invalid("a label sequence needs at least one element"));
        }
        for l in &labels {
            if l.kind() != limit.kind() {
                return Err(NilError::KindMismatch("sequence elements and limit differ in type".into()));
            }
            check_dim(limit.p(), l.p())?;
        }
        Ok(Self { labels, limit })
    }

    pub fn kind(&self) -> LabelKind {
        self.limit.kind()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentWithIff,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub sup_distances: Vec<f64>,
    pub eig_distances: Vec<f64>,
    /// Per-N error floor: max over the grid of the two quadrature errors.
    pub err_bars: Vec<f64>,
    pub sup_converges: bool,
    pub eig_converges: bool,
    pub verdict: Verdict,
}

/// Trend test for a finite sequence of distances with error bars.
///
/// The sequence is taken to converge when its final value is within
/// [`FLOOR_FACTOR`] error bars of zero, or when its second half is
/// nonincreasing (up to the error bars) and the final value is at most
/// [`TREND_RATIO`] times the value at the midpoint.
pub fn trend_converges(d: &[f64], err: &[f64]) -> bool {
    let n = d.len();
    let last = d[n - 1];
    if last <= FLOOR_FACTOR * err[n - 1] {
        return true;
    }
    if !last.is_finite() {
        return false;
    }
    let mid = (n - 1) / 2;
    let monotone = (mid..n - 1).all(|i| d[i + 1] <= d[i] + err[i] + err[i + 1]);
    monotone && last <= TREND_RATIO * d[mid]
}

impl ConvergenceReport {
    pub fn len(&self) -> usize {
        self.sup_distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sup_distances.is_empty()
    }

    /// Rows `(N, sup_distance, eig_distance, err_bar)` with `N` starting at 1.
    pub fn rows(&self) -> Vec<(usize, f64, f64, f64)> {
        (0..self.len())
            .map(|i| (i + 1, self.sup_distances[i], self.eig_distances[i], self.err_bars[i]))
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["N", "sup_distance", "eig_distance", "err_bar"])?;
        for (n, s, e, b) in self.rows() {
            w.write_record([n.to_string(), crate::report::fmt_f64(s), crate::report::fmt_f64(e), crate::report::fmt_f64(b)])?;
        }
        w.flush()
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "verdict": self.verdict,
            "sup_converges": self.sup_converges,
            "eig_converges": self.eig_converges,
            "final_sup_distance": self.sup_distances.last(),
            "final_err_bar": self.err_bars.last(),
        })
    }
}

pub fn convergence_experiment(seq: &LabelSequence, grid: &CompactGrid, spec: &QuadratureSpec) -> Result<ConvergenceReport> {
    check_dim(grid.dim(), seq.limit.p())?;
    let mut fs: Vec<KFunction> = seq.labels.iter().cloned().map(KFunction::Label).collect();
    fs.push(KFunction::Label(seq.limit.clone()));
    let values = grid_eval_many(&fs, grid, spec)?;
    let limit = values.last().expect("limit evaluated");
    let mut sup_distances = Vec::with_capacity(seq.labels.len());
    let mut err_bars = Vec::with_capacity(seq.labels.len());
    let mut eig_distances = Vec::with_capacity(seq.labels.len());
    for (label, vals) in seq.labels.iter().zip(&values) {
        let d = vals.iter().zip(limit).map(|(a, b)| (a.value - b.value).norm()).fold(0.0, f64::max);
        let e = vals.iter().zip(limit).map(|(a, b)| a.err + b.err).fold(0.0, f64::max);
        sup_distances.push(d);
        err_bars.push(e);
        eig_distances.push(eig_distance(label, &seq.limit)?);
    }
    let sup_converges = trend_converges(&sup_distances, &err_bars);
    let eig_converges = trend_converges(&eig_distances, &vec![0.0; eig_distances.len()]);
    let verdict = if sup_converges == eig_converges { Verdict::ConsistentWithIff } else { Verdict::Violation };
    Ok(ConvergenceReport { sup_distances, eig_distances, err_bars, sup_converges, eig_converges, verdict })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport {
    /// Largest functional-equation residual over the sampled pairs.
    pub max_residual: f64,
    /// Error bar at the pair attaining the largest ratio.
    pub err_at_worst: f64,
    /// Largest `residual / err` over the sampled pairs.
    pub worst_ratio: f64,
    pub pairs: usize,
}

/// Functional-equation residuals of `f` on `pairs` random pairs of grid points.
pub fn residual_scan(f: &KFunction, grid: &CompactGrid, spec: &QuadratureSpec, pairs: usize, seed: u64) -> Result<CompletenessReport> {
    if pairs == 0 {
        return Err(invalid("need at least one pair"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let mut report = CompletenessReport { max_residual: 0.0, err_at_worst: 0.0, worst_ratio: 0.0, pairs };
    for i in 0..pairs {
        let g = &grid.points[rng.random_range(0..grid.len())];
        let h = &grid.points[rng.random_range(0..grid.len())];
        let res = spherical_residual(f, g, h, &spec.with_seed(derive_seed(spec.seed, i as u64)))?;
        report.max_residual = report.max_residual.max(res.residual);
        let ratio = res.residual / res.err;
        if ratio > report.worst_ratio {
            report.worst_ratio = ratio;
            report.err_at_worst = res.err;
        }
    }
    Ok(report)
}

/// Takes the last element of a sequence as a proxy for its limit and tests the
/// spherical functional equation on it.
pub fn completeness_check(seq: &LabelSequence, grid: &CompactGrid, spec: &QuadratureSpec, pairs: usize) -> Result<CompletenessReport> {
    let proxy = KFunction::Label(seq.labels.last().expect("non-empty").clone());
    residual_scan(&proxy, grid, spec, pairs, spec.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub scales: Vec<f64>,
    pub distances: Vec<f64>,
    pub err_bars: Vec<f64>,
}

impl DensityReport {
    /// Whether the distances decrease strictly until they first come within
    /// `factor` error bars of zero.
    pub fn decreases_to_floor(&self, factor: f64) -> bool {
        for i in 0..self.distances.len() {
            if self.distances[i] <= factor * self.err_bars[i] {
                return true;
            }
            if i + 1 < self.distances.len() && self.distances[i + 1] >= self.distances[i] {
                return false;
            }
        }
        true
    }
}

/// Sup distance between the type-1 functions `(target_r, s Lambda0, l)` and the
/// type-2 function with parameter `target_r`, for each scale `s`.
pub fn density_experiment(
    target_r: f64,
    lam0: &crate::nilgroup::LambdaParams,
    scales: &[f64],
    l: &[u32],
    grid: &CompactGrid,
    spec: &QuadratureSpec,
) -> Result<DensityReport> {
    let p = grid.dim();
    let mut fs = Vec::with_capacity(scales.len() + 1);
    for s in scales {
        let lam = lam0.scaled(*s)?;
        fs.push(KFunction::Label(SphericalLabel::type1_unconstrained(p, target_r, lam, l.to_vec())?));
    }
    fs.push(KFunction::Label(SphericalLabel::type2(p, target_r)?));
    let values = grid_eval_many(&fs, grid, spec)?;
    let target = values.last().expect("target evaluated");
    let mut distances = Vec::new();
    let mut err_bars = Vec::new();
    for vals in &values[..scales.len()] {
        distances.push(vals.iter().zip(target).map(|(a, b)| (a.value - b.value).norm()).fold(0.0, f64::max));
        err_bars.push(vals.iter().zip(target).map(|(a, b)| a.err + b.err).fold(0.0, f64::max));
    }
    Ok(DensityReport { scales: scales.to_vec(), distances, err_bars })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nilgroup::spectral_params;

    fn t1(lambda: f64, l: u32) -> SphericalLabel {
        SphericalLabel::type1(2, 0.0, spectral_params(&[lambda]).unwrap(), vec![l]).unwrap()
    }

    #[test]
    fn sup_distance_basics() {
        let v = vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.0)];
        assert_eq!(sup_distance(&v, &v).unwrap(), 0.0);
        let a = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let b = [Complex64::new(0.0, 0.0); 2];
        assert_eq!(sup_distance(&a, &b).unwrap(), 1.0);
        assert!(sup_distance(&a, &b[..1]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let mut r = || (0..5).map(|_| Complex64::new(rng.random(), rng.random())).collect::<Vec<_>>();
            let (x, y, z) = (r(), r(), r());
            assert!(sup_distance(&x, &z).unwrap() <= sup_distance(&x, &y).unwrap() + sup_distance(&y, &z).unwrap() + 1e-15);
        }
    }

    #[test]
    fn eig_distance_closed_forms() {
        assert_eq!(eig_distance(&t1(1.0, 2), &t1(1.0, 2)).unwrap(), 0.0);
        for n in 1..20 {
            let h = 1.0 / n as f64;
            for l in 0..4u32 {
                let d = eig_distance(&t1(1.0 + h, l), &t1(1.0, l)).unwrap();
                let want = h.max((2 * l + 1) as f64 * h);
                assert!((d - want).abs() < 1e-12);
            }
        }
        let a = SphericalLabel::type2(2, 1.0).unwrap();
        let b = SphericalLabel::type2(2, 1.1).unwrap();
        assert!((eig_distance(&a, &b).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(eig_distance(&a, &t1(1.0, 0)), Err(NilError::KindMismatch(_))));
        let two = SphericalLabel::type1(4, 0.0, spectral_params(&[1.0, 1.0]).unwrap(), vec![0]).unwrap();
        let split = SphericalLabel::type1(4, 0.0, spectral_params(&[1.0, 0.5]).unwrap(), vec![0, 0]).unwrap();
        assert_eq!(eig_distance(&two, &split).unwrap(), f64::INFINITY);
    }

    #[test]
    fn trend_rules() {
        let zero = vec![0.0; 6];
        assert!(trend_converges(&[1.0, 0.5, 0.25, 0.12, 0.06, 0.03], &zero));
        assert!(!trend_converges(&[1.0, 0.9, 1.0, 0.9, 1.0, 0.9], &zero));
        assert!(!trend_converges(&[1.0; 6], &zero));
        assert!(trend_converges(&[0.0; 6], &zero));
        assert!(trend_converges(&[1.0, 1.0, 1.0, 0.01], &[0.01; 4]));
    }

    #[test]
    fn constant_sequence_is_all_zeros() {
        let grid = CompactGrid::orbit_slice(2, 2.0, 4).unwrap();
        let seq = LabelSequence::new(vec![t1(1.0, 1); 4], t1(1.0, 1)).unwrap();
        let rep = convergence_experiment(&seq, &grid, &QuadratureSpec::exact2(32)).unwrap();
        assert!(rep.sup_distances.iter().all(|d| *d == 0.0));
        assert!(rep.eig_distances.iter().all(|d| *d == 0.0));
        assert_eq!(rep.verdict, Verdict::ConsistentWithIff);
    }

    #[test]
    fn divergent_type2_sequence() {
        let grid = CompactGrid::orbit_slice(2, 3.0, 6).unwrap();
        let labels = (1..=8).map(|n| SphericalLabel::type2(2, 1.0 + (-1f64).powi(n)).unwrap()).collect();
        let seq = LabelSequence::new(labels, SphericalLabel::type2(2, 1.0).unwrap()).unwrap();
        let rep = convergence_experiment(&seq, &grid, &QuadratureSpec::exact2(48)).unwrap();
        assert!(!rep.sup_converges && !rep.eig_converges);
        assert_eq!(rep.verdict, Verdict::ConsistentWithIff);
        assert!(rep.sup_distances.iter().all(|d| *d > 0.3));
    }

    #[test]
    fn mixed_kinds_are_rejected() {
        assert!(LabelSequence::new(vec![t1(1.0, 0)], SphericalLabel::type2(2, 1.0).unwrap()).is_err());
        assert!(LabelSequence::new(vec![], t1(1.0, 0)).is_err());
    }

    #[test]
    fn mesh_refinement_changes_sup_distance_below_floor() {
        let spec = QuadratureSpec::monte_carlo(20_000, 3);
        let labels: Vec<_> = (1..=4).map(|n| t1(1.0 + 1.0 / (n * n) as f64, 1)).collect();
        let seq = LabelSequence::new(labels, t1(1.0, 1)).unwrap();
        let coarse = convergence_experiment(&seq, &CompactGrid::orbit_slice(2, 3.0, 12).unwrap(), &spec).unwrap();
        let fine = convergence_experiment(&seq, &CompactGrid::orbit_slice(2, 3.0, 24).unwrap(), &spec).unwrap();
        for i in 0..4 {
            assert!((coarse.sup_distances[i] - fine.sup_distances[i]).abs() < coarse.err_bars[i].max(fine.err_bars[i]));
        }
    }

    #[test]
    fn density_with_zero_target() {
        let grid = CompactGrid::orbit_slice(2, 3.0, 6).unwrap();
        let lam0 = spectral_params(&[1.0]).unwrap();
        let rep = density_experiment(0.0, &lam0, &[1.0, 0.5, 0.25, 0.125], &[0], &grid, &QuadratureSpec::exact2(48)).unwrap();
        assert!(rep.decreases_to_floor(3.0));
        // At p = 2, r = 0, l = 0 the type-1 value is cos(s a) exp(-s |X|^2 / 4).
        for (s, d) in rep.scales.iter().zip(&rep.distances) {
            let want = grid
                .points
                .iter()
                .map(|g| (1.0 - (s * g.a.upper()[0]).cos() * (-s * g.x.norm().powi(2) / 4.0).exp()).abs())
                .fold(0.0, f64::max);
            assert!((d - want).abs() < 1e-12, "s={s}: {d} vs {want}");
        }
        assert!(density_experiment(0.0, &lam0, &[0.0], &[0], &grid, &QuadratureSpec::exact2(48)).is_err());
    }

    #[test]
    fn completeness_of_true_and_corrupted_limits() {
        let grid = CompactGrid::orbit_slice(2, 2.0, 4).unwrap();
        let spec = QuadratureSpec::exact2(48);
        let seq = LabelSequence::new(vec![t1(1.0, 0); 3], t1(1.0, 0)).unwrap();
        let rep = completeness_check(&seq, &grid, &spec, 5).unwrap();
        assert!(rep.worst_ratio <= 3.0, "{rep:?}");
        let corrupted = KFunction::Scaled(Box::new(t1(1.0, 0).into()), 1.5);
        let rep = residual_scan(&corrupted, &grid, &spec, 5, 1).unwrap();
        assert!(rep.worst_ratio > 10.0);
    }
}
