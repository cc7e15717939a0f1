//! Runs every acceptance criterion at its stated tolerance and prints one
//! pass/fail line per criterion.

use std::collections::HashMap;
use std::io::Write;
use std::time::{Duration, Instant};

use nilspec::experiments::{run_experiment, Experiment, RunConfig};
use nilspec::report::{Check, ExperimentReport};

struct Criterion {
    number: usize,
    title: &'static str,
    experiment: Experiment,
    /// Check-name prefixes belonging to this criterion; empty means all.
    checks: &'static [&'static str],
    limit: Duration,
}

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

const CORE: &[&str] = &[
    "bracket antisymmetry",
    "bracket equivariance",
    "pairing",
    "group associativity",
    "O(p) acts by automorphisms",
];

fn criteria() -> Vec<Criterion> {
    use Experiment::*;
    vec![
        Criterion { number: 1, title: "core identities", experiment: CoreIdentities, checks: CORE, limit: secs(5) },
        Criterion { number: 2, title: "canonical form", experiment: CoreIdentities, checks: &["canonical"], limit: secs(10) },
        Criterion {
            number: 3,
            title: "Heisenberg series vs closed form, coefficient sign law and bound",
            experiment: HeisenbergOracle,
            checks: &["series", "coefficient", "Taylor"],
            limit: secs(30),
        },
        Criterion { number: 4, title: "finite-difference eigenvalues", experiment: HeisenbergOracle, checks: &["finite-difference"], limit: secs(30) },
        Criterion { number: 5, title: "Heisenberg projection homomorphism", experiment: CoreIdentities, checks: &["projection"], limit: secs(5) },
        Criterion { number: 6, title: "spectrum membership", experiment: SpectrumEval, checks: &[], limit: secs(300) },
        Criterion { number: 7, title: "convergence iff eigenvalue convergence", experiment: Convergence, checks: &[], limit: secs(600) },
        Criterion { number: 8, title: "completeness", experiment: Completeness, checks: &[], limit: secs(120) },
        Criterion { number: 9, title: "density of type 1 near type 2", experiment: Density, checks: &[], limit: secs(300) },
        Criterion { number: 10, title: "Plancherel at p = 2, c = 1", experiment: Plancherel, checks: &[], limit: secs(600) },
        Criterion { number: 11, title: "Fourier suite at d = 3", experiment: FourierSuite, checks: &[], limit: secs(120) },
    ]
}

fn selected<'a>(rep: &'a ExperimentReport, prefixes: &[&str]) -> Vec<&'a Check> {
    rep.checks.iter().filter(|c| prefixes.is_empty() || prefixes.iter().any(|p| c.name.starts_with(p))).collect()
}

#[test]
fn acceptance_criteria() {
    let mut runs: HashMap<Experiment, (ExperimentReport, Duration)> = HashMap::new();
    let mut out = std::io::stdout().lock();
    let mut failed = Vec::new();
    for c in criteria() {
        let (rep, elapsed) = runs
            .entry(c.experiment)
            .or_insert_with(|| {
                let start = Instant::now();
                let rep = run_experiment(&RunConfig::new(c.experiment)).expect("experiment runs");
                (rep, start.elapsed())
            })
            .clone();
        let checks = selected(&rep, c.checks);
        assert!(!checks.is_empty(), "criterion {} selects no checks", c.number);
        let in_time = elapsed <= c.limit;
        let pass = in_time && checks.iter().all(|k| k.pass);
        let worst = checks
            .iter()
            .find(|k| !k.pass)
            .map(|k| format!("; failing: {} = {:e} vs {:e}", k.name, k.measured, k.tolerance))
            .unwrap_or_default();
        writeln!(
            out,
            "criterion {:>2} {} {} (checks: {}, {:.1}s of {}s){}",
            c.number,
            if pass { "PASS" } else { "FAIL" },
            c.title,
            checks.len(),
            elapsed.as_secs_f64(),
            c.limit.as_secs(),
            worst
        )
        .unwrap();
        if !pass {
            failed.push(c.number);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
