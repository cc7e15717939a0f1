//! `nilspec run <experiment>` and `nilspec list`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nilspec::experiments::{run_experiment, Experiment, RunConfig};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "nilspec", version, about = "Experiments on spherical functions of the free two-step nilpotent group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write `<out>/<experiment>.csv` and `.summary.json`.
    Run {
        /// Experiment name; may instead come from the config file.
        experiment: Option<String>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        budget: Option<usize>,
        /// Existing output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON config with the same fields; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List the experiments with their default budgets.
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    experiment: Option<String>,
    p: Option<usize>,
    seed: Option<u64>,
    budget: Option<usize>,
    output_dir: Option<PathBuf>,
}

fn configure_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("NILSPEC_THREADS") {
        let n: usize = v.parse().map_err(|_| format!("NILSPEC_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            return Err("NILSPEC_THREADS must be positive".into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn list(json: bool) {
    let p = 2;
    if json {
        let rows: Vec<_> = Experiment::ALL
            .iter()
            .map(|e| {
                serde_json::json!({
                    "name": e.name(),
                    "statement": e.statement(),
                    "default_budget": e.default_budget(p),
                    "budget": e.budget_meaning(),
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows).expect("serializable"));
        return;
    }
    println!("{:<18} {:>8}  {:<34}  statement", "experiment", "budget", "budget unit");
    for e in Experiment::ALL {
        println!("{:<18} {:>8}  {:<34}  {}", e.name(), e.default_budget(p), e.budget_meaning(), e.statement());
    }
}

struct Job {
    cfg: RunConfig,
    out: PathBuf,
}

fn resolve(
    experiment: Option<String>,
    p: Option<usize>,
    seed: Option<u64>,
    budget: Option<usize>,
    out: Option<PathBuf>,
    config: Option<PathBuf>,
) -> Result<Job, String> {
    let file: FileConfig = match &config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let name = experiment.or(file.experiment).ok_or("no experiment given")?;
    let experiment = Experiment::from_name(&name).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::new(experiment);
    cfg.p = p.or(file.p).unwrap_or(cfg.p);
    cfg.seed = seed.or(file.seed).unwrap_or(cfg.seed);
    cfg.budget = budget.or(file.budget);
    cfg.validate().map_err(|e| e.to_string())?;
    let out = out.or(file.output_dir).ok_or("no output directory given (--out)")?;
    if !out.is_dir() {
        return Err(format!("output directory {} does not exist", out.display()));
    }
    Ok(Job { cfg, out })
}

fn run(job: Job) -> Result<bool, String> {
    let rep = run_experiment(&job.cfg).map_err(|e| e.to_string())?;
    let name = job.cfg.experiment.name();
    let write = |path: &Path, bytes: &[u8]| fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()));
    write(&job.out.join(format!("{name}.csv")), rep.csv_string().as_bytes())?;
    let summary = serde_json::to_string_pretty(&rep.summary_json()).expect("serializable");
    write(&job.out.join(format!("{name}.summary.json")), summary.as_bytes())?;
    for c in &rep.checks {
        println!("{} {}: {:e} (tolerance {:e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.measured, c.tolerance);
    }
    Ok(rep.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::List { json } => {
            list(json);
            ExitCode::SUCCESS
        }
        Command::Run { experiment, p, seed, budget, out, config } => {
            match resolve(experiment, p, seed, budget, out, config).and_then(run) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(1),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
