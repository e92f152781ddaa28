use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gff_thinlab::cli::{run_experiment, Experiment, ExperimentConfig};
use gff_thinlab::Result;

/// Lattice GFF local-set experiments.
///
/// Exit status: 0 all criteria pass, 1 some criteria failed, 2 invalid
/// configuration or input, 3 resolution or budget violation, 4 output error.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the field and check pairing variances against the operator.
    Sample(Flags),
    /// Branching Brownian motion exploration with hitting-probability oracles.
    ExploreBbm(Flags),
    /// Field-coupled exploration with ledger identities and box counts.
    ExploreField(Flags),
    /// Moment report of the exploration observable.
    Moments(Flags),
    /// Thinness battery: deterministic sets, tail inequality, cell statistics.
    ThinnessBattery(Flags),
    /// Validate the dyadic and shifted-grid approximation schemes.
    DasValidate(Flags),
    /// Green operator scaling and cell-variance checks.
    GreenChecks(Flags),
}

#[derive(Args)]
struct Flags {
    /// Flat key = value configuration file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    /// Deepest generation or level.
    #[arg(long)]
    levels: Option<usize>,
    /// Worker threads (default: GFF_THINLAB_WORKERS, then all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Use the analytic threshold constant instead of the lattice value.
    #[arg(long)]
    strict_paper_constants: bool,
    /// Branching time scale of the BBM surrogate.
    #[arg(long = "T", alias = "t")]
    t: Option<f64>,
    /// Set description file for the thinness battery.
    #[arg(long)]
    set: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (Experiment, Flags) {
        match self {
            Command::Sample(f) => (Experiment::Sample, f),
            Command::ExploreBbm(f) => (Experiment::ExploreBbm, f),
            Command::ExploreField(f) => (Experiment::ExploreField, f),
            Command::Moments(f) => (Experiment::Moments, f),
            Command::ThinnessBattery(f) => (Experiment::ThinnessBattery, f),
            Command::DasValidate(f) => (Experiment::DasValidate, f),
            Command::GreenChecks(f) => (Experiment::GreenChecks, f),
        }
    }
}

fn config(exp: Experiment, f: Flags) -> Result<ExperimentConfig> {
    let mut cfg = match &f.config {
        Some(p) => ExperimentConfig::from_file(p, Some(exp))?,
        None => ExperimentConfig::new(exp),
    };
    let mut set = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set_key(k, &v));
    set("seed", f.seed.map(|v| v.to_string()))?;
    set("replicas", f.replicas.map(|v| v.to_string()))?;
    set("dim", f.dim.map(|v| v.to_string()))?;
    set("grid", f.grid.map(|v| v.to_string()))?;
    set("levels", f.levels.map(|v| v.to_string()))?;
    set("workers", f.workers.map(|v| v.to_string()))?;
    set("out", f.out.map(|v| v.display().to_string()))?;
    set("format", f.format)?;
    set("t", f.t.map(|v| v.to_string()))?;
    set("set", f.set.map(|v| v.display().to_string()))?;
    if f.strict_paper_constants {
        cfg.strict_paper_constants = true;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let (exp, flags) = Cli::parse().command.split();
    let outcome = config(exp, flags).and_then(|cfg| run_experiment(&cfg));
    match outcome {
        Ok(bundle) => {
            for c in &bundle.results.criteria {
                let tag = match (c.pass, c.required) {
                    (true, _) => "PASS",
                    (false, true) => "FAIL",
                    (false, false) => "info",
                };
                println!("{tag} {}: {}", c.name, c.detail);
            }
            let failed_rows = bundle
                .results
                .rows
                .iter()
                .filter(|r| r.pass() == Some(false))
                .count();
            if failed_rows > 0 {
                println!("FAIL {failed_rows} z-scored rows with |z| >= 3");
            }
            for p in &bundle.files {
                println!("wrote {}", p.display());
            }
            ExitCode::from(if bundle.all_pass { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
