//! Thin command-line front end over the experiment drivers.
//!
//! `psc run` executes the scenario described by a TOML config (scheme
//! sweep or sub-problem benchmarks, per the config's `mode`) and emits
//! CSV. `psc calibrate` fits the compute-cost curve and the safe
//! compression ceiling from a corpus file and prints a TOML fragment to
//! paste into a scenario. `psc oracle` cross-checks the solver against
//! the exhaustive grid reference on a small scenario.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use psc::experiments::{
    calibrate_corpus_file, fragment_to_toml, load_config, run_oracle_check,
    run_subproblem_benchmarks, run_sweep, RunMode, SweepResult,
};
use psc::Scheme;

#[derive(Parser)]
#[command(
    name = "psc",
    about = "Energy-optimal semantic communication: sweeps, calibration, and oracle checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario and emit CSV.
    Run(RunArgs),
    /// Fit the compute-cost curve and ratio ceiling from a corpus file.
    Calibrate(CalibrateArgs),
    /// Compare the solver against the exhaustive grid reference.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of seeds in the config.
    #[arg(long)]
    seeds: Option<u32>,
    /// Restrict the sweep to one scheme (rsma, sdma, noma, conventional).
    #[arg(long)]
    scheme: Option<String>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Corpus file: tab-separated `sample_id head relation tail` lines,
    /// or one JSON object per line with those fields.
    #[arg(long)]
    corpus: PathBuf,
    /// Recovery-accuracy floor the ratio ceiling must respect.
    #[arg(long, default_value_t = 0.9)]
    a_min: f64,
    /// CPU cycles charged per probability-cell evaluation.
    #[arg(long, default_value_t = 1000.0)]
    cycles_per_cell: f64,
}

#[derive(Args)]
struct OracleArgs {
    /// Scenario description (TOML); keep it small, the reference
    /// enumerates a full grid.
    #[arg(long)]
    config: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Oracle(args) => cmd_oracle(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(seeds) = args.seeds {
        anyhow::ensure!(seeds >= 1, "--seeds must be at least 1");
        cfg.sweep.seeds = seeds;
    }
    if let Some(scheme) = &args.scheme {
        // Validate the name via the scheme parser, then narrow the sweep.
        let parsed = Scheme::from_str(scheme).map_err(|e| anyhow::anyhow!(e))?;
        cfg.sweep.schemes = vec![parsed.label().to_string()];
    }
    let result: SweepResult = match cfg.mode {
        RunMode::Sweep => run_sweep(&cfg)?,
        RunMode::Subproblems => run_subproblem_benchmarks(&cfg)?,
    };
    match &args.out {
        Some(path) => {
            result.write_csv(path)?;
            let rows = result.sweep_rows.len() + result.bench_rows.len();
            eprintln!("wrote {} rows to {}", rows, path.display());
        }
        None => print!("{}", result.to_csv_string()),
    }
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let frag = calibrate_corpus_file(&args.corpus, args.a_min, args.cycles_per_cell)
        .with_context(|| format!("calibrating from {}", args.corpus.display()))?;
    print!("{}", fragment_to_toml(&frag));
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let cfg = load_config(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    let comparisons = run_oracle_check(&cfg)?;
    println!("scheme,solver_e,oracle_e,rel_gap,solver_feasible,oracle_feasible,grid_points");
    for c in comparisons {
        let gap = if c.oracle.objective > 0.0 {
            (c.solver.objective - c.oracle.objective) / c.oracle.objective
        } else {
            0.0
        };
        println!(
            "{},{},{},{},{},{},{}",
            c.scheme.label(),
            c.solver.objective,
            c.oracle.objective,
            gap,
            c.solver.feasible,
            c.oracle.feasible,
            c.points_enumerated
        );
    }
    Ok(())
}
