//! Batch front-end: load a scenario config, run envelope fits /
//! certifications / W-bound checks / tail experiments, and emit a byte-stable
//! JSON report plus an aligned text summary.
//!
//! Exit codes: 0 all checks hold; 1 at least one check failed; 2 config or
//! schema error; 3 numerical precondition failure; 4 internal error.

mod catalog;
mod config;
mod run;

pub use config::OperatorDoc;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{load_config, ScenarioKind};

#[derive(Parser)]
#[command(name = "loewner", version, about = "Operator-inequality certificates: envelope fits, certification runs, W-bounds, and Monte-Carlo tail checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one-sided sigmoid envelopes for a scalar function on a box.
    FitEnvelope(RunArgs),
    /// Build and Loewner-check bound certificates.
    Certify(RunArgs),
    /// Compute and verify W-bound constants.
    Wbound(RunArgs),
    /// Paired Monte-Carlo tail-bound experiments.
    Tails(RunArgs),
    /// List the built-in scalar functions and g kinds.
    Catalog,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Where to write the JSON report (stdout summary is printed regardless).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides LOEWNER_SEED and the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long)]
    jobs: Option<usize>,
    /// Certificate tolerance override.
    #[arg(long)]
    tol: Option<f64>,
    /// Grid resolution override (ranges and envelope fits).
    #[arg(long)]
    grid: Option<usize>,
    /// Trial count override (wbound verification, tail experiments).
    #[arg(long)]
    trials: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Catalog => {
            print!("{}", catalog::listing());
            return ExitCode::SUCCESS;
        }
        Command::FitEnvelope(a) => (ScenarioKind::FitEnvelope, a),
        Command::Certify(a) => (ScenarioKind::Certify, a),
        Command::Wbound(a) => (ScenarioKind::Wbound, a),
        Command::Tails(a) => (ScenarioKind::Tails, a),
    };

    if let Some(jobs) = args.jobs {
        loewner_core::exec::configure_threads(jobs);
    }

    let config = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if config.kind != kind {
        eprintln!(
            "config error: subcommand expects kind `{}` but config says `{}`",
            kind.label(),
            config.kind.label()
        );
        return ExitCode::from(2);
    }

    let seed = args
        .seed
        .or_else(|| std::env::var("LOEWNER_SEED").ok().and_then(|s| s.parse().ok()))
        .or(config.seed)
        .unwrap_or(0);

    let overrides = run::Overrides {
        tol: args.tol,
        grid: args.grid,
        trials: args.trials,
    };

    let started = std::time::Instant::now();
    match run::execute(config, seed, &overrides) {
        Ok(outcome) => {
            let wall = started.elapsed();
            print!("{}", outcome.summary);
            println!("wall-time: {:.3}s", wall.as_secs_f64());
            let text = match serde_json::to_string_pretty(&outcome.report) {
                Ok(t) => t + "\n",
                Err(e) => {
                    eprintln!("internal error: report serialization failed: {e}");
                    return ExitCode::from(4);
                }
            };
            if let Some(out) = &args.out {
                if let Err(e) = std::fs::write(out, &text) {
                    eprintln!("cannot write {}: {e}", out.display());
                    return ExitCode::from(4);
                }
            }
            if outcome.report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for f in &outcome.report.failures {
                    eprintln!("FAIL: {f}");
                }
                ExitCode::from(1)
            }
        }
        Err(run::RunError::Config(e)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(run::RunError::Core(e)) if e.is_precondition() => {
            eprintln!("numerical precondition failure: {e}");
            ExitCode::from(3)
        }
        Err(run::RunError::Core(e)) => {
            eprintln!("internal error: {e}");
            ExitCode::from(4)
        }
    }
}
