//! Command-line front end for the aggregation harness.
//!
//! Subcommands:
//!
//! - `simulate`: write one synthetic benchmark dataset as CSV.
//! - `run`     : run a replicated experiment from a JSON config and emit
//!   the result table (results are byte-identical for a fixed config+seed).
//! - `time`    : gradient descent vs grid search on one shared objective.
//! - `validate`: run the oracle-equivalence property suites.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when the
//! replication failure threshold is exceeded (or a property suite fails),
//! 1 otherwise.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use kcagg::datagen::{Regime, SyntheticModelId};
use kcagg::harness::{
    emit_results, render_results, run_all_checks, run_experiment, time_optimizers,
    write_synthetic_csv, EmitFormat, ExperimentConfig,
};
use kcagg::Error;

#[derive(Parser)]
#[command(name = "kcagg", about = "Kernel-weighted consensual aggregation harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark dataset and write it as CSV.
    Simulate {
        /// Model id, 1..=10.
        #[arg(long)]
        model: u8,
        /// Input regime: uncorrelated or correlated.
        #[arg(long, default_value = "uncorrelated")]
        regime: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (columns x1..xd, y).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a replicated experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config replication count.
        #[arg(long)]
        replications: Option<usize>,
        /// Write results here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv, json or markdown.
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Time gradient descent against grid search on the same CV objective.
    Time {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle-equivalence property suites.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::InvalidConfig(_)
                | Error::MissingColumn(_)
                | Error::UnparseableCell { .. } => ExitCode::from(2),
                Error::FailureThreshold { .. } => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Simulate { model, regime, seed, out } => {
            let regime = parse_regime(&regime)?;
            let model = SyntheticModelId::new(model, regime)?;
            write_synthetic_csv(model, seed, &out)?;
            let (n, d) = model.size();
            eprintln!("wrote model {} ({}, {n} x {d}) to {}", model.id, regime.name(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, seed, replications, out, format } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(reps) = replications {
                cfg.replications = reps;
            }
            let format: EmitFormat = format.parse()?;
            let table = run_experiment(&cfg)?;
            eprintln!(
                "{} replications done ({} failed); optimizer {:.2}s, total {:.2}s",
                table.replications_used(),
                table.failed_replications,
                table.timing.optimizer_seconds,
                table.timing.end_to_end_seconds,
            );
            match out {
                Some(path) => {
                    emit_results(&table, format, &path)?;
                    eprintln!("results written to {}", path.display());
                }
                None => print!("{}", render_results(&table, format)?),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Time { config, seed, out } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let timing = time_optimizers(&cfg)?;
            let mut text = serde_json::to_string_pretty(&timing)?;
            text.push('\n');
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { seed } => {
            let reports = run_all_checks(seed);
            let mut all_passed = true;
            for report in &reports {
                let status = if report.passed { "PASS" } else { "FAIL" };
                println!("{status}  {:<32} {}", report.name, report.detail);
                all_passed &= report.passed;
            }
            if all_passed {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(3))
            }
        }
    }
}

fn parse_regime(name: &str) -> Result<Regime, Error> {
    match name {
        "uncorrelated" => Ok(Regime::Uncorrelated),
        "correlated" => Ok(Regime::Correlated),
        other => Err(Error::InvalidConfig(format!(
            "unknown regime {other:?} (expected uncorrelated or correlated)"
        ))),
    }
}
