use std::path::PathBuf;
use std::process::ExitCode;

use blind_mimo::harness::{run_gradient_check_with, ExperimentSummary};
use blind_mimo::{gradient_laplacian, run_experiment, run_sweep, Error, ExperimentConfig};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 2;
const EXIT_IO: u8 = 3;

/// Pilot-free multi-user detection experiments.
#[derive(Debug, Parser)]
#[command(name = "blind-mimo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the trials of one experiment config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment per coherence-block length with paired seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated block lengths, e.g. 512,2048.
        #[arg(long = "T", value_delimiter = ',', required = true)]
        block_lengths: Vec<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the analytic gradient with central finite differences.
    GradCheck {
        #[arg(long = "K", default_value_t = 4)]
        users: usize,
        #[arg(long = "T", default_value_t = 16)]
        block_len: usize,
        #[arg(long = "n", default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Perturbs the analytic gradient (negative control).
        #[arg(long, hide = true)]
        corrupt: bool,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn load(
    config: &PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_json_file(config).map_err(|e| match e {
        // A missing or unreadable config is a config problem, not an output one.
        Error::Io { path, source } => Error::InvalidConfig(format!("{}: {source}", path.display())),
        other => other,
    })?;
    if let Some(seed) = seed {
        cfg.scenario.seed = seed;
    }
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    Ok(cfg)
}

fn print_summary(summary: &ExperimentSummary) {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    for (trial, secs) in summary.trials.iter().zip(&summary.wall_clock_secs) {
        match &trial.failure {
            None => println!(
                "trial {:3}  seed {:20}  min {}  mean {}  ({secs:.2}s)",
                trial.index,
                trial.seed,
                fmt(trial.min_matched),
                fmt(trial.mean_matched)
            ),
            Some(reason) => println!(
                "trial {:3}  seed {:20}  FAILED: {reason}",
                trial.index, trial.seed
            ),
        }
    }
    println!(
        "T={}  completed {}/{}  matched correlation min {} mean {} max {}",
        summary.config.scenario.coherence_block,
        summary.completed,
        summary.trials.len(),
        fmt(summary.min_matched),
        fmt(summary.mean_matched),
        fmt(summary.max_matched)
    );
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let cfg = load(&config, seed, out)?;
            let summary = run_experiment(&cfg)?;
            print_summary(&summary);
            println!("artifacts in {}", cfg.output_dir.display());
        }
        Command::Sweep {
            config,
            block_lengths,
            seed,
            out,
        } => {
            let cfg = load(&config, seed, out)?;
            for summary in run_sweep(&cfg, &block_lengths)? {
                print_summary(&summary);
            }
            println!(
                "sweep table in {}",
                cfg.output_dir.join("sweep.csv").display()
            );
        }
        Command::GradCheck {
            users,
            block_len,
            instances,
            seed,
            corrupt,
        } => {
            let report = run_gradient_check_with(users, block_len, instances, seed, |b, y| {
                let mut g = gradient_laplacian(b, y)?;
                if corrupt {
                    g[(0, 0)] += 1e-2 * (1.0 + g[(0, 0)].abs());
                }
                Ok(g)
            })?;
            for (i, e) in report.relative_errors.iter().enumerate() {
                println!("instance {i:3}  relative error {e:.3e}");
            }
            let verdict = if report.passed() { "PASS" } else { "FAIL" };
            println!(
                "{verdict}: K={users} T={block_len} instances={instances} max relative error {:.3e} (tolerance {:.0e})",
                report.max_relative_error, report.tolerance
            );
            if !report.passed() {
                return Ok(EXIT_CHECK_FAILED);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_CONFIG),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
