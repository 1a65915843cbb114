use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use autorate::analysis::fit_rate;
use autorate::harness::{self, ExperimentConfig, SuiteOptions, SweepConfig};
use autorate::netmodel::NetworkSpec;
use autorate::Error;

#[derive(Parser)]
#[command(name = "autorate", version, about = "Scale-invariant training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write trajectory.csv, summary.json, config.json.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every grid cell and write comparison.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the invariance checks on random instances of a network spec.
    Check {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 10)]
        instances: usize,
        #[arg(long, default_value_t = 8)]
        batch_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit a log-log slope to one trajectory column.
    FitRate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long)]
        running_min: bool,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_ALL_FAILED: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn dispatch(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Run { config } => {
            let cfg: ExperimentConfig = harness::load_config(&config)?;
            let out = harness::run(&cfg)?;
            let s = &out.summary;
            println!(
                "steps={} final_loss={} min_grad_sq={} diverged={}",
                s.steps_completed,
                autorate::fmt_f64(s.final_loss),
                autorate::fmt_f64(s.min_grad_sq),
                s.diverged
            );
            for r in &s.checks {
                println!("{r}");
            }
            Ok(0)
        }
        Command::Sweep { config, jobs } => {
            let cfg: SweepConfig = harness::load_config(&config)?;
            let rows = harness::sweep(&cfg, jobs)?;
            for r in &rows {
                let status = if r.failed { format!("failed: {}", r.error) } else { "ok".into() };
                println!(
                    "{:>3} {:<10} {:>10} final_loss={} diverged={} {status}",
                    r.index,
                    r.setting,
                    r.axis_value,
                    autorate::fmt_f64(r.final_loss),
                    r.diverged
                );
            }
            Ok(if rows.iter().all(|r| r.failed) { EXIT_ALL_FAILED } else { 0 })
        }
        Command::Check {
            spec,
            instances,
            batch_size,
            seed,
        } => {
            let net: NetworkSpec = harness::load_config(&spec)?;
            let opts = SuiteOptions {
                instances,
                batch_size,
                seed,
                ..SuiteOptions::default()
            };
            let reports = harness::check_suite(&net, &opts)?;
            for r in &reports {
                println!("{r}");
            }
            Ok(if reports.iter().all(|r| r.passed) { 0 } else { EXIT_CHECK_FAILED })
        }
        Command::FitRate {
            input,
            column,
            lo,
            hi,
            running_min,
        } => {
            let series = harness::read_trajectory_column(&input, &column)?;
            let t_max = series.iter().map(|p| p.0).fold(0.0, f64::max);
            let (dlo, dhi) = harness::tail_window(t_max as usize + 1);
            let fit = fit_rate(&series, (lo.unwrap_or(dlo), hi.unwrap_or(dhi)), running_min)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
