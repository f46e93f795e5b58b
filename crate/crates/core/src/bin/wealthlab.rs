use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use clap::{Parser, Subcommand};
use serde::Serialize;

use wealthlab::config::parse_config;
use wealthlab::experiments::{self, Status};
use wealthlab::inference::{fit_tail, ParetoFit};
use wealthlab::model::gini;
use wealthlab::output::{emit_plot_data, read_samples, write_report, Meta};
use wealthlab::{Error, Result};

#[derive(Parser)]
#[command(name = "wealthlab", version, about = "Monte Carlo lab for wealth-exchange models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a Pareto tail to one column of a CSV file.
    Estimate {
        samples: PathBuf,
        #[arg(long, default_value_t = 0)]
        column: usize,
    },
    /// Write CCDF and log-binned histogram files for a sample.
    Plotdata {
        samples: PathBuf,
        #[arg(long, default_value_t = 30)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        column: usize,
        /// Output prefix; defaults to the input path without extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct Estimate {
    n: usize,
    gini: f64,
    fit: ParetoFit,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::io(&config, e))?;
            let mut cfg = parse_config(&text)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            cfg.validate()?;
            let started = SystemTime::now();
            let clock = Instant::now();
            let mut report = experiments::run(&cfg)?;
            let dir = cfg.output_dir.clone();
            let written = write_report(&cfg, &mut report, &dir, Some(Meta::new(started, clock.elapsed())))?;
            for v in &report.verdicts {
                let tag = match v.status {
                    Status::Pass => "PASS",
                    Status::Fail => "FAIL",
                    Status::NotRun => "NOT-RUN",
                    Status::NotApplicable => "NOT-APPLICABLE",
                };
                println!("{tag:<15} {} ({}/{}) {}", v.name, v.passes, v.replicas, v.note);
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("summary: {}", written.summary.display());
            println!("timeseries: {}", written.timeseries.display());
            Ok(())
        }
        Command::Estimate { samples, column } => {
            let xs = read_samples(&samples, column)?;
            let est = Estimate {
                n: xs.len(),
                gini: gini(&xs)?,
                fit: fit_tail(&xs)?,
            };
            println!("{}", serde_json::to_string_pretty(&est).expect("estimate serializes"));
            Ok(())
        }
        Command::Plotdata { samples, bins, column, out } => {
            let xs = read_samples(&samples, column)?;
            let prefix = out.unwrap_or_else(|| strip_extension(&samples));
            let (c, h) = emit_plot_data(&xs, bins, &prefix)?;
            println!("{}\n{}", c.display(), h.display());
            Ok(())
        }
    }
}

fn strip_extension(p: &Path) -> PathBuf {
    p.with_extension("")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
