use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mrt_core::perf::{speedup_compound_fast, speedup_semi_implicit, WorkModel};
use mrt_expcli::compare::{compare, load_run};
use mrt_expcli::trajectory::fmt_num;
use mrt_expcli::{run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mrt", version, about = "Multirate time stepping experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two written runs (their `.json` summaries).
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Snapshot times to compare; defaults to the last common one.
        #[arg(long = "at", value_delimiter = ',')]
        times: Vec<f64>,
    },
    /// Tabulate the modeled speed-ups.
    ModelSpeedup {
        #[arg(long = "C")]
        c: f64,
        #[arg(long, default_value_t = 2.0)]
        nfp: f64,
        #[arg(long, default_value_t = 1.0)]
        ns1: f64,
        /// Predictor latent work ratio; defaults to `C`.
        #[arg(long = "Cp")]
        c_p: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        ns2p: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20,30")]
        m: Vec<usize>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { config, out } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(dir) = out {
                config.output.dir = dir;
            }
            let sweep = run_experiment(&config, &mut |rec| match &rec.outcome {
                Ok(r) => eprintln!("{:<36} ok   {:.2} s", rec.id.label(), r.timing.total_seconds),
                Err(f) => {
                    let tag = if rec.expected_failure { "expected failure" } else { "FAILED" };
                    eprintln!("{:<36} {tag}: {} ({})", rec.id.label(), f.class, f.message)
                }
            })
            .context("sweep")?;
            eprintln!("outputs in {}", config.output.dir.display());
            Ok(sweep.all_acceptable())
        }
        Command::Compare { a, b, times } => {
            print!("{}", compare(&load_run(&a)?, &load_run(&b)?, &times)?);
            Ok(true)
        }
        Command::ModelSpeedup { c, nfp, ns1, c_p, ns2p, m } => {
            anyhow::ensure!(c > 0.0 && c < 1.0, "C must lie in (0, 1)");
            anyhow::ensure!(nfp >= 1.0, "n_fp must be >= 1");
            anyhow::ensure!(m.iter().all(|&m| m >= 1), "every m must be >= 1");
            let model = WorkModel { n_s1: ns1, n_s2_predictor: ns2p, w_g_predictor: c_p.unwrap_or(c), ..WorkModel::with_ratio(c, nfp) };
            println!("m,modeled_semi,modeled_cf");
            for m in m {
                println!("{m},{},{}", fmt_num(speedup_semi_implicit(&model, m)), fmt_num(speedup_compound_fast(&model, m)));
            }
            Ok(true)
        }
    }
}
