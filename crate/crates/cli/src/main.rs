use std::path::PathBuf;
use std::process::ExitCode;

use bgadl_core::config::ExperimentConfig;
use bgadl_core::data::{make_synthetic, write_container};
use bgadl_core::gradcheck::{max_error, run_suite, DEFAULT_STEP};
use bgadl_core::harness::run_experiment;
use bgadl_core::plot::{load_rows, long_csv, summarize, summary_csv, PlotKind};
use clap::{Parser, Subcommand};

const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(name = "bgadl", version, about = "Bayesian generative active learning experiments")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and write its metrics CSV, checkpoint and traces.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides both the config file and BGADL_SEED.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Turn metrics CSVs into a long-format plot table on stdout.
    Plot {
        #[arg(long, value_parser = parse_kind)]
        kind: PlotKind,
        /// Emit mean and stdev over seeds instead of one row per seed.
        #[arg(long)]
        aggregate: bool,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Compare analytic gradients against central differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
    },
    /// Write a synthetic Gaussian-blob dataset as a binary fixture.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        n_per_class: usize,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 0.15)]
        spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_kind(s: &str) -> Result<PlotKind, String> {
    s.parse().map_err(|e: bgadl_core::Error| e.to_string())
}

fn execute(command: Command) -> bgadl_core::Result<()> {
    match command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply_env()?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let (paths, output) = run_experiment(&cfg, &out)?;
            let last = output.records.last().expect("pretrain row always exists");
            eprintln!(
                "{} seed {}: {} rows, final accuracy {:.4}{}",
                cfg.strategy,
                cfg.seed,
                output.records.len(),
                last.test_accuracy,
                if output.stopped_early { " (stopped early)" } else { "" }
            );
            println!("{}", paths.metrics.display());
        }
        Command::Plot { kind, aggregate, files } => {
            let rows = load_rows(kind, &files)?;
            if aggregate {
                print!("{}", summary_csv(&summarize(&rows)));
            } else {
                print!("{}", long_csv(&rows));
            }
        }
        Command::Gradcheck { seed, step } => {
            let results = run_suite(seed, step)?;
            for r in &results {
                println!(
                    "{:<32} {:>6} coords  max rel err {:.3e}",
                    r.name, r.coordinates, r.max_error
                );
            }
            let worst = max_error(&results);
            println!("max relative error: {worst:.3e}");
            if worst >= GRADCHECK_TOLERANCE {
                return Err(bgadl_core::Error::InvalidArgument(format!(
                    "gradient check failed: {worst:.3e} >= {GRADCHECK_TOLERANCE:e}"
                )));
            }
        }
        Command::SynthData {
            out,
            n_per_class,
            classes,
            dim,
            spread,
            seed,
        } => {
            let ds = make_synthetic(n_per_class, classes, dim, spread, seed)?;
            write_container(&out, &ds)?;
            eprintln!("wrote {} samples to {}", ds.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and 0 for --help.
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                msg.push_str(&format!(": {s}"));
                source = s.source();
            }
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
