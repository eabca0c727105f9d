use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dispersion_lab::runner::{list_experiments, run, threads_from_env, ExperimentConfig};

/// Reproducible experiments for dispersive and Strichartz bounds under
/// white-noise dispersion.
#[derive(Debug, Parser)]
#[command(name = "dispersion-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override `stochastic.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Override `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available experiments.
    List,
    /// Parse and validate a config file without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for info in list_experiments() {
                println!("{:<18} {}", info.name, info.description);
                println!("{:<18} claim: {}", "", info.claim);
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                println!("ok: {} (config hash {})", cfg.experiment, cfg.hash());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Run { config, seed, out } => {
            let outcome = threads_from_env().and_then(|threads| {
                let mut cfg = ExperimentConfig::load(&config)?;
                if let Some(s) = seed {
                    cfg.stochastic.seed = s;
                }
                if let Some(dir) = out {
                    cfg.output_dir = dir;
                }
                run(&cfg, threads)
            });
            match outcome {
                Ok(summary) => {
                    for w in &summary.warnings {
                        eprintln!("warning: {}", w.message);
                    }
                    println!("wrote {} (config hash {})", summary.output_dir.display(), summary.config_hash);
                    ExitCode::from(summary.status.exit_code())
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
