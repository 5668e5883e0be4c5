use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use psro::config::ExperimentConfig;
use psro::error::{Error, Result};
use psro::harness;

#[derive(Parser)]
#[command(name = "psro", version, about = "Empirical game-theoretic training runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (default: $PSRO_OUTPUT_ROOT/<config name>).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override engine.workers.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Search oracle hyperparameters for the config's environment.
    HparamSearch {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Merge the regret curves of finished runs into one long table.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Recompute a run's regret curve against held-out policies from another run.
    Eval {
        checkpoint: PathBuf,
        #[arg(long)]
        eval_set: PathBuf,
        #[arg(long, default_value_t = 6)]
        size: usize,
        #[arg(long, default_value_t = 30)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn default_output(config: &Path, suffix: &str) -> PathBuf {
    let stem = config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    harness::output_root().join(format!("{stem}{suffix}"))
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let log = |line: &str| println!("{line}");
    match cli.command {
        Command::Run { config, output, workers } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(w) = workers {
                cfg.run.workers = w;
                cfg.run.validate()?;
            }
            let out = output.unwrap_or_else(|| default_output(&config, ""));
            let res = harness::run_experiment(&cfg, &out, log)?;
            println!("wrote {}", res.dir.display());
        }
        Command::HparamSearch { config, output } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = output.unwrap_or_else(|| default_output(&config, "-hparams"));
            harness::run_hparam_search(&cfg, &out, log)?;
            println!("wrote {}", out.join("hparams.toml").display());
        }
        Command::Compare { runs, output } => emit(&harness::compare(&runs)?, output.as_deref())?,
        Command::Eval {
            checkpoint,
            eval_set,
            size,
            episodes,
            seed,
            output,
        } => {
            if episodes == 0 {
                return Err(Error::InvalidArgument("--episodes must be at least 1".into()));
            }
            let curve = harness::evaluate_checkpoint(&checkpoint, &eval_set, size, episodes, seed)?;
            emit(&harness::curve_tsv(&curve), output.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
