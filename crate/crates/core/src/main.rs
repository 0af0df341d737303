use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dbas::bench::{compare_summary, enumerate_all, run_experiment, summary_csv, ExperimentConfig, ExperimentKind};
use dbas::oracles::{make_random_oracle, MlpOracle, Predictor};

#[derive(Parser)]
#[command(name = "dbas", version, about = "Design by adaptive sampling over DNA sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random Glorot-initialised MLP oracle as JSON.
    MakeOracle {
        #[arg(long)]
        length: usize,
        #[arg(long, value_delimiter = ',', default_value = "50,50")]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 0.0)]
        noise_var: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every sequence of the oracle's length.
    Enumerate {
        #[arg(long)]
        oracle: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment config and write its summary and per-run files.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Recompute the summary from a run directory's files.
    Compare {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        summary: PathBuf,
    },
    /// Run a specification experiment, also writing final-sample scatter files.
    SpecRun {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_config(path: &Path, out_dir: Option<PathBuf>) -> Result<(ExperimentConfig, PathBuf), String> {
    let cfg = ExperimentConfig::from_json(&read(path)?).map_err(|e| e.to_string())?;
    let dir = out_dir
        .or_else(|| cfg.out_dir.clone())
        .ok_or("no output directory: pass --out-dir or set out_dir in the config")?;
    Ok((cfg, dir))
}

fn execute(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::MakeOracle { length, hidden, noise_var, seed, out } => {
            let oracle = make_random_oracle(length, &hidden, seed)
                .and_then(|o| o.with_noise_variance(noise_var))
                .map_err(|e| e.to_string())?;
            write(&out, &oracle.to_json())
        }
        Command::Enumerate { oracle, out } => {
            let oracle = MlpOracle::from_json(&read(&oracle)?).map_err(|e| e.to_string())?;
            let table = enumerate_all(oracle.length(), &oracle).map_err(|e| e.to_string())?;
            write(&out, &table.to_csv())
        }
        Command::Run { config, out_dir } => {
            let (cfg, dir) = load_config(&config, out_dir)?;
            run_experiment(&cfg, Some(&dir), false).map(|_| ()).map_err(|e| e.to_string())
        }
        Command::SpecRun { config, out_dir } => {
            let (cfg, dir) = load_config(&config, out_dir)?;
            if !matches!(cfg.experiment, ExperimentKind::Specification { .. }) {
                return Err("spec-run needs an experiment of kind \"specification\"".into());
            }
            run_experiment(&cfg, Some(&dir), true).map(|_| ()).map_err(|e| e.to_string())
        }
        Command::Compare { out_dir, summary } => {
            let rows = compare_summary(&out_dir).map_err(|e| e.to_string())?;
            let text = summary_csv(&rows);
            write(&summary, &text)?;
            let stored = out_dir.join("summary.csv");
            if stored.exists() && read(&stored)? != text {
                return Err(format!("recomputed summary differs from {}", stored.display()));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
