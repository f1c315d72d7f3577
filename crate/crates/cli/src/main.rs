use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adamkl::data::{save_dataset, synth_shifted};
use adamkl::harness::{resolve_output, run_experiment, validate_config, DatasetSource, ExperimentConfig};
use adamkl::Error;
use clap::{Parser, Subcommand};

/// Active multi-kernel domain adaptation experiments.
#[derive(Debug, Parser)]
#[command(name = "adamkl", version, about)]
struct Cli {
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    /// Worker threads for seeds, grid points and pool scoring.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory (overrides the config and ADAMKL_OUTPUT).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured experiment and write curve.csv, summary.csv and config.echo.
    Run { config: PathBuf },
    /// Write the configured synthetic dataset to <output>/synthetic.adamkl.
    Synth { config: PathBuf },
    /// Check a config and print it with defaults applied.
    Validate { config: PathBuf },
}

const CONFIG_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 3;

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load_config(path: &Path, cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = validate_config(&text).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(seed) = cli.seed_override {
        cfg.seeds = vec![seed];
    }
    if let Some(dir) = &cli.output {
        cfg.output = Some(dir.clone());
    }
    Ok(cfg)
}

fn configure_jobs(jobs: Option<usize>) -> Result<(), Failure> {
    let Some(n) = jobs else { return Ok(()) };
    if n == 0 {
        return Err(Failure::Config("`--jobs` must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    if n > 1 {
        log::warn!("built without the parallel feature; --jobs {n} runs sequentially");
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    configure_jobs(cli.jobs)?;
    match &cli.command {
        Command::Validate { config } => {
            let cfg = load_config(config, cli)?;
            print!("{}", cfg.echo());
        }
        Command::Synth { config } => {
            let cfg = load_config(config, cli)?;
            let DatasetSource::Synth(synth) = &cfg.dataset else {
                return Err(Failure::Config("`dataset`: synth requires a synthetic dataset".into()));
            };
            let path = resolve_output(&cfg).join("synthetic.adamkl");
            save_dataset(&synth_shifted(synth)?, &path)?;
            println!("{}", path.display());
        }
        Command::Run { config } => {
            let cfg = load_config(config, cli)?;
            let output = resolve_output(&cfg);
            let report = run_experiment(&cfg, &output)?;
            let last = report.stats.oa_mean.len() - 1;
            println!(
                "{}: OA {:.4} ± {:.4}, kappa {:.4} ± {:.4} after {} target samples ({} seeds) -> {}",
                report.method.name(),
                report.stats.oa_mean[last],
                report.stats.oa_sd[last],
                report.stats.kappa_mean[last],
                report.stats.kappa_sd[last],
                report.added[last],
                report.runs.len(),
                output.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(CONFIG_ERROR)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(RUNTIME_ERROR)
        }
    }
}
