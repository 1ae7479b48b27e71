//! Command-line front end: `run` executes the experiment grid, `sweep`
//! the DAG-parameter study, `gen` emits prepared networks, and `eval`
//! scores stored results. Exit codes: 0 success, 1 config error, 2 when
//! any run failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use contagion::harness::{self, ExperimentConfig};
use contagion::Error;

#[derive(Parser)]
#[command(
    name = "contagion",
    version,
    about = "Attribute inference against randomized response through network contagion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment grid and write result tables.
    Run(CommonArgs),
    /// Sweep the local-DAG parameters (eta, N_max) and write sweep data.
    Sweep(CommonArgs),
    /// Generate the configured networks as weighted edge-list files.
    Gen(CommonArgs),
    /// Score an x_hat CSV against a ground-truth CSV.
    Eval(EvalArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Key=value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// CSV whose last column holds per-node scores (header skipped).
    scores: PathBuf,
    /// Ground-truth CSV: node_id,x,is_seed.
    truth: PathBuf,
    /// Retention parameter; adds the privacy ceiling to the output.
    #[arg(long)]
    beta: Option<f64>,
}

enum StageError {
    Config(Error),
    Run(Error),
}

fn stage(e: Error) -> StageError {
    match &e {
        Error::Config(_) => StageError::Config(e),
        _ => StageError::Run(e),
    }
}

fn load(args: &CommonArgs) -> Result<ExperimentConfig, StageError> {
    let mut config = match &args.config {
        Some(path) => harness::load_config(path).map_err(StageError::Config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    Ok(config)
}

fn dispatch(cli: Cli) -> Result<ExitCode, StageError> {
    match cli.command {
        Command::Run(args) => {
            let config = load(&args)?;
            let records = harness::run_experiment(&config).map_err(stage)?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            for r in records.iter().filter(|r| r.error.is_some()) {
                eprintln!(
                    "run failed: {} cascade {} beta {} {}: {}",
                    r.network,
                    r.cascade,
                    r.beta,
                    r.variant,
                    r.error.as_deref().unwrap_or("")
                );
            }
            println!(
                "{} runs ({} failed); artifacts in {}",
                records.len(),
                failed,
                config.out_dir.display()
            );
            Ok(if failed > 0 {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Sweep(args) => {
            let config = load(&args)?;
            let records = harness::run_sweep(&config).map_err(stage)?;
            println!(
                "{} sweep rows; artifacts in {}",
                records.len(),
                config.out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen(args) => {
            let config = load(&args)?;
            let paths = harness::generate_networks(&config).map_err(stage)?;
            for path in &paths {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval(args) => {
            let text =
                harness::eval_scores(&args.scores, &args.truth, args.beta).map_err(stage)?;
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(StageError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(StageError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
