//! Experiment front end: `sgn-lab train|stability|bounds|teacher-gen
//! --config <path> [--out <dir>] [--jobs N] [--header]`.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numerical abort.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sgn_core::cli::{cmd_bounds, cmd_stability, cmd_teacher_gen, cmd_train, exit_code, CliOptions};
use sgn_core::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "sgn-lab",
    about = "Stochastic Gauss-Newton training and stability experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (flat key = value file).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's out_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent seed jobs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Skip one header line when reading CSV datasets.
    #[arg(long)]
    header: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train per seed and write per-iteration metrics plus a summary.
    Train(RunArgs),
    /// Coupled paired-trajectory stability runs.
    Stability(RunArgs),
    /// Print the bound table for a configuration.
    Bounds(RunArgs),
    /// Write a teacher-labeled dataset CSV.
    TeacherGen(RunArgs),
}

fn options(args: &RunArgs, cfg: &RunConfig) -> Result<CliOptions, sgn_core::SgnError> {
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("sgn-lab-out"));
    let jobs = match args.jobs {
        Some(0) => {
            return Err(sgn_core::SgnError::Config("--jobs must be >= 1".into()));
        }
        Some(j) => j,
        None => std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1),
    };
    Ok(CliOptions {
        out_dir,
        jobs,
        csv_has_header: args.header,
    })
}

fn run() -> Result<(), sgn_core::SgnError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train(args) => {
            let cfg = RunConfig::parse_file(&args.config)?;
            let opts = options(args, &cfg)?;
            let summary = cmd_train(&cfg, &opts)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "train: {} seed(s), final risk (seed mean) {:.6e}, gap bound satisfied: {}, metrics in {}",
                summary.per_seed.len(),
                summary.seed_mean_final_risk,
                summary.bound_satisfied,
                opts.out_dir.display()
            );
            Ok(())
        }
        Command::Stability(args) => {
            let cfg = RunConfig::parse_file(&args.config)?;
            let opts = options(args, &cfg)?;
            let summary = cmd_stability(&cfg, &opts)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for sweep in &summary.sweeps {
                println!(
                    "stability: lambda = {:.6}, mean final ||Delta||_Hbar = {:.6e} (se {:.2e}), slope = {:?}",
                    sweep.lambda,
                    sweep.seed_mean_final_delta_hbar,
                    sweep.seed_se_final_delta_hbar,
                    sweep.growth_slope
                );
            }
            if let Some(monotone) = summary.lambda_ordering_monotone {
                println!("stability: damping sweep monotone decreasing: {monotone}");
            }
            println!("stability: metrics in {}", opts.out_dir.display());
            Ok(())
        }
        Command::Bounds(args) => {
            let cfg = RunConfig::parse_file(&args.config)?;
            let opts = options(args, &cfg)?;
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            cmd_bounds(&cfg, &opts, &mut lock)
        }
        Command::TeacherGen(args) => {
            let cfg = RunConfig::parse_file(&args.config)?;
            let opts = options(args, &cfg)?;
            cmd_teacher_gen(&cfg, &opts)?;
            println!("teacher-gen: dataset written to {}", opts.out_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
