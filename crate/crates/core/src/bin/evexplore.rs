//! Command-line front end: run an exploration episode, re-evaluate or export
//! a finished run directory, or benchmark the TSP heuristic.

use clap::{Parser, Subcommand, ValueEnum};
use evexplore::app::{
    bench_tsp, eval_run_dir, export_pointcloud, run_episode, Mode, RunConfig,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "evexplore", about = "Active 3D reconstruction simulator with evidential uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Frontier,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Run an exploration episode from a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the planner mode from the config.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Override the RNG seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Recompute metrics from a run directory's grid snapshots.
    Eval {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Export reconstructed and ground-truth surfaces as ASCII PLY.
    ExportPointcloud {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Report the open-path TSP heuristic gap against the exact optimum.
    BenchTsp {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> evexplore::error::Result<()> {
    match cli.command {
        Command::Run { config, mode, seed, out_dir } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(m) = mode {
                cfg.mode = match m {
                    ModeArg::Full => Mode::Full,
                    ModeArg::Frontier => Mode::FrontierOnly,
                    ModeArg::Random => Mode::RandomWalk,
                };
            }
            if let Some(s) = seed {
                cfg.rng_seed = s;
            }
            if let Some(d) = out_dir {
                cfg.out_dir = d.to_string_lossy().into_owned();
            }
            let report = run_episode(&cfg)?;
            println!(
                "finished at step {}: completion {:.2} cm, ratio {:.2}%, AUSE {:.4}",
                report.step, report.completion_cm, report.completion_ratio_pct, report.ause
            );
        }
        Command::Eval { run_dir } => {
            let r = eval_run_dir(&run_dir)?;
            println!(
                "completion {:.2} cm, ratio {:.2}%, AUSE {:.4} ({} gt points)",
                r.completion_cm, r.completion_ratio_pct, r.ause, r.n_gt_points
            );
        }
        Command::ExportPointcloud { run_dir } => {
            let (recon, gt) = export_pointcloud(&run_dir)?;
            println!("wrote {} and {}", recon.display(), gt.display());
        }
        Command::BenchTsp { n, trials, seed } => {
            let b = bench_tsp(n, trials, seed)?;
            println!(
                "n={} trials={}: mean gap {:.3}%, max gap {:.3}%, optimal on {}/{}",
                b.n, b.trials, b.mean_gap_pct, b.max_gap_pct, b.heuristic_wins, b.trials
            );
        }
    }
    Ok(())
}
