use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use folio::config::RunConfig;
use folio::pipeline::{self, BacktestOptions};
use folio::Result;

/// End-to-end portfolio optimization with walk-forward evaluation.
#[derive(Debug, Parser)]
#[command(name = "folio", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "folio.toml")]
    config: PathBuf,
    /// Seed override: the model seed for `backtest`, the base seed for
    /// `tune`, and a single-seed list for `evaluate`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log at debug level (info otherwise; RUST_LOG takes precedence).
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the input data and fit the feature scaler.
    Ingest,
    /// Run one allocator through the walk-forward test phase.
    Backtest {
        /// Allocator name (defaults to the first configured).
        #[arg(long)]
        allocator: Option<String>,
        /// Save the model trained on all pre-evaluation data here.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Random hyperparameter search on the validation phase.
    Tune,
    /// Multi-seed test-phase evaluation with t-tests and Pareto selection.
    Evaluate,
    /// Re-render the results in the output directory as Markdown.
    Report,
}

fn execute(cli: Cli) -> Result<()> {
    if let Command::Report = cli.command {
        let dir = match &cli.out {
            Some(d) => d.clone(),
            None => RunConfig::load(&cli.config)?.out_dir,
        };
        print!("{}", pipeline::report(&dir)?);
        return Ok(());
    }
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    let out = cfg.out_dir.clone();
    match cli.command {
        Command::Ingest => {
            let s = pipeline::ingest(&cfg, &out)?;
            println!(
                "{} days x {} assets, {} features ({} to {}); wrote {}",
                s.n_days,
                s.n_assets,
                s.n_features,
                s.first_date,
                s.last_date,
                out.display()
            );
        }
        Command::Backtest { allocator, checkpoint } => {
            let opts = BacktestOptions { allocator, seed: cli.seed, checkpoint };
            let r = pipeline::backtest(&cfg, &out, &opts)?;
            println!(
                "{}: sharpe {} over {} days; wrote {}",
                r.allocator,
                r.metrics.sharpe,
                r.metrics.n_days,
                out.display()
            );
        }
        Command::Tune => {
            let t = pipeline::tune(&cfg, &out, cli.seed)?;
            println!(
                "best trial {} of {} (objective {}); wrote {}",
                t.best.trial.index,
                t.budget,
                t.best.trial.objective.unwrap_or(f64::NEG_INFINITY),
                out.display()
            );
        }
        Command::Evaluate => {
            let ev = pipeline::evaluate(&cfg, &out, cli.seed.map(|s| vec![s]))?;
            for a in &ev.allocators {
                println!(
                    "{}: mean sharpe {} over {} runs, beats benchmark in {}",
                    a.name,
                    a.sharpe.mean,
                    a.runs.len(),
                    a.beats_benchmark
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Report => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
