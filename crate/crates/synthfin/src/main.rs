//! Command-line workbench: run the generation/evaluation pipeline,
//! measure robustness across seeds, or render reports from artifacts.
//!
//! Exit codes: 0 success, 1 computation failure (divergence, singular
//! systems), 2 input/validation problems. Errors print one JSON line
//! on stderr: `{"error": <kind>, "message": <detail>}`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use synthfin::pipeline::report::cmd_report;
use synthfin::pipeline::{cmd_pipeline, cmd_robustness, RunConfig};

#[derive(Parser)]
#[command(name = "synthfin", version, about = "Synthetic market data workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a generator, sample, evaluate, and write artifacts.
    Pipeline(RunArgs),
    /// Re-run the evaluation across every configured seed.
    Robustness(RunArgs),
    /// Render report.txt and plotting CSVs from written artifacts.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the artifact directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the configured seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Solve portfolio stages with non-negative weights.
    #[arg(long)]
    long_only: bool,
    /// Scale backtest Sharpe/Sortino by sqrt(252).
    #[arg(long)]
    annualize: bool,
    /// Fit one generator for all backtest windows instead of per window.
    #[arg(long)]
    global_model: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON run configuration naming the artifact directory.
    #[arg(long)]
    config: PathBuf,
    /// Read artifacts from this directory instead.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &RunArgs) -> synthfin::Result<RunConfig> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    if args.long_only {
        config.long_only = true;
        config.backtest.long_only = true;
    }
    if args.annualize {
        config.annualize = true;
    }
    if args.global_model {
        config.global_model = true;
    }
    Ok(config)
}

fn run(cli: Cli) -> synthfin::Result<Vec<PathBuf>> {
    match cli.command {
        Command::Pipeline(args) => cmd_pipeline(&load(&args)?),
        Command::Robustness(args) => cmd_robustness(&load(&args)?),
        Command::Report(args) => {
            let config = RunConfig::load(&args.config)?;
            let dir = args.out.unwrap_or(config.out_dir);
            cmd_report(&dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.kind(), "message": e.to_string() })
            );
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
