use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(
    name = "racorn",
    about = "Backtests for the CORN-K strategy family (CORN-K, RACORN-K, RACORN(C)-K) with UBAH/UCRP/EG baselines",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Config file (flat key = value with [sections]; see README)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Dataset CSV (overrides `data_path`)
    #[arg(long)]
    data: Option<PathBuf>,

    /// Dataset interpretation: `prices` or `relatives` (overrides `data_mode`)
    #[arg(long)]
    mode: Option<String>,

    /// Strategy to run; repeatable (overrides `strategies`)
    #[arg(long = "strategy")]
    strategies: Vec<String>,

    /// Output directory for report files (overrides `output_dir`)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads, 0 = all cores (overrides `workers`)
    #[arg(long)]
    workers: Option<usize>,

    /// Extra `key=value` override; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Replay the configured strategies over a dataset and write reports
    Backtest(CommonOpts),

    /// Check a dataset file and print shape, extremes, and violations
    Validate {
        /// Dataset CSV
        #[arg(long)]
        data: PathBuf,
        /// Dataset interpretation: `prices` or `relatives`
        #[arg(long)]
        mode: String,
    },

    /// Run one strategy across the values of a single config axis
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Axis to vary: lambda_max, top_fraction, inner_weighting, w_max, rho_max
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values
        #[arg(long)]
        values: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Backtest(common) => commands::backtest(&common),
        Command::Validate { data, mode } => commands::validate(&data, &mode),
        Command::Sweep {
            common,
            axis,
            values,
        } => commands::sweep(&common, &axis, &values),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
