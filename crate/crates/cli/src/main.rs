use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod artifact;
mod commands;
mod config;

use config::Config;

/// Hybrid movie recommender: batch pipeline over ratings, metadata and tweets.
#[derive(Parser)]
#[command(name = "hybridrec", version)]
struct Cli {
    /// TOML configuration; input paths inside it are relative to its directory.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the minimum release year.
    #[arg(long, global = true, value_name = "Y")]
    min_year: Option<i32>,
    /// Override the output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the inputs and write the filtered dataset.json.
    Ingest,
    /// Score tweets and write per-movie sentiment ratings.
    Sentiment,
    /// Build pair features and co-interest targets, then learn attribute weights.
    Train,
    /// Print the Top-N list for one movie.
    Recommend {
        #[arg(long, value_name = "ID")]
        movie: String,
        #[arg(long, value_name = "N", default_value_t = 10)]
        top: usize,
    },
    /// Score the model and both baselines against the ground truth.
    Evaluate,
    /// Evaluate over a grid of sentiment weights.
    Sweep {
        #[arg(long, value_name = "CSV-LIST", default_value = commands::DEFAULT_GRID)]
        grid: String,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let path = cli
        .config
        .ok_or_else(|| anyhow::anyhow!("--config PATH is required"))?;
    let config = Config::load(&path, cli.min_year, cli.out.as_deref())?;
    match cli.command {
        Command::Ingest => commands::ingest(&config),
        Command::Sentiment => commands::sentiment(&config),
        Command::Train => commands::train(&config),
        Command::Recommend { movie, top } => commands::recommend(&config, &movie, top),
        Command::Evaluate => commands::evaluate(&config),
        Command::Sweep { grid } => commands::sweep(&config, &grid),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
