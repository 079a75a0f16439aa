//! `l2dcd`: benchmark runs, single-pair scoring, hyperparameter selection,
//! graph ordering and dataset download.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use crate::config::{DataSource, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "l2dcd", version, about = "Learning to defer between causal discovery methods and experts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and evaluate every (CD method, expert) combination.
    Benchmark {
        #[command(flatten)]
        run: RunArgs,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Score one two-column data file with a CD method.
    Pair {
        /// reci, lingam or bqcd.
        method: String,
        file: PathBuf,
    },
    /// Leave-one-out selection over a hyperparameter grid.
    Loo {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Order the nodes of a graph by queried ancestry.
    Graph {
        #[arg(long)]
        config: PathBuf,
    },
    /// Download the real benchmark files.
    Fetch {
        /// A run configuration whose data source names the target root.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Target directory; overrides the config.
        #[arg(long)]
        dest: Option<PathBuf>,
        #[arg(long, default_value = commands::DEFAULT_FETCH_URL)]
        base_url: String,
        #[arg(long, default_value_t = 60.0)]
        timeout_s: f64,
    },
}

fn jobs(requested: Option<usize>) -> Result<usize, CliError> {
    match requested {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn print(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json prints"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Benchmark { run, output_dir } => {
            let mut cfg = RunConfig::load(&run.config)?;
            if output_dir.is_some() {
                cfg.output_dir = output_dir;
            }
            let dir = commands::benchmark(&cfg, jobs(run.jobs)?)?;
            eprintln!("wrote results to {}", dir.display());
        }
        Command::Pair { method, file } => print(&commands::pair(&method, &file)?),
        Command::Loo { run } => {
            let cfg = RunConfig::load(&run.config)?;
            print(&commands::loo(&cfg, jobs(run.jobs)?)?);
        }
        Command::Graph { config } => print(&commands::graph(&commands::load_graph_config(&config)?)?),
        Command::Fetch { config, dest, base_url, timeout_s } => {
            let from_config = match config {
                Some(path) => match RunConfig::load(&path)?.data {
                    DataSource::Tuebingen { root, .. } => Some(root),
                    _ => None,
                },
                None => None,
            };
            let dest = dest
                .or(from_config)
                .ok_or_else(|| CliError::Usage("fetch needs --dest or a config with a tuebingen data root".into()))?;
            if !(timeout_s > 0.0 && timeout_s.is_finite()) {
                return Err(CliError::Usage("--timeout-s must be positive".into()));
            }
            print(&commands::fetch(&base_url, &dest, timeout_s)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on its own for malformed command lines
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
