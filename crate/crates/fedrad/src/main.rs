use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use fedrad::fetch::{fetch_mnist, FetchSource};
use fedrad::manifest::{ExperimentManifest, DEFAULTS_HELP};
use fedrad::report::{format_table, read_summary_csv};
use fedrad::runner::run_matrix;

#[derive(Parser)]
#[command(name = "fedrad", version, about = "Robust federated aggregation experiments on MNIST", after_help = DEFAULTS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a manifest and write results.
    Run {
        manifest: PathBuf,
        /// Override the manifest's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the number of cells run in parallel.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Parse a manifest and print it with every default filled in.
    Validate { manifest: PathBuf },
    /// Download MNIST into a directory and verify checksums.
    FetchData {
        dir: PathBuf,
        /// Mirror base URL; repeatable. Defaults to the built-in list.
        #[arg(long)]
        mirror: Vec<String>,
        /// Import from a local directory instead of downloading.
        #[arg(long, conflicts_with = "mirror")]
        from: Option<PathBuf>,
    },
    /// Print a results table from a results directory.
    Summarize { results_dir: PathBuf },
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            manifest,
            output,
            workers,
        } => {
            let mut m = ExperimentManifest::load(&manifest)?;
            if let Some(dir) = output {
                m.output_dir = dir;
            }
            if let Some(w) = workers {
                anyhow::ensure!(w > 0, "--workers must be at least 1");
                m.workers = w;
            }
            let outcome = run_matrix(&m)?;
            print!("{}", format_table(&outcome.summary));
            println!("results written to {}", outcome.output_dir.display());
            let failed = outcome.failed_cells();
            if failed > 0 {
                for c in outcome.cells.iter().filter(|c| c.result.is_err()) {
                    if let Err(msg) = &c.result {
                        eprintln!("failed cell {}: {msg}", c.cell.slug());
                    }
                }
                eprintln!("{failed} cell(s) failed");
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { manifest } => {
            let m = ExperimentManifest::load(&manifest)?;
            print!("{}", m.to_toml());
            eprintln!("{}: ok, {} cells", manifest.display(), m.cells().len());
            Ok(ExitCode::SUCCESS)
        }
        Command::FetchData { dir, mirror, from } => {
            let source = match (from, mirror.is_empty()) {
                (Some(local), _) => FetchSource::LocalDir(local),
                (None, false) => FetchSource::Mirrors(mirror),
                (None, true) => FetchSource::default(),
            };
            for path in fetch_mnist(&dir, &source)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize { results_dir } => {
            let path = results_dir.join("summary.csv");
            let rows = read_summary_csv(&path).with_context(|| format!("reading {}", path.display()))?;
            print!("{}", format_table(&rows));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
