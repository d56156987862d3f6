use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use pithreads::analyzer::{check_soundness, run, AnalysisConfig, PartitionChoice};
use pithreads::concrete::ExploreLimits;

#[derive(Parser)]
#[command(name = "pithreads", version, about = "Thread-partitioning analysis of pi-calculus systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the fixpoint and evaluate queries. Exits 0 if every query
    /// is proved, 1 if some query is unknown, 2 on input errors.
    Analyze {
        file: PathBuf,
        /// `chan`, `marker`, or a path to a JSON partition spec.
        #[arg(long, default_value = "chan")]
        partition: String,
        /// A query such as `mutex unit cell over {2,6,10}`; repeatable.
        #[arg(long = "prove", value_name = "QUERY")]
        queries: Vec<String>,
        #[arg(long, value_enum, default_value = "text")]
        report: Format,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        /// Include per-iteration statistics.
        #[arg(long)]
        trace: bool,
        /// Drop the per-unit creation counter.
        #[arg(long)]
        no_creation_count: bool,
    },
    /// Compute the fixpoint, then explore the concrete semantics and report
    /// any configuration it fails to describe. Exits 1 on violations.
    OracleCheck {
        file: PathBuf,
        #[arg(long, default_value = "chan")]
        partition: String,
        #[arg(long, default_value_t = 5000)]
        max_configs: usize,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long, value_enum, default_value = "text")]
        report: Format,
        #[arg(long)]
        no_creation_count: bool,
    },
}

fn partition_choice(arg: &str) -> Result<PartitionChoice> {
    Ok(match arg {
        "chan" => PartitionChoice::Channel,
        "marker" => PartitionChoice::Marker,
        path => PartitionChoice::Spec(
            std::fs::read_to_string(path).with_context(|| format!("reading partition spec {path}"))?,
        ),
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Analyze { file, partition, queries, report, max_iter, trace, no_creation_count } => {
            let config = AnalysisConfig {
                partition: partition_choice(&partition)?,
                max_iter,
                queries,
                track_creation: !no_creation_count,
                trace,
            };
            let analysis = run(&read(&file)?, &config)?;
            match report {
                Format::Text => print!("{}", analysis.render_text()),
                Format::Json => println!("{}", serde_json::to_string_pretty(&analysis.to_json())?),
            }
            Ok(analysis.all_proved())
        }
        Command::OracleCheck { file, partition, max_configs, max_depth, report, no_creation_count } => {
            let config = AnalysisConfig {
                partition: partition_choice(&partition)?,
                track_creation: !no_creation_count,
                ..AnalysisConfig::default()
            };
            let a = run(&read(&file)?, &config)?;
            let limits = ExploreLimits { max_configs, max_depth: max_depth.unwrap_or(usize::MAX) };
            let oracle = check_soundness(&a.sys, &a.gv, &a.space, &a.env, &a.contents, limits)?;
            match report {
                Format::Text => print!("{}", oracle.render_text()),
                Format::Json => println!("{}", serde_json::to_string_pretty(&oracle)?),
            }
            Ok(oracle.violations.is_empty())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
