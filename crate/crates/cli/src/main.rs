//! `firmod`: decompose stripped ARM firmware into modules, summarize and
//! categorize them with language models, and score the results.

mod artifacts;
mod categorize;
mod config;
mod decompose;
mod error;
mod evaluate;
mod normalize;
mod report;
mod summarize;
mod timing;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use firmod_core::evaluation::MatchMode;
use firmod_core::graph::DrgWeighting;
use firmod_core::store::ProjectStore;
use firmod_llm::Gateway;

use crate::artifacts::SourceKind;
use crate::config::Project;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "firmod", version, about = "Firmware module decomposition and LLM-based categorization")]
struct Cli {
    /// Project root holding firmod.toml and the stage directories.
    #[arg(long, global = true, default_value = ".")]
    project: PathBuf,
    /// Configuration file (default: <project>/firmod.toml).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use this chat/embedding base URL instead of llm.base_url.
    #[arg(long, global = true, value_name = "URL")]
    mock_endpoint: Option<String>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DrgArg {
    Count,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatchArg {
    MaxOverlap,
    OneToOne,
}

#[derive(Subcommand)]
enum Command {
    /// Recover functions, build the graphs and cluster them into modules.
    Decompose {
        /// Sequence, data-reference and call graph coefficients, "a,b,c".
        #[arg(long)]
        weights: Option<String>,
        /// Data-reference edge weight: shared-address count or 0/1.
        #[arg(long, value_enum)]
        drg: Option<DrgArg>,
    },
    /// Summarize every function that passes the length filter.
    Summarize {
        /// Model to use; repeatable. Defaults to llm.models.
        #[arg(long = "model")]
        models: Vec<String>,
        #[arg(long, value_enum, default_value = "decompiled")]
        source: SourceKind,
    },
    /// Rank the categories of every module from its summaries.
    Categorize {
        #[arg(long = "model")]
        models: Vec<String>,
        #[arg(long, value_enum, default_value = "decompiled")]
        source: SourceKind,
    },
    /// Extract, strip and anonymize original source functions.
    Normalize,
    /// Score modules and categories against ground truth.
    Evaluate {
        /// How ground-truth modules are paired with clusters.
        #[arg(long = "match", value_enum, default_value = "max-overlap")]
        matching: MatchArg,
    },
    /// Render all tables from stored evaluations.
    Report {
        /// Further project roots to include as device rows.
        #[arg(long)]
        also: Vec<PathBuf>,
    },
}

fn gateway(project: &Project, mock: Option<&str>) -> anyhow::Result<Gateway> {
    Ok(Gateway::new(project.gateway(mock)?)?)
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().context("starting async runtime")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if !cli.project.is_dir() {
        return Err(CliError::Config(format!("project directory {} does not exist", cli.project.display())).into());
    }
    let project = Project::load(&cli.project, cli.config.as_deref())?;
    let store = ProjectStore::open(&cli.project)?;
    let _lock = store.lock()?;
    let mock = cli.mock_endpoint.as_deref();
    match cli.command {
        Command::Decompose { weights, drg } => {
            let drg = drg.map(|d| match d {
                DrgArg::Count => DrgWeighting::Count,
                DrgArg::Binary => DrgWeighting::Binary,
            });
            decompose::run(&project, &store, weights.as_deref(), drg)
        }
        Command::Summarize { models, source } => {
            let models = project.models(&models)?;
            let gw = gateway(&project, mock)?;
            runtime()?.block_on(summarize::run(&project, &store, &gw, &models, source))
        }
        Command::Categorize { models, source } => {
            let models = project.models(&models)?;
            let gw = gateway(&project, mock)?;
            runtime()?.block_on(categorize::run(&project, &store, &gw, &models, source))
        }
        Command::Normalize => normalize::run(&project, &store),
        Command::Evaluate { matching } => {
            let mode = match matching {
                MatchArg::MaxOverlap => MatchMode::MaxOverlap,
                MatchArg::OneToOne => MatchMode::OneToOne,
            };
            let gw = match (mock, &project.config.llm.base_url) {
                (None, None) => None,
                _ => Some(gateway(&project, mock)?),
            };
            runtime()?.block_on(evaluate::run(&project, &store, gw.as_ref(), mode))
        }
        Command::Report { also } => report::run(&store, &also),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).init();
    match run(cli) {
        Ok(()) => ExitCode::from(error::EXIT_OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error::exit_code(&e))
        }
    }
}
