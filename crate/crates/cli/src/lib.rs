//! Pipeline orchestration: configuration, stage runners, the run manifest
//! and report emission.

pub mod config;
pub mod pipeline;
pub mod report;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

pub use config::{PipelineConfig, ReportFormat};
pub use pipeline::{Manifest, Pipeline, Stage, StageIo};

#[derive(Debug, Parser)]
#[command(name = "wai", version, about = "Build the web-based affectedness indicator from archived firm websites")]
pub struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, short, global = true, default_value = "wai.toml")]
    pub config: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct IoArgs {
    /// Read the stage's primary input from here instead of the output directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Write the stage's primary output here instead of the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl From<IoArgs> for StageIo {
    fn from(a: IoArgs) -> Self {
        StageIo {
            input: a.input,
            output: a.output,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fetch index records and page captures for the sample firms (input: firm list).
    Ingest(IoArgs),
    /// Pull keyword-bearing paragraphs out of captured pages.
    Extract(IoArgs),
    /// Classify paragraphs with the configured backend.
    Classify(IoArgs),
    /// Firm-period indicators plus regional, industry and tag aggregates.
    Aggregate(IoArgs),
    /// Correlate regional series with policy stringency.
    Correlate(IoArgs),
    /// Assemble the firm-quarter panel.
    Panel(IoArgs),
    /// Run the configured regression specifications.
    Regress(IoArgs),
    /// Emit report files (input: stage directory, output: report directory).
    Report {
        #[command(flatten)]
        io: IoArgs,
        /// csv, json or svg-lines; repeatable. Defaults to the configured list.
        #[arg(long = "format")]
        formats: Vec<ReportFormat>,
    },
    /// Every stage enabled in the configuration, in order.
    RunAll,
}

pub fn run(cli: Cli) -> Result<Manifest> {
    let pipeline = Pipeline::new(PipelineConfig::load(&cli.config)?)?;
    let (stage, io) = match cli.command {
        Command::RunAll => return pipeline.run_all(),
        Command::Report { io, formats } => {
            let formats = (!formats.is_empty()).then_some(formats);
            return pipeline.run(&[Stage::Report], &io.into(), formats.as_deref());
        }
        Command::Ingest(io) => (Stage::Ingest, io),
        Command::Extract(io) => (Stage::Extract, io),
        Command::Classify(io) => (Stage::Classify, io),
        Command::Aggregate(io) => (Stage::Aggregate, io),
        Command::Correlate(io) => (Stage::Correlate, io),
        Command::Panel(io) => (Stage::Panel, io),
        Command::Regress(io) => (Stage::Regress, io),
    };
    pipeline.run(&[stage], &io.into(), None)
}
