//! Data ingestion, configuration and week-level orchestration for the
//! `cojump` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod weeks;

pub use commands::{run, Cli, Command};
pub use config::{RunConfig, OUT_DIR_ENV};
pub use error::{CliError, CliResult};
pub use ingest::{ingest_csv, ingest_reader, Tick, TickSeries};
pub use pipeline::{run_pipeline, write_pipeline_outputs, PipelineOutput, SweepRow, WeekRecord};
pub use weeks::{to_weekly_paths, WeekGrouping, WeekPath, WeeklyPaths};
