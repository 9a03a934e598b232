//! Command-line harness around `alsub-core`: TOML experiment configs in,
//! CSV and JSON results out.
//!
//! The three verbs map onto [`cmd_run`], [`cmd_compare`] and [`cmd_report`].

use std::path::PathBuf;

use alsub_core::compare::CompareError;
use alsub_core::engine::EngineError;
use thiserror::Error;

mod commands;
mod config;
mod output;
mod report;

pub use commands::{cmd_compare, cmd_run, CompareOutput, RunOutput};
pub use config::{config_from_str, config_to_toml, parse_config};
pub use output::{
    read_results, records_to_rows, render_comparison_csv, render_plot_data_csv, render_results_csv,
    PlotRow, ResultsRow, Summary, RESULTS_HEADER,
};
pub use report::{cmd_report, collect_report, render_report, ReportLine};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{path}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: EngineError,
    },
    #[error("configs are not comparable: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error("malformed results in {path}: {msg}")]
    Malformed { path: PathBuf, msg: String },
    #[error("no results found under {0}")]
    NoResults(PathBuf),
    #[error("serialization failed: {0}")]
    Serialize(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
