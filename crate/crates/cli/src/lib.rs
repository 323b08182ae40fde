//! Config parsing, scenario dispatch and report writing for the `ifs-lab`
//! command.

pub mod config;
pub mod error;
pub mod render;
pub mod report;
pub mod run;

pub use config::{RawConfig, RunConfig, Scenario, ScenarioKind};
pub use error::{CliError, Result};
pub use report::{write_report, Image, ReportBundle, RunInfo, Table};
pub use run::{execute, run_config, Options};
