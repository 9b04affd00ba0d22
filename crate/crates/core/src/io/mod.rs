//! Scenario files, run outputs and the command-line front end.

pub mod cli;
pub mod output;
pub mod scenario;

pub use output::{metrics_csv, trajectory_csv, write_metrics, write_run, write_trajectory, OutputError};
pub use scenario::{load_scenario, parse_scenario, serialize_scenario, ParseError, ScenarioError};
