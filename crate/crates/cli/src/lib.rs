//! Scenario runner for `bicontact-core`.
//!
//! A scenario is a TOML file naming one pipeline (`kind`) and its
//! parameters. Running it produces a [`RunReport`]: every check with its
//! margin, threshold and witness, plus named scalar outputs. Exit status is
//! 0 when every check passes, 1 when the file does not parse, 2 when a
//! parameter violates a precondition, 3 when a check fails and 4 when the
//! report cannot be written.

use std::time::Instant;

use thiserror::Error;

pub mod examples;
pub mod output;
pub mod pipeline;
pub mod scenario;

pub use output::RunReport;
pub use scenario::Scenario;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Parse(_) => 1,
            RunError::Precondition(_) => 2,
            RunError::Output(_) => 4,
        }
    }
}

/// Exit status for a finished run.
pub const CHECK_FAILURE: i32 = 3;

pub fn run_scenario(scenario: Scenario) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let report = pipeline::run_pipeline(&scenario)?;
    Ok(RunReport::new(scenario, report, start.elapsed().as_secs_f64()))
}

/// Parse and run TOML source.
pub fn run_source(text: &str) -> Result<RunReport, RunError> {
    run_scenario(Scenario::from_toml(text)?)
}
