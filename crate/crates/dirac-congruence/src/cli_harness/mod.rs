//! Command-line harness: configs, subcommands, reports and the acceptance scenarios.

mod commands;
pub mod config;
pub mod pipeline;
pub mod report;
pub mod scenarios;

pub use commands::{execute, Command, Invocation};
pub use config::{BranchSpec, InitialSpec, Overrides, RunConfig, SCHEMA_VERSION};
pub use report::{Check, Comparison, CriterionResult, RunReport};
pub use scenarios::{run_acceptance, ScenarioOptions};

use crate::covariance::CovarianceError;
use crate::observables::ObservablesError;
use crate::reference_solver::SolverError;
use crate::trajectory_engine::TrajectoryError;
use thiserror::Error;

/// Exit status when every check passed.
pub const EXIT_PASS: i32 = 0;
/// Exit status when a check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status for configuration, I/O and numerical errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("file format error at byte {offset}: {message}")]
    FileFormat { offset: usize, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        EXIT_ERROR
    }
}

impl From<SolverError> for HarnessError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::FileFormat { offset, message } => HarnessError::FileFormat { offset, message },
            SolverError::Io(e) => HarnessError::Io(e.to_string()),
            SolverError::GridMismatch(m) => HarnessError::ConfigInvalid(m),
            e @ SolverError::ResolutionError { .. } => HarnessError::Numerical(e.to_string()),
        }
    }
}

impl From<TrajectoryError> for HarnessError {
    fn from(e: TrajectoryError) -> Self {
        match e {
            TrajectoryError::StepTooLarge { .. } | TrajectoryError::Invalid(_) => {
                HarnessError::ConfigInvalid(e.to_string())
            }
            e => HarnessError::Numerical(e.to_string()),
        }
    }
}

impl From<CovarianceError> for HarnessError {
    fn from(e: CovarianceError) -> Self {
        match e {
            CovarianceError::EpsTooLarge { .. } | CovarianceError::Invalid(_) => {
                HarnessError::ConfigInvalid(e.to_string())
            }
            CovarianceError::Trajectory(t) => t.into(),
            e => HarnessError::Numerical(e.to_string()),
        }
    }
}

impl From<ObservablesError> for HarnessError {
    fn from(e: ObservablesError) -> Self {
        match e {
            ObservablesError::Solver(s) => s.into(),
            e => HarnessError::Numerical(e.to_string()),
        }
    }
}
