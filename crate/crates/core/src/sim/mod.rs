//! Scenario configuration, ground truth, the multirate simulator, logs and
//! metrics.

mod log;
mod metrics;
pub mod optimum;
mod runner;
mod scenario;

pub use log::{format_g9, Instrumentation, LogRecord, RunLog, CSV_COLUMNS};
pub use metrics::{box_entry, locate_optimum, Metrics};
pub use optimum::{optimum_offset, planar_optimum, worst_case_orientation};
pub use runner::{oracle, oracle_world, run, run_world, sweep, RunOutput, DIVERGENCE_LIMIT};
pub use scenario::{EmiConfig, OrientationMode, Rates, Scenario, World};

use thiserror::Error;

use crate::arva::ArvaError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("numeric divergence at t = {t} s: {detail}")]
    Divergence { t: f64, detail: String },
    #[error("sensor model failed: {0}")]
    Arva(#[from] ArvaError),
    #[error("invalid log: {0}")]
    InvalidLog(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::InvalidScenario(_) => 2,
            SimError::Divergence { .. } | SimError::Arva(_) => 3,
            SimError::InvalidLog(_) | SimError::Io(_) => 1,
        }
    }
}
