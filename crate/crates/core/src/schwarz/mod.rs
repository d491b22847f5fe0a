//! Overlapping Schwarz waveform relaxation along the last coordinate.

mod glue;
mod iterate;
mod partition;
mod report;

use thiserror::Error;

use crate::pde::PdeError;

pub use glue::glue;
pub use iterate::{
    run_schwarz, schwarz_iterate, subdomain_errors, FaceTraces, Schedule, SchwarzState, StopCriteria, Trace,
};
pub use partition::{make_partition, theoretical_rate, Partition, Subdomain};
pub use report::{IterationRecord, SchwarzReport, StopReason};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SchwarzError {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("subdomain {index}: {source}")]
    Subdomain { index: usize, source: PdeError },
    #[error("state mismatch: {0}")]
    StateMismatch(String),
}
