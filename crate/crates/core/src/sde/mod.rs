//! Euler–Maruyama simulation of the forward equation against a decoupling
//! field, with `Y` and `Z` read off along the paths.

mod interp;
mod simulate;
mod summary;

use thiserror::Error;

use crate::zsolver::ZSolveError;

pub use interp::{interpolate_theta, FieldInterpolator};
pub use simulate::{
    bsde_residual, reconstruct_yz, simulate_forward, simulate_range, step_count, PathEnsemble, ResidualStats,
};
pub use summary::{paths_csv, summarize_ensemble, EnsembleSetup, EnsembleSummary, TimeRow};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SdeError {
    #[error("invalid simulation input: {0}")]
    InvalidInput(String),
    #[error("non-finite state on path {path} at step {step}")]
    NonFinite { path: u64, step: usize },
    #[error("z-equation failed on path {path} at step {step}: {source}")]
    ZSolve {
        path: u64,
        step: usize,
        source: ZSolveError,
    },
}
