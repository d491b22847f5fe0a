//! Finite-difference solver for the terminal-value decoupling system on a
//! truncated box, plus discrete residuals and truncation studies.

mod field;
mod grid;
mod residual;
mod solver;

use thiserror::Error;

pub use field::{io, ThetaField};
pub use grid::Grid;
pub use residual::{pde_residual, truncation_study, PdeResidual, TruncationRow, TruncationTable, TruncationTemplate};
pub use solver::{
    check_compatible, solve_monodomain, solve_monodomain_with, solve_with_boundary, BoundaryData, SolverOptions,
    SpecBoundary,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PdeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("explicit reaction unstable: dt = {dt} exceeds 1/L with L = {cap}")]
    UnstableReaction { dt: f64, cap: f64 },
    #[error("linear solve failed at time level {level}: {detail}")]
    LinearSolve { level: usize, detail: String },
    #[error("non-finite value at time level {level}, node {node}")]
    NonFinite { level: usize, node: usize },
    #[error("invalid truncation study: {0}")]
    InvalidStudy(String),
    #[error("field I/O: {0}")]
    Io(String),
    #[error("field parse: {0}")]
    Parse(String),
}
