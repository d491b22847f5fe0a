//! Parallel four-step domain decomposition for coupled forward-backward SDEs.
//!
//! The pipeline mirrors the four-step scheme:
//!
//! 1. [`zsolver`] solves the algebraic equation `ξσ + σ̂(z) = 0`;
//! 2. [`pde`] solves the quasilinear decoupling system on a truncated box;
//! 3. [`schwarz`] splits the box into overlapping slabs and iterates
//!    subdomain solves with Jacobi trace exchange, then glues the result;
//! 4. [`sde`] simulates the forward SDE against the glued field and
//!    reconstructs `Y` and `Z` along the paths.
//!
//! [`cli`] wires these stages into config-driven experiments.

pub mod cli;
pub mod linalg;
pub mod model;
pub mod pde;
pub mod schwarz;
pub mod sde;
pub mod zsolver;
