//! Problem specifications, the built-in registry, and sampled checks of the
//! standing assumptions (A1)–(A5).

mod builtins;
mod spec;
mod validate;

use thiserror::Error;

pub use builtins::{builtin_problem, BUILTIN_NAMES};
pub use spec::{
    AssumptionBounds, AssumptionFlags, BackwardDiffusionForm, BackwardDiffusionMap, CoefficientMap, FieldMap,
    GradientMap, LinearOperatorMap, ProblemSpec, ProblemSpecBuilder, ScalarBound, TerminalMap,
};
pub use validate::{validate_assumptions, AssumptionCheck, AssumptionId, AssumptionReport, CheckStatus, ProbePlan, Witness};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("problem `{problem}`: parameter `{key}`: {reason}")]
    InvalidParam {
        problem: String,
        key: String,
        reason: String,
    },
    #[error("invalid probe plan: {0}")]
    InvalidProbe(String),
    #[error("coefficient `{map}` is not finite at {witness}")]
    NonFinite { map: &'static str, witness: Witness },
}
