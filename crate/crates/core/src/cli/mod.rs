//! Config-driven experiments: TOML ingestion, stage orchestration and
//! report files. The `fbsde` binary is a thin wrapper around [`execute`].

mod config;
mod emit;
mod pipeline;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{
    ExperimentConfig, Format, GridSection, OutputsSection, PartitionSection, ProblemSection, SchwarzSection,
    SdeSection, ValidatedConfig,
};
pub use emit::{
    emit_report, theta_summary_csv, ENSEMBLE_SUMMARY, MANIFEST, PATHS, REPORT_JSON, SCHWARZ_HISTORY, THETA_SUMMARY,
    TIMINGS,
};
pub use pipeline::{
    run_pipeline, Command, PipelineFailure, PipelineOutcome, Stage, ZSmoke, ENSEMBLE_CHUNK, Z_SMOKE_QUERIES,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Parse(String),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage {stage} failed: {message}")]
    Numeric { stage: &'static str, message: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for failures after validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric { .. } | CliError::Io(_) => 3,
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
}

/// Result of a successful [`execute`].
#[derive(Debug)]
pub struct Execution {
    pub outcome: PipelineOutcome,
    pub files: Vec<PathBuf>,
}

/// Loads, overrides and validates a config, runs `command` and writes the
/// report files. A failing stage still writes its manifest.
pub fn execute(config_path: &Path, command: Command, overrides: &Overrides) -> Result<Execution, CliError> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(seed) = overrides.seed {
        config.sde.seed = seed;
    }
    if let Some(format) = overrides.format {
        config.outputs.formats = vec![format];
    }
    if let Some(out) = &overrides.out {
        config.outputs.directory = out.to_string_lossy().into_owned();
    }
    execute_config(&config, command)
}

/// [`execute`] for an in-memory config.
pub fn execute_config(config: &ExperimentConfig, command: Command) -> Result<Execution, CliError> {
    let validated = config.validate()?;
    let dir = PathBuf::from(&config.outputs.directory);
    let formats = &config.outputs.formats;
    match run_pipeline(&validated, command) {
        Ok(outcome) => {
            let files = emit_report(config, command, Ok(&outcome), &dir, formats)?;
            Ok(Execution { outcome, files })
        }
        Err(failure) => {
            emit_report(config, command, Err(&failure), &dir, formats)?;
            Err(CliError::Numeric {
                stage: failure.stage.as_str(),
                message: failure.message,
            })
        }
    }
}
