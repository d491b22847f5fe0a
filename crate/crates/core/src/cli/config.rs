use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{builtin_problem, ProblemSpec};
use crate::pde::{check_compatible, Grid};
use crate::schwarz::{make_partition, Partition};
use crate::sde::step_count;

use super::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub l: f64,
    pub nx: usize,
    pub nt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    #[serde(rename = "I")]
    pub count: usize,
    #[serde(rename = "S")]
    pub overlap: f64,
}

fn default_tolerance() -> f64 {
    1e-9
}
fn default_max_iter() -> usize {
    200
}
fn default_gamma() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchwarzSection {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_gamma")]
    pub gamma_for_rate: f64,
}

impl Default for SchwarzSection {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
            max_iter: default_max_iter(),
            gamma_for_rate: default_gamma(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSection {
    pub x0: Vec<f64>,
    pub dt: f64,
    #[serde(rename = "M")]
    pub paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub dump_paths: bool,
}

/// One experiment, read from TOML. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub partition: PartitionSection,
    #[serde(default)]
    pub schwarz: SchwarzSection,
    pub sde: SdeSection,
    pub outputs: OutputsSection,
}

/// A config whose every numeric precondition has been checked, together
/// with the objects built from it.
#[derive(Clone)]
pub struct ValidatedConfig {
    pub config: ExperimentConfig,
    pub spec: ProblemSpec,
    pub grid: Grid,
    pub partition: Partition,
    pub steps: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Checks everything the later stages will require and reports every
    /// violation at once.
    pub fn validate(&self) -> Result<ValidatedConfig, ConfigError> {
        let mut issues: Vec<String> = Vec::new();

        let spec = builtin_problem(&self.problem.name, &self.problem.params)
            .map_err(|e| issues.push(format!("problem: {e}")))
            .ok();

        let g = &self.grid;
        let grid = match &spec {
            Some(spec) => Grid::new(spec.n(), g.l, g.nx, g.nt, spec.horizon())
                .map_err(|e| issues.push(format!("grid: {e}")))
                .ok(),
            None => None,
        };
        if let (Some(spec), Some(grid)) = (&spec, &grid) {
            if let Err(e) = check_compatible(spec, grid) {
                issues.push(format!("grid: {e}"));
            }
        }

        let p = &self.partition;
        let partition = grid.as_ref().and_then(|grid| {
            make_partition(grid, p.count, p.overlap)
                .map_err(|e| issues.push(format!("partition: {e}")))
                .ok()
        });
        if grid.is_none() && (p.count < 2 || !(p.overlap > 0.0 && p.overlap < 2.0 * g.l / p.count.max(1) as f64)) {
            issues.push(format!("partition: need I >= 2 and 0 < S < 2l/I, got I = {}, S = {}", p.count, p.overlap));
        }

        let s = &self.schwarz;
        if !(s.tolerance >= 0.0 && s.tolerance.is_finite()) {
            issues.push(format!("schwarz.tolerance must be a finite number >= 0, got {}", s.tolerance));
        }
        if s.max_iter == 0 {
            issues.push("schwarz.max_iter must be >= 1".into());
        }
        if !(s.gamma_for_rate > 0.0 && s.gamma_for_rate.is_finite()) {
            issues.push(format!("schwarz.gamma_for_rate must be positive, got {}", s.gamma_for_rate));
        }

        let e = &self.sde;
        if let Some(spec) = &spec {
            if e.x0.len() != spec.n() {
                issues.push(format!("sde.x0 has {} entries, problem dimension is {}", e.x0.len(), spec.n()));
            }
        }
        if e.x0.iter().any(|v| !v.is_finite() || v.abs() > g.l) {
            issues.push(format!("sde.x0 must lie in the box [-{0}, {0}]", g.l));
        }
        let steps = match &spec {
            Some(spec) => step_count(spec.horizon(), e.dt)
                .map_err(|err| issues.push(format!("sde: {err}")))
                .ok(),
            None => None,
        };
        if e.paths == 0 {
            issues.push("sde.M must be >= 1".into());
        }

        let o = &self.outputs;
        if o.directory.trim().is_empty() {
            issues.push("outputs.directory must not be empty".into());
        }
        if o.formats.is_empty() {
            issues.push("outputs.formats must name at least one of csv, json".into());
        }
        let mut sorted = o.formats.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != o.formats.len() {
            issues.push("outputs.formats lists a format twice".into());
        }

        match (spec, grid, partition, steps) {
            (Some(spec), Some(grid), Some(partition), Some(steps)) if issues.is_empty() => Ok(ValidatedConfig {
                config: self.clone(),
                spec,
                grid,
                partition,
                steps,
            }),
            _ => Err(ConfigError::Invalid(issues)),
        }
    }
}
