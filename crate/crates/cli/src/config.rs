//! Run configuration: a JSON document with `problem`, `solver`, `output`,
//! `sweep` and `envelope` sections, plus `key=value` overrides addressed by
//! dotted paths (`solver.grid_n=1024`, `problem.gamma=0.7`).

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use plap_core::singular::EnvelopeF;
use plap_core::weights::WeightFn;
use plap_core::{Interval, PExponent, ProblemSpec, SolverConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveLinear,
    SolveSingular,
    SolveF,
    Check,
    Eigen,
    Verify,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolveLinear => "solve-linear",
            Command::SolveSingular => "solve-singular",
            Command::SolveF => "solve-f",
            Command::Check => "check",
            Command::Eigen => "eigen",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
        }
    }
}

/// Either a catalog entry (with optional `p`, `gamma`) or an explicit
/// `{omega, p, gamma, m}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<WeightFn>,
}

impl ProblemSource {
    pub fn resolve(&self) -> Result<ProblemSpec, CliError> {
        self.resolve_with(self.p, self.gamma)
    }

    /// Resolve with `p` and `gamma` replaced (used by sweeps).
    pub fn resolve_with(&self, p: Option<f64>, gamma: Option<f64>) -> Result<ProblemSpec, CliError> {
        if self.catalog.is_some() && (self.omega.is_some() || self.m.is_some()) {
            return Err(CliError::Input(
                "problem: give either 'catalog' or 'omega'/'m', not both".into(),
            ));
        }
        match (&self.catalog, &self.m) {
            (Some(name), _) => catalog::problem(name, p, gamma),
            (None, Some(m)) => {
                let omega = self.omega.unwrap_or_else(|| m.domain());
                let p = p.ok_or_else(|| CliError::Input("problem.p is required".into()))?;
                let gamma = gamma.ok_or_else(|| CliError::Input("problem.gamma is required".into()))?;
                Ok(ProblemSpec::new(omega, PExponent::new(p)?, gamma, m.clone())?)
            }
            (None, None) => Err(CliError::Input("problem: missing 'catalog' or 'm'".into())),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default)]
    pub json_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub gamma_grid: Vec<f64>,
    pub p_grid: Vec<f64>,
    #[serde(default = "one")]
    pub parallel: usize,
}

fn one() -> usize {
    1
}

/// A profile to audit: a CSV with columns `x,v,v_prime` on a uniform grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateConfig {
    pub csv_path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub problem: ProblemSource,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeF>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<CandidateConfig>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let mut doc: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut cfg = Self::from_value(doc)?;
        // relative paths in the file are relative to the file
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.output.csv_path, &mut cfg.output.json_path].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
            if let Some(c) = cfg.candidate.as_mut() {
                if c.csv_path.is_relative() {
                    c.csv_path = dir.join(&c.csv_path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_value(doc: Value) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_path_to_error::deserialize(doc)
            .map_err(|e| CliError::Input(format!("config: at '{}': {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.solver
            .validate()
            .map_err(|e| CliError::Input(format!("solver: {e}")))?;
        if self.solver.grid_n < 64 {
            return Err(CliError::Input(format!(
                "solver.grid_n must be at least 64, got {}",
                self.solver.grid_n
            )));
        }
        if let Some(s) = &self.sweep {
            if s.gamma_grid.is_empty() || s.p_grid.is_empty() {
                return Err(CliError::Input("sweep: gamma_grid and p_grid must be nonempty".into()));
            }
            if s.parallel == 0 {
                return Err(CliError::Input("sweep.parallel must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Apply `a.b.c=value`, parsing `value` as JSON and falling back to a string.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Input(format!("override '{spec}' is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Input(format!("override key '{key}' has an empty segment")));
        }
        if !node.is_object() {
            return Err(CliError::Input(format!("override '{key}': '{part}' is below a non-object")));
        }
        let map = node.as_object_mut().expect("checked object");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
