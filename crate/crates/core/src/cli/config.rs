//! Run configuration: TOML schema, parsing and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{LatticeError, LatticePoint, Params, Vortex, VortexConfig};
use crate::linear::LinearSolveOptions;
use crate::scheme::SolveOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexEntry {
    pub point: Vec<i64>,
    #[serde(default = "default_multiplicity")]
    pub multiplicity: u32,
}

fn default_multiplicity() -> u32 {
    1
}

/// Which artifacts a command writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitFlags {
    pub field_csv: bool,
    pub trace_csv: bool,
    pub report_json: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self { field_csv: true, trace_csv: true, report_json: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub lambda: f64,
    pub a: f64,
    /// Iteration shift; `a * lambda + 1` when absent.
    #[serde(default, alias = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default)]
    pub vortices: Vec<VortexEntry>,
    pub radii: Vec<u64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_tol_nonlinear")]
    pub tol_nonlinear: f64,
    #[serde(default = "default_tol_linear")]
    pub tol_linear: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit: EmitFlags,
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_tol_nonlinear() -> f64 {
    1e-10
}
fn default_tol_linear() -> f64 {
    1e-12
}
fn default_max_steps() -> usize {
    10_000
}

/// A config that passed validation, converted to library types.
#[derive(Debug, Clone)]
pub struct Validated {
    pub params: Params,
    pub vortices: VortexConfig,
    pub solve: SolveOptions,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn largest_radius(&self) -> u64 {
        *self.radii.last().expect("validated radii are nonempty")
    }

    pub fn validate(&self) -> Result<Validated, ConfigError> {
        if !(2..=8).contains(&self.dimension) {
            return Err(invalid("dimension", format!("must be between 2 and 8, got {}", self.dimension)));
        }
        let k = self.k.unwrap_or(self.a * self.lambda + 1.0);
        let params = Params::new(self.lambda, self.a, k).map_err(|e| match e {
            LatticeError::InvalidParams(msg) if msg.starts_with("lambda") => invalid("lambda", msg),
            LatticeError::InvalidParams(msg) if msg.starts_with("a ") => invalid("a", msg),
            other => invalid("k", other.to_string()),
        })?;

        let entries = self
            .vortices
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if v.point.len() != self.dimension {
                    return Err(invalid(
                        "vortices",
                        format!("entry {i}: point has {} coordinates, dimension is {}", v.point.len(), self.dimension),
                    ));
                }
                Ok(Vortex { point: LatticePoint::new(v.point.clone()), multiplicity: v.multiplicity })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let vortices = VortexConfig::new(entries).map_err(|e| invalid("vortices", e.to_string()))?;

        if self.radii.is_empty() {
            return Err(invalid("radii", "at least one radius is required"));
        }
        if let Some(w) = self.radii.windows(2).find(|w| w[1] <= w[0]) {
            return Err(invalid("radii", format!("must be strictly increasing, found {} then {}", w[0], w[1])));
        }
        if self.radii[0] < vortices.min_radius() {
            return Err(invalid(
                "radii",
                format!(
                    "smallest radius {} must contain every vortex in its interior (needs at least {})",
                    self.radii[0],
                    vortices.min_radius()
                ),
            ));
        }
        if self.radii.iter().any(|&r| r > i64::MAX as u64) {
            return Err(invalid("radii", "radius out of range"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon", format!("must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.tol_nonlinear > 0.0 && self.tol_nonlinear.is_finite()) {
            return Err(invalid("tol_nonlinear", format!("must be positive, got {}", self.tol_nonlinear)));
        }
        if !(self.tol_linear > 0.0 && self.tol_linear.is_finite()) {
            return Err(invalid("tol_linear", format!("must be positive, got {}", self.tol_linear)));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be at least 1"));
        }

        let solve = SolveOptions {
            tol_nonlinear: self.tol_nonlinear,
            max_steps: self.max_steps,
            linear: LinearSolveOptions::default().with_tol(self.tol_linear),
            ..SolveOptions::default()
        };
        Ok(Validated { params, vortices, solve })
    }
}
