use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spinflow::model::ModelDoc;
use spinflow::{CyclicParams, ModelSpec};

use crate::CliError;

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_HORIZON: f64 = 5.0;
pub const DEFAULT_REPLICAS: u64 = 32;
pub const DEFAULT_RESOLUTION: f64 = 1e-3;
pub const DEFAULT_SAMPLE_EVERY: f64 = 1e-2;

/// A model given either as a full model document or as bare cyclic
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelInput {
    Doc(ModelDoc),
    Cyclic(CyclicParams),
}

impl ModelInput {
    pub fn build(&self) -> Result<ModelSpec, CliError> {
        let spec = match self {
            ModelInput::Doc(doc) => ModelSpec::try_from(doc.clone()),
            ModelInput::Cyclic(p) => ModelSpec::cyclic(p),
        };
        spec.map_err(|e| CliError::Config(format!("model: {e}")))
    }

    pub fn cyclic(&self) -> Option<&CyclicParams> {
        match self {
            ModelInput::Doc(ModelDoc::Cyclic { cyclic }) => Some(cyclic),
            ModelInput::Cyclic(p) => Some(p),
            _ => None,
        }
    }
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}
fn default_replicas() -> u64 {
    DEFAULT_REPLICAS
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION
}
fn default_step() -> f64 {
    spinflow::ode::DEFAULT_STEP
}
fn default_sample_every() -> f64 {
    DEFAULT_SAMPLE_EVERY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelInput,
    pub x0: Vec<f64>,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<u32>,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(rename = "J_range", default, skip_serializing_if = "Option::is_none")]
    pub j_range: Option<(f64, f64)>,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: f64,
    #[serde(default)]
    pub store_runs: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let spec = self.model.build()?;
        if self.x0.len() != spec.dim() {
            return bad(format!("x0 has {} components for a k = {} model", self.x0.len(), spec.dim()));
        }
        if self.x0.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return bad(format!("x0 = {:?} must lie in [0, 1]^k", self.x0));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("T must be positive, got {}", self.horizon));
        }
        if self.n_grid.is_empty() {
            return bad("N_grid must not be empty".into());
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) || self.n_grid[0] == 0 {
            return bad(format!("N_grid must be positive and strictly increasing, got {:?}", self.n_grid));
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return bad(format!("epsilon must lie in (0, 1/2), got {}", self.epsilon));
        }
        if !(self.step > 0.0 && self.step <= self.sample_every) {
            return bad(format!("need 0 < step <= sample_every, got {} and {}", self.step, self.sample_every));
        }
        if self.sample_every > spinflow::jump::MAX_SAMPLE_SPACING {
            return bad(format!(
                "sample_every must not exceed {}, got {}",
                spinflow::jump::MAX_SAMPLE_SPACING,
                self.sample_every
            ));
        }
        if let Some((lo, hi)) = self.j_range {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
                return bad(format!("J_range must satisfy 0 <= lo < hi, got ({lo}, {hi})"));
            }
        }
        if !(self.resolution > 0.0) {
            return bad(format!("resolution must be positive, got {}", self.resolution));
        }
        Ok(())
    }

    pub fn spec(&self) -> ModelSpec {
        self.model.build().expect("validated at load time")
    }

    pub fn largest_n(&self) -> u32 {
        *self.n_grid.last().expect("validated nonempty")
    }

    /// SHA-256 of the canonical JSON form, ignoring the output location.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = None;
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        hex(&Sha256::digest(bytes))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
