//! Run configuration: a TOML file with `experiment`, `model`, `training` and
//! `report` sections. Every key is optional; unset keys take per-qubit-count
//! defaults.
//!
//! ```toml
//! [experiment]
//! n_qubits = 1
//! max_length = 32
//! shots = 10000
//! seed = 1
//! truth = { Gx = [0.1, 0.01], Gy = [0.15, 0.01] }
//!
//! [training]
//! epochs_per_part = [90, 100, 73, 100]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::AdamConfig;
use crate::bench::BaselineConfig;
use crate::models::ModelConfig;
use crate::params::{parametrized_kinds, ErrorParams, GateError, GateKind};
use crate::training::{LossKind, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub report: ReportSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_qubits: Option<usize>,
    pub max_length: Option<usize>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    /// Gate name → `[ε, p]`.
    pub truth: Option<BTreeMap<String, [f64; 2]>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub d_model: Option<usize>,
    pub n_heads: Option<usize>,
    pub n_layers: Option<usize>,
    pub ff_width: Option<usize>,
    pub group_size: Option<usize>,
    pub patch_size: Option<usize>,
    pub init_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs_per_part: Option<Vec<usize>>,
    pub curriculum: Option<bool>,
    pub lr: Option<f64>,
    pub lr_final_factor: Option<f64>,
    pub warmup_fraction: Option<f64>,
    pub clip_factor: Option<f64>,
    pub loss: Option<LossKind>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub baseline_loss: Option<LossKind>,
    pub baseline_max_iters: Option<usize>,
    pub baseline_lr: Option<f64>,
    pub bootstrap_resamples: Option<usize>,
    pub bootstrap_seed: Option<u64>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Ok(toml::from_str(&text)?)
    }

    pub fn n_qubits(&self) -> usize {
        self.experiment.n_qubits.unwrap_or(1)
    }

    pub fn max_length(&self) -> usize {
        self.experiment.max_length.unwrap_or(if self.n_qubits() == 1 { 32 } else { 16 })
    }

    pub fn shots(&self) -> u64 {
        self.experiment.shots.unwrap_or(if self.n_qubits() == 1 { 10_000 } else { 1_000 })
    }

    pub fn seed(&self) -> u64 {
        self.experiment.seed.unwrap_or(0)
    }

    /// Planted parameters; every parametrized gate must be listed.
    pub fn truth(&self) -> Result<ErrorParams, ConfigError> {
        let kinds = parametrized_kinds(self.n_qubits());
        let Some(map) = &self.experiment.truth else {
            return Err(ConfigError::Invalid("experiment.truth is required for simulation".into()));
        };
        for name in map.keys() {
            if !kinds.iter().any(|k| k.name() == name) {
                return Err(ConfigError::Invalid(format!("experiment.truth: unknown or unparametrized gate {name}")));
            }
        }
        let gates = kinds
            .iter()
            .map(|&k| {
                let [e, p] = map
                    .get(k.name())
                    .ok_or_else(|| ConfigError::Invalid(format!("experiment.truth lacks {}", k.name())))?;
                Ok((k, GateError { over_rotation: *e, depolarization: *p }))
            })
            .collect::<Result<Vec<(GateKind, GateError)>, ConfigError>>()?;
        ErrorParams::new(gates).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn model_config(&self, n_qubits: usize, max_len: usize) -> ModelConfig {
        let d = ModelConfig::with_defaults(n_qubits, max_len);
        let m = &self.model;
        let patch_size = m.patch_size.unwrap_or(d.patch_size);
        let l_pad = if n_qubits > 1 { max_len.max(1).div_ceil(patch_size) * patch_size } else { d.l_pad };
        ModelConfig {
            d_model: m.d_model.unwrap_or(d.d_model),
            n_heads: m.n_heads.unwrap_or(d.n_heads),
            n_layers: m.n_layers.unwrap_or(d.n_layers),
            ff_width: m.ff_width.unwrap_or(d.ff_width),
            group_size: m.group_size.unwrap_or(d.group_size),
            patch_size,
            l_pad,
            ..d
        }
    }

    pub fn train_config(&self, n_qubits: usize) -> TrainConfig {
        let d = TrainConfig::default_for(n_qubits);
        let t = &self.training;
        TrainConfig {
            epochs_per_part: t.epochs_per_part.clone().unwrap_or(d.epochs_per_part),
            curriculum: t.curriculum.unwrap_or(d.curriculum),
            adam: AdamConfig { lr: t.lr.unwrap_or(d.adam.lr), ..d.adam },
            lr_final_factor: t.lr_final_factor.unwrap_or(d.lr_final_factor),
            warmup_fraction: t.warmup_fraction.unwrap_or(d.warmup_fraction),
            clip_factor: t.clip_factor.unwrap_or(d.clip_factor),
            loss: t.loss.unwrap_or(d.loss),
            seed: t.seed.unwrap_or(d.seed),
        }
    }

    pub fn baseline_config(&self, n_qubits: usize) -> BaselineConfig {
        let d = BaselineConfig::default();
        let r = &self.report;
        let default_loss = if n_qubits == 1 { LossKind::WeightedMse } else { LossKind::Kl };
        BaselineConfig {
            loss: r.baseline_loss.unwrap_or(default_loss),
            max_iters: r.baseline_max_iters.unwrap_or(d.max_iters),
            lr: r.baseline_lr.unwrap_or(d.lr),
            ..d
        }
    }
}
