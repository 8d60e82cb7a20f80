//! Transformer estimators mapping a group of (tokenized circuit, frequency)
//! pairs to gate error parameters.
//!
//! The single-qubit model fuses the gate-sequence branch and the probability
//! branch with cross attention, then runs a 1D post-norm encoder. The
//! multi-qubit model treats the stacked token rows as an image, patchifies it
//! and conditions every block on the probabilities through adaLN-zero.

mod layers;
mod one_qubit;
mod two_qubit;

pub use layers::{attention_weights, patch_indices, positional_encoding_1d, positional_encoding_2d};

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{load_checkpoint, save_checkpoint, AdError, Graph, ParamStore, Rng, Var};
use crate::experiment::{TokenizedCircuit, Vocabulary};
use crate::params::{parametrized_kinds, ErrorParams, GateKind};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("invalid model input: {0}")]
    Input(String),
    #[error(transparent)]
    Ad(#[from] AdError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_qubits: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub ff_width: usize,
    pub group_size: usize,
    /// Patch edge length; used by the multi-qubit model only.
    pub patch_size: usize,
    pub vocab_size: usize,
    pub l_pad: usize,
}

impl ModelConfig {
    /// Default sizes for data with circuits up to `max_len` gates.
    /// For multi-qubit models `l_pad` is rounded up to a multiple of the patch size.
    pub fn with_defaults(n_qubits: usize, max_len: usize) -> Self {
        let patch_size = 2;
        let l_pad = if n_qubits > 1 { max_len.max(1).div_ceil(patch_size) * patch_size } else { max_len.max(1) };
        ModelConfig {
            n_qubits,
            d_model: 64,
            n_heads: 4,
            n_layers: 3,
            ff_width: 128,
            group_size: 8,
            patch_size,
            vocab_size: Vocabulary::for_qubits(n_qubits).size(),
            l_pad,
        }
    }

    pub fn kinds(&self) -> Vec<GateKind> {
        parametrized_kinds(self.n_qubits)
    }

    /// Number of scalar outputs, `2·n_kinds`.
    pub fn n_outputs(&self) -> usize {
        2 * self.kinds().len()
    }

    pub fn n_outcomes(&self) -> usize {
        1 << self.n_qubits
    }

    /// Token rows per circuit.
    pub fn rows_per_circuit(&self) -> usize {
        if self.n_qubits == 1 {
            1
        } else {
            self.n_qubits
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::Config(m));
        if !(1..=2).contains(&self.n_qubits) {
            return err(format!("models support 1 or 2 qubits, got {}", self.n_qubits));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return err(format!("d_model {} not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.group_size == 0 || self.l_pad == 0 || self.ff_width == 0 {
            return err("group_size, l_pad and ff_width must be positive".into());
        }
        if self.vocab_size < Vocabulary::for_qubits(self.n_qubits).size() {
            return err(format!("vocab_size {} too small for {} qubits", self.vocab_size, self.n_qubits));
        }
        if self.n_qubits == 1 {
            if self.d_model % 2 != 0 {
                return err(format!("d_model {} must be even", self.d_model));
            }
        } else {
            if self.d_model % 4 != 0 {
                return err(format!("d_model {} must be divisible by 4", self.d_model));
            }
            let h = self.group_size * self.n_qubits;
            let p = self.patch_size;
            if p == 0 || h % p != 0 || self.l_pad % p != 0 {
                return err(format!("patch size {p} must divide the {h}×{} token grid", self.l_pad));
            }
        }
        Ok(())
    }
}

/// One model input: `group_size` tokenized circuits and their frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupInput {
    pub tokens: Vec<TokenizedCircuit>,
    pub freqs: Vec<Vec<f64>>,
}

impl GroupInput {
    pub fn validate(&self, config: &ModelConfig) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Input(m));
        if self.tokens.len() != config.group_size || self.freqs.len() != config.group_size {
            return bad(format!(
                "expected {} circuits, got {} token rows and {} frequency rows",
                config.group_size,
                self.tokens.len(),
                self.freqs.len()
            ));
        }
        for t in &self.tokens {
            if t.rows.len() != config.rows_per_circuit() || t.rows.iter().any(|r| r.len() != config.l_pad) {
                return bad(format!(
                    "token block must be {}×{}, got {}×{}",
                    config.rows_per_circuit(),
                    config.l_pad,
                    t.rows.len(),
                    t.padded_len()
                ));
            }
            if let Some(&tok) = t.rows.iter().flatten().find(|&&v| v as usize >= config.vocab_size) {
                return bad(format!("token {tok} outside vocabulary of size {}", config.vocab_size));
            }
        }
        for f in &self.freqs {
            if f.len() != config.n_outcomes() {
                return bad(format!("expected {} frequencies per circuit, got {}", config.n_outcomes(), f.len()));
            }
            if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 || f.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return bad("frequencies must be a probability vector".into());
            }
        }
        Ok(())
    }

    fn flat_freqs(&self) -> Vec<f64> {
        self.freqs.iter().flatten().cloned().collect()
    }
}

/// A model: config plus parameters.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
}

/// Graph leaves for every parameter of a model.
pub(crate) struct Bound {
    vars: HashMap<String, Var>,
}

impl Bound {
    pub(crate) fn new(g: &mut Graph, store: &ParamStore) -> Result<Self, AdError> {
        let mut vars = HashMap::with_capacity(store.len());
        for name in store.names() {
            vars.insert(name.clone(), g.param(store, name)?);
        }
        Ok(Bound { vars })
    }

    pub(crate) fn get(&self, name: &str) -> Result<Var, AdError> {
        self.vars.get(name).copied().ok_or_else(|| AdError::UnknownParam(name.to_string()))
    }
}

impl Model {
    /// Freshly initialized model; identical seeds give identical parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        if config.n_qubits == 1 {
            one_qubit::init(&config, &mut params, &mut rng);
        } else {
            two_qubit::init(&config, &mut params, &mut rng);
        }
        Ok(Model { config, params })
    }

    /// Records the forward pass, returning the `[1, 2·n_kinds]` output laid out
    /// as [`ErrorParams::to_flat`].
    pub fn forward(&self, g: &mut Graph, input: &GroupInput) -> Result<Var, ModelError> {
        Ok(self.forward_traced(g, input)?.0)
    }

    /// Like [`Model::forward`], also returning the (input, output) of every
    /// transformer block.
    pub fn forward_traced(&self, g: &mut Graph, input: &GroupInput) -> Result<(Var, Vec<(Var, Var)>), ModelError> {
        input.validate(&self.config)?;
        let p = Bound::new(g, &self.params)?;
        let r = if self.config.n_qubits == 1 {
            one_qubit::forward(&self.config, g, &p, input)
        } else {
            two_qubit::forward(&self.config, g, &p, input)
        };
        Ok(r?)
    }

    /// Output as plain values.
    pub fn predict_flat(&self, input: &GroupInput) -> Result<Vec<f64>, ModelError> {
        let mut g = Graph::new();
        let out = self.forward(&mut g, input)?;
        Ok(g.value(out).iter().cloned().collect())
    }

    pub fn predict(&self, input: &GroupInput) -> Result<ErrorParams, ModelError> {
        let flat = self.predict_flat(input)?;
        ErrorParams::from_flat(&self.config.kinds(), &flat).map_err(|e| ModelError::Input(e.to_string()))
    }

    /// Writes the parameters with the config in the checkpoint manifest.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let meta = serde_json::json!({ "model_config": self.config });
        save_checkpoint(path, &self.params, meta)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let (params, meta) = load_checkpoint(path, None)?;
        let config: ModelConfig = serde_json::from_value(meta["model_config"].clone())
            .map_err(|e| ModelError::Config(format!("checkpoint manifest lacks a model config: {e}")))?;
        let template = Model::new(config.clone(), 0)?;
        if template.params.names() != params.names()
            || template.params.iter().zip(params.iter()).any(|((_, a), (_, b))| a.shape() != b.shape())
        {
            return Err(ModelError::Config("checkpoint parameters do not match its model config".into()));
        }
        Ok(Model { config, params })
    }
}
