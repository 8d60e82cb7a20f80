//! Grouping, curriculum schedules, losses and the training loop.

mod curriculum;
mod loss;

pub use curriculum::{curriculum_partition, group_dataset, group_indices, single_part, CurriculumSchedule, Group};
pub use loss::{
    evaluate_loss, loss_chi2, loss_graph, loss_kl, loss_neg_log_likelihood, loss_weighted_mse, LossKind, PROB_EPS,
    SIGMA_FLOOR,
};

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, IxDyn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, AdamConfig, AdError, Array, Graph, ParamStore, Var};
use crate::circuit::{Circuit, GateLabel};
use crate::experiment::{tokenize_padded, Dataset, ExperimentError, TokenizedCircuit};
use crate::models::{GroupInput, Model, ModelError};
use crate::params::{ErrorParams, GateKind};
use crate::ptm::{GateSetJacobian, PtmError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training setup: {0}")]
    Config(String),
    #[error("loss became non-finite at epoch {epoch}, step {step}; lower the learning rate")]
    Diverged { epoch: usize, step: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Ptm(#[from] PtmError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// One entry per curriculum part.
    pub epochs_per_part: Vec<usize>,
    /// When false, the whole dataset is trained as one part for the summed epochs.
    pub curriculum: bool,
    pub adam: AdamConfig,
    /// Learning rate decays by cosine within each part down to `lr · lr_final_factor`.
    pub lr_final_factor: f64,
    /// Fraction of each part's steps spent ramping the learning rate up
    /// linearly from `lr · lr_final_factor` before the cosine decay.
    pub warmup_fraction: f64,
    /// Each step's gradient norm is clipped to `clip_factor` times a running
    /// average of recent (clipped) norms. 0 disables clipping.
    pub clip_factor: f64,
    pub loss: LossKind,
    pub seed: u64,
}

impl TrainConfig {
    pub fn default_for(n_qubits: usize) -> Self {
        let (epochs_per_part, loss) =
            if n_qubits == 1 { (vec![90, 100, 73, 100], LossKind::WeightedMse) } else { (vec![60, 60, 100], LossKind::Kl) };
        TrainConfig {
            epochs_per_part,
            curriculum: true,
            adam: AdamConfig::default(),
            lr_final_factor: 0.05,
            warmup_fraction: 0.05,
            clip_factor: 2.0,
            loss,
            seed: 0,
        }
    }

    pub fn schedule(&self, dataset: &Dataset) -> Result<CurriculumSchedule, TrainError> {
        if !(self.lr_final_factor > 0.0 && self.lr_final_factor <= 1.0) || !(self.adam.lr > 0.0) {
            return Err(TrainError::Config("learning rate and final factor must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(TrainError::Config("warmup fraction must lie in [0, 1)".into()));
        }
        if !(self.clip_factor == 0.0 || self.clip_factor > 1.0) {
            return Err(TrainError::Config("clip factor must be 0 or greater than 1".into()));
        }
        if self.curriculum {
            curriculum_partition(dataset, &self.epochs_per_part)
        } else {
            single_part(dataset, self.epochs_per_part.iter().sum())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub part: usize,
    /// Mean group loss over the epoch.
    pub loss: f64,
    /// Mean model output over the epoch's groups, flat layout.
    pub params: Vec<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub param_names: Vec<String>,
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    /// `epoch,part,loss,<params…>`; wall time is left out so reruns are identical.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,part,loss");
        for n in &self.param_names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for r in &self.records {
            write!(s, "{},{},{:.17e}", r.epoch, r.part, r.loss).expect("string write");
            for v in &r.params {
                write!(s, ",{v:.17e}").expect("string write");
            }
            s.push('\n');
        }
        s
    }

    pub fn final_params(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.params.as_slice())
    }
}

fn distinct_labels<'a>(circuits: impl IntoIterator<Item = &'a Circuit>) -> Vec<GateLabel> {
    let mut labels: Vec<GateLabel> = circuits.into_iter().flat_map(|c| c.labels().iter().cloned()).collect();
    labels.sort();
    labels.dedup();
    labels
}

/// Appends the outcome probabilities of `circuits` under the flat parameters held
/// in `params` (shape `[1, 2·kinds]`), differentiable with respect to them.
/// Returns a `[circuits, outcomes]` node.
pub fn reconstruct_probabilities(
    g: &mut Graph,
    n_qubits: usize,
    kinds: &[GateKind],
    params: Var,
    circuits: &[&Circuit],
) -> Result<Var, TrainError> {
    let flat: Vec<f64> = g.value(params).iter().cloned().collect();
    let ep = ErrorParams::from_flat(kinds, &flat).map_err(|e| TrainError::Config(e.to_string()))?;
    let labels = distinct_labels(circuits.iter().copied());
    let gs = GateSetJacobian::new(n_qubits, &ep, &labels)?;
    let n_out = 1 << n_qubits;
    let mut values = Vec::with_capacity(circuits.len() * n_out);
    let mut jac = Array2::zeros((circuits.len() * n_out, flat.len()));
    for (c, circuit) in circuits.iter().enumerate() {
        let (p, j) = gs.probabilities_and_jacobian(circuit)?;
        values.extend(p);
        for b in 0..n_out {
            for k in 0..flat.len() {
                jac[(c * n_out + b, k)] = j[(b, k)];
            }
        }
    }
    let value = Array::from_shape_vec(IxDyn(&[circuits.len(), n_out]), values).expect("sized");
    Ok(g.apply_jacobian(params, value, jac)?)
}

/// Model forward pass followed by probability reconstruction of the group's
/// circuits. Returns the `(output, probabilities)` nodes.
pub fn predict_and_reconstruct(
    model: &Model,
    g: &mut Graph,
    input: &GroupInput,
    circuits: &[&Circuit],
) -> Result<(Var, Var), TrainError> {
    let out = model.forward(g, input)?;
    let probs = reconstruct_probabilities(g, model.config.n_qubits, &model.config.kinds(), out, circuits)?;
    Ok((out, probs))
}

/// Tokens padded to the model's width, after checking that model and data agree.
pub fn tokens_for(model: &Model, dataset: &Dataset) -> Result<Vec<TokenizedCircuit>, TrainError> {
    if dataset.n_qubits != model.config.n_qubits {
        return Err(TrainError::Config(format!(
            "model is for {} qubits but the dataset has {}",
            model.config.n_qubits, dataset.n_qubits
        )));
    }
    dataset.validate()?;
    Ok(tokenize_padded(dataset, model.config.l_pad)?.0)
}

struct Prepared<'a> {
    group: &'a Group,
    input: GroupInput,
}

/// Loss of the model on one group and its gradient accumulated into the model's
/// parameter store. Returns `(loss, output)`.
fn group_step(
    model: &mut Model,
    dataset: &Dataset,
    prep: &Prepared<'_>,
    loss: LossKind,
) -> Result<(f64, Vec<f64>), TrainError> {
    let mut g = Graph::new();
    let circuits: Vec<&Circuit> = prep.group.indices.iter().map(|&i| &dataset.circuits[i]).collect();
    let (out, probs) = predict_and_reconstruct(model, &mut g, &prep.input, &circuits)?;
    let shots: Vec<u64> = prep.group.indices.iter().map(|&i| dataset.shots[i]).collect();
    let l = loss_graph(&mut g, loss, probs, &prep.input.freqs, &shots)?;
    let value = g.scalar(l);
    let grads = g.backward(l)?;
    model.params.accumulate(&g, &grads)?;
    Ok((value, g.value(out).iter().cloned().collect()))
}

/// Gradient-norm clipping against a running average of recent norms, so a
/// sudden jump in gradient scale (e.g. at a curriculum part boundary) is let
/// through gradually.
#[derive(Debug, Clone)]
pub struct NormClip {
    factor: f64,
    avg: Option<f64>,
}

impl NormClip {
    const DECAY: f64 = 0.98;

    pub fn new(factor: f64) -> Self {
        NormClip { factor, avg: None }
    }

    /// Clips the gradients held by `params` in place; returns the norm after clipping.
    pub fn apply(&mut self, params: &mut ParamStore) -> f64 {
        let norm = params.grad_norm();
        if self.factor == 0.0 || !norm.is_finite() {
            return norm;
        }
        let kept = match self.avg {
            Some(avg) if norm > self.factor * avg => {
                params.scale_grads(self.factor * avg / norm);
                self.factor * avg
            }
            _ => norm,
        };
        self.avg = Some(self.avg.map_or(kept, |avg| Self::DECAY * avg + (1.0 - Self::DECAY) * kept));
        kept
    }
}

/// Learning rate at fraction `t ∈ [0, 1)` of a part: linear warmup from
/// `lr · lr_final_factor` to `lr`, then cosine decay back down.
pub fn learning_rate(config: &TrainConfig, t: f64) -> f64 {
    let (hi, w) = (config.adam.lr, config.warmup_fraction);
    let lo = hi * config.lr_final_factor;
    if t < w {
        return lo + (hi - lo) * t / w;
    }
    let t = (t - w) / (1.0 - w);
    lo + 0.5 * (hi - lo) * (1.0 + (std::f64::consts::PI * t).cos())
}

/// Trains `model` in place following `config`.
pub fn train(model: &mut Model, dataset: &Dataset, config: &TrainConfig) -> Result<TrainLog, TrainError> {
    let schedule = config.schedule(dataset)?;
    train_schedule(model, dataset, &schedule, config)
}

/// Trains through the parts of `schedule`, one optimizer step per group, with
/// group order reshuffled every epoch.
pub fn train_schedule(
    model: &mut Model,
    dataset: &Dataset,
    schedule: &CurriculumSchedule,
    config: &TrainConfig,
) -> Result<TrainLog, TrainError> {
    let tokens = tokens_for(model, dataset)?;
    if schedule.parts.len() != schedule.epochs_per_part.len() {
        return Err(TrainError::Config("schedule parts and epoch counts differ in length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = Adam::new(config.adam);
    let started = Instant::now();
    let kinds = model.config.kinds();
    let mut log = TrainLog { param_names: ErrorParams::flat_names(&kinds), records: Vec::new() };
    let mut epoch = 0;
    let mut clip = NormClip::new(config.clip_factor);
    for (part, (indices, &epochs)) in schedule.parts.iter().zip(&schedule.epochs_per_part).enumerate() {
        let groups = group_indices(indices, model.config.group_size)?;
        let prepared: Vec<Prepared<'_>> =
            groups.iter().map(|group| Prepared { group, input: group.input(dataset, &tokens) }).collect();
        let total_steps = (epochs * prepared.len()).max(1) as f64;
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        let mut step_in_part = 0usize;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut out_sum = vec![0.0; kinds.len() * 2];
            for (step, &gi) in order.iter().enumerate() {
                opt.set_lr(learning_rate(config, step_in_part as f64 / total_steps));
                let (l, out) = group_step(model, dataset, &prepared[gi], config.loss)?;
                if !l.is_finite() {
                    return Err(TrainError::Diverged { epoch, step });
                }
                clip.apply(&mut model.params);
                opt.step(&mut model.params)?;
                loss_sum += l;
                out_sum.iter_mut().zip(&out).for_each(|(a, b)| *a += b);
                step_in_part += 1;
            }
            let n = prepared.len() as f64;
            log.records.push(EpochRecord {
                epoch,
                part,
                loss: loss_sum / n,
                params: out_sum.iter().map(|v| v / n).collect(),
                wall_time_s: started.elapsed().as_secs_f64(),
            });
            epoch += 1;
        }
    }
    Ok(log)
}

/// Point estimate from a trained model: the mean prediction over the groups
/// of the whole dataset.
pub fn estimate(model: &Model, dataset: &Dataset) -> Result<ErrorParams, TrainError> {
    let tokens = tokens_for(model, dataset)?;
    let groups = group_dataset(dataset, model.config.group_size)?;
    let mut sum = vec![0.0; model.config.n_outputs()];
    for group in &groups {
        let out = model.predict_flat(&group.input(dataset, &tokens))?;
        sum.iter_mut().zip(&out).for_each(|(a, b)| *a += b);
    }
    let mean: Vec<f64> = sum.iter().map(|v| v / groups.len() as f64).collect();
    ErrorParams::from_flat(&model.config.kinds(), &mean).map_err(|e| TrainError::Config(e.to_string()))
}

/// Loads a checkpoint and continues training on `dataset`.
pub fn transfer_learn(checkpoint: &Path, dataset: &Dataset, config: &TrainConfig) -> Result<(Model, TrainLog), TrainError> {
    let mut model = Model::load(checkpoint)?;
    let longest = dataset.circuits.iter().map(Circuit::len).max().unwrap_or(0);
    if longest > model.config.l_pad {
        return Err(TrainError::Config(format!(
            "checkpoint pads circuits to {} gates but the dataset has a circuit of {longest}",
            model.config.l_pad
        )));
    }
    let log = train(&mut model, dataset, config)?;
    Ok((model, log))
}
