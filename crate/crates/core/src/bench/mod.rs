//! Direct-fit baseline, evaluation metrics and report artifacts.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, AdamConfig, Graph, ParamStore};
use crate::circuit::Circuit;
use crate::experiment::{resample, Dataset};
use crate::params::{parametrized_kinds, ErrorParams, GateError, GateKind};
use crate::ptm::{circuit_probabilities, GateSet, Ptm, PtmError};
use crate::training::{evaluate_loss, loss_graph, reconstruct_probabilities, LossKind, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub loss: LossKind,
    pub max_iters: usize,
    pub lr: f64,
    /// Cosine decay of the learning rate down to `lr · lr_final_factor`.
    pub lr_final_factor: f64,
    /// Stop once the gradient norm of the per-circuit mean loss falls below this.
    pub grad_tol: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { loss: LossKind::WeightedMse, max_iters: 3000, lr: 1e-2, lr_final_factor: 1e-4, grad_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineFit {
    pub params: ErrorParams,
    pub iterations: usize,
    pub grad_norm: f64,
    pub loss: f64,
}

/// Starting depolarization when no initial point is given; starting in the
/// flat tail of the sigmoid stalls the fit.
const DEFAULT_P_INIT: f64 = 0.01;

/// Smallest depolarization used when mapping an initial point to logits.
const P_MIN: f64 = 1e-8;

fn logit(p: f64) -> f64 {
    let p = p.clamp(P_MIN, 1.0 - P_MIN);
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fits the error parameters directly by Adam on `(ε, logit p)`, with no network.
pub fn baseline_fit(
    dataset: &Dataset,
    init: Option<&ErrorParams>,
    config: &BaselineConfig,
) -> Result<BaselineFit, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::Config("cannot fit an empty dataset".into()));
    }
    dataset.validate()?;
    let kinds = parametrized_kinds(dataset.n_qubits);
    let k = kinds.len();
    let start = match init {
        Some(p) => ErrorParams::from_flat(&kinds, &reorder(p, &kinds)?).map_err(|e| TrainError::Config(e.to_string()))?,
        None => ErrorParams::uniform(&kinds, 0.0, DEFAULT_P_INIT),
    };
    let flat = start.to_flat();
    let theta: Vec<f64> = flat[..k].iter().cloned().chain(flat[k..].iter().map(|&p| logit(p))).collect();
    let mut store = ParamStore::new();
    store.insert("theta", ndarray::Array::from_shape_vec(ndarray::IxDyn(&[1, 2 * k]), theta).expect("sized"));
    let mut opt = Adam::new(AdamConfig { lr: config.lr, ..AdamConfig::default() });
    let circuits: Vec<&Circuit> = dataset.circuits.iter().collect();
    let freqs = dataset.all_frequencies();
    let scale = 1.0 / dataset.len() as f64;

    let mut grad_norm = f64::INFINITY;
    let mut loss = f64::NAN;
    let mut iterations = 0;
    for it in 0..config.max_iters {
        let mut g = Graph::new();
        let th = g.param(&store, "theta")?;
        let eps = g.slice(th, 1, 0, k)?;
        let praw = g.slice(th, 1, k, 2 * k)?;
        let p = g.sigmoid(praw);
        let params = g.concat(&[eps, p], 1)?;
        let probs = reconstruct_probabilities(&mut g, dataset.n_qubits, &kinds, params, &circuits)?;
        let l = loss_graph(&mut g, config.loss, probs, &freqs, &dataset.shots)?;
        let l = g.scale(l, scale);
        loss = g.scalar(l);
        if !loss.is_finite() {
            return Err(TrainError::Diverged { epoch: 0, step: it });
        }
        let grads = g.backward(l)?;
        store.accumulate(&g, &grads)?;
        grad_norm = store.grad("theta")?.expect("accumulated").iter().map(|v| v * v).sum::<f64>().sqrt();
        iterations = it;
        if grad_norm < config.grad_tol {
            store.zero_grad();
            break;
        }
        let t = it as f64 / config.max_iters.max(1) as f64;
        let lo = config.lr * config.lr_final_factor;
        opt.set_lr(lo + 0.5 * (config.lr - lo) * (1.0 + (std::f64::consts::PI * t).cos()));
        opt.step(&mut store)?;
        iterations = it + 1;
    }
    let th = store.value("theta")?;
    let out: Vec<f64> = (0..k).map(|i| th[[0, i]]).chain((0..k).map(|i| sigmoid(th[[0, k + i]]))).collect();
    let params = ErrorParams::from_flat(&kinds, &out).map_err(|e| TrainError::Config(e.to_string()))?;
    Ok(BaselineFit { params, iterations, grad_norm, loss })
}

/// Flat values of `p` in the order of `kinds`.
fn reorder(p: &ErrorParams, kinds: &[GateKind]) -> Result<Vec<f64>, TrainError> {
    let mut eps = Vec::with_capacity(kinds.len());
    let mut dep = Vec::with_capacity(kinds.len());
    for &k in kinds {
        let e = p.get(k).ok_or_else(|| TrainError::Config(format!("parameters lack gate {}", k.name())))?;
        eps.push(e.over_rotation);
        dep.push(e.depolarization);
    }
    eps.extend(dep);
    Ok(eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub weighted_mse: f64,
    pub kl: f64,
    pub chi2: f64,
    pub neg_log_likelihood: f64,
}

impl MetricTable {
    pub fn get(&self, kind: LossKind) -> f64 {
        match kind {
            LossKind::WeightedMse => self.weighted_mse,
            LossKind::Kl => self.kl,
            LossKind::Chi2 => self.chi2,
            LossKind::NegLogLikelihood => self.neg_log_likelihood,
        }
    }
}

/// Outcome probabilities of every dataset circuit under `params`.
pub fn predicted_probabilities(params: &ErrorParams, dataset: &Dataset) -> Result<Vec<Vec<f64>>, PtmError> {
    let mut labels: Vec<_> = dataset.circuits.iter().flat_map(|c| c.labels().iter().cloned()).collect();
    labels.sort();
    labels.dedup();
    let gs = GateSet::noisy(dataset.n_qubits, labels, params)?;
    dataset.circuits.iter().map(|c| circuit_probabilities(c, &gs)).collect()
}

/// All four metrics of `params` against the dataset frequencies.
pub fn evaluate_metrics(params: &ErrorParams, dataset: &Dataset) -> Result<MetricTable, PtmError> {
    let pred = predicted_probabilities(params, dataset)?;
    let f = dataset.all_frequencies();
    let s = &dataset.shots;
    Ok(MetricTable {
        weighted_mse: evaluate_loss(LossKind::WeightedMse, &pred, &f, s),
        kl: evaluate_loss(LossKind::Kl, &pred, &f, s),
        chi2: evaluate_loss(LossKind::Chi2, &pred, &f, s),
        neg_log_likelihood: evaluate_loss(LossKind::NegLogLikelihood, &pred, &f, s),
    })
}

/// Entrywise `|A − B|` of two PTMs.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub labels: (String, String),
    pub entries: DMatrix<f64>,
}

impl Heatmap {
    pub fn to_csv(&self) -> String {
        Ptm { matrix: self.entries.clone() }.to_csv_string()
    }
}

pub fn ptm_distance_heatmap(a: &Ptm, b: &Ptm, labels: (&str, &str)) -> Result<Heatmap, PtmError> {
    if a.dim() != b.dim() {
        return Err(PtmError::DimMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(Heatmap { labels: (labels.0.into(), labels.1.into()), entries: (&a.matrix - &b.matrix).abs() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamError {
    pub name: String,
    pub predicted: f64,
    pub truth: f64,
    /// `100·(pred − true)/true`; absent when the truth is zero.
    pub percent_error: Option<f64>,
    pub absolute_error: f64,
    /// Set when the truth is zero and only the absolute error is meaningful.
    pub zero_truth: bool,
}

pub fn percent_error_report(fit: &ErrorParams, truth: &ErrorParams) -> Result<Vec<ParamError>, TrainError> {
    let kinds = truth.kinds();
    let pred = reorder(fit, &kinds)?;
    let want = truth.to_flat();
    Ok(ErrorParams::flat_names(&kinds)
        .into_iter()
        .zip(pred.iter().zip(&want))
        .map(|(name, (&p, &t))| ParamError {
            name,
            predicted: p,
            truth: t,
            percent_error: (t != 0.0).then(|| 100.0 * (p - t) / t),
            absolute_error: p - t,
            zero_truth: t == 0.0,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Half-width of the 95% normal interval, `1.96·std`.
    pub ci_half_width: Vec<f64>,
}

/// Refits `resamples` nonparametric resamples of the dataset (seeds
/// `seed, seed+1, …`), starting from `center`.
pub fn bootstrap(
    dataset: &Dataset,
    center: &ErrorParams,
    config: &BaselineConfig,
    resamples: usize,
    seed: u64,
) -> Result<Bootstrap, TrainError> {
    if resamples < 2 {
        return Err(TrainError::Config("bootstrap needs at least 2 resamples".into()));
    }
    let kinds = parametrized_kinds(dataset.n_qubits);
    let fits = (0..resamples)
        .map(|r| {
            let ds = resample(dataset, seed + r as u64)?;
            Ok(baseline_fit(&ds, Some(center), config)?.params.to_flat())
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let n = fits.len() as f64;
    let dim = 2 * kinds.len();
    let mean: Vec<f64> = (0..dim).map(|i| fits.iter().map(|f| f[i]).sum::<f64>() / n).collect();
    let std: Vec<f64> = (0..dim)
        .map(|i| (fits.iter().map(|f| (f[i] - mean[i]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
        .collect();
    let ci_half_width = std.iter().map(|s| 1.96 * s).collect();
    Ok(Bootstrap { names: ErrorParams::flat_names(&kinds), mean, std, ci_half_width })
}

/// Report of one estimate, with optional ground truth and comparison fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n_qubits: usize,
    pub method: String,
    pub predicted: BTreeMap<String, GateError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<BTreeMap<String, GateError>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors: Option<Vec<ParamError>>,
    /// Metric rows keyed by `fit`, `ground_truth`, `no_cl_fit`, …
    pub metrics: BTreeMap<String, MetricTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<Bootstrap>,
}

fn by_name(p: &ErrorParams) -> BTreeMap<String, GateError> {
    p.gates.iter().map(|(k, e)| (k.name().to_string(), *e)).collect()
}

impl FitReport {
    pub fn new(method: &str, predicted: &ErrorParams, dataset: &Dataset) -> Result<Self, TrainError> {
        let mut metrics = BTreeMap::new();
        metrics.insert("fit".to_string(), evaluate_metrics(predicted, dataset)?);
        let (ground_truth, errors) = match &dataset.ground_truth {
            Some(t) => {
                metrics.insert("ground_truth".to_string(), evaluate_metrics(t, dataset)?);
                (Some(by_name(t)), Some(percent_error_report(predicted, t)?))
            }
            None => (None, None),
        };
        Ok(FitReport {
            n_qubits: dataset.n_qubits,
            method: method.to_string(),
            predicted: by_name(predicted),
            ground_truth,
            errors,
            metrics,
            bootstrap: None,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
