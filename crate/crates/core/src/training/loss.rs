use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{AdError, Graph, Var};

/// Probability clip used by the logarithmic losses.
pub const PROB_EPS: f64 = 1e-10;
/// `σ² ≥ SIGMA_FLOOR / N` in the weighted MSE.
pub const SIGMA_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    WeightedMse,
    Kl,
    Chi2,
    NegLogLikelihood,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::WeightedMse, LossKind::Kl, LossKind::Chi2, LossKind::NegLogLikelihood];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::WeightedMse => "weighted-mse",
            LossKind::Kl => "kl",
            LossKind::Chi2 => "chi2",
            LossKind::NegLogLikelihood => "neg-log-likelihood",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown loss {s:?}; expected one of weighted-mse, kl, chi2, neg-log-likelihood"))
    }
}

fn clip(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

fn floor(p: f64) -> f64 {
    p.max(PROB_EPS)
}

/// `Σ (p−f)² / max(p(1−p)/N, SIGMA_FLOOR/N)`
pub fn loss_weighted_mse(pred: &[Vec<f64>], freqs: &[Vec<f64>], shots: &[u64]) -> f64 {
    let mut total = 0.0;
    for ((p, f), &n) in pred.iter().zip(freqs).zip(shots) {
        for (&p, &f) in p.iter().zip(f) {
            total += n as f64 * (p - f).powi(2) / (p * (1.0 - p)).max(SIGMA_FLOOR);
        }
    }
    total
}

/// `Σ f log(f/p)`, with `0·log 0 = 0`.
pub fn loss_kl(pred: &[Vec<f64>], freqs: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (p, f) in pred.iter().zip(freqs) {
        for (&p, &f) in p.iter().zip(f) {
            if f > 0.0 {
                total += f * (f / clip(p)).ln();
            }
        }
    }
    total
}

/// `Σ N (p−f)² / p`
pub fn loss_chi2(pred: &[Vec<f64>], freqs: &[Vec<f64>], shots: &[u64]) -> f64 {
    let mut total = 0.0;
    for ((p, f), &n) in pred.iter().zip(freqs).zip(shots) {
        for (&p, &f) in p.iter().zip(f) {
            total += n as f64 * (p - f).powi(2) / floor(p);
        }
    }
    total
}

/// `−Σ N f log p`
pub fn loss_neg_log_likelihood(pred: &[Vec<f64>], freqs: &[Vec<f64>], shots: &[u64]) -> f64 {
    let mut total = 0.0;
    for ((p, f), &n) in pred.iter().zip(freqs).zip(shots) {
        for (&p, &f) in p.iter().zip(f) {
            if f > 0.0 {
                total -= n as f64 * f * floor(p).ln();
            }
        }
    }
    total
}

pub fn evaluate_loss(kind: LossKind, pred: &[Vec<f64>], freqs: &[Vec<f64>], shots: &[u64]) -> f64 {
    match kind {
        LossKind::WeightedMse => loss_weighted_mse(pred, freqs, shots),
        LossKind::Kl => loss_kl(pred, freqs),
        LossKind::Chi2 => loss_chi2(pred, freqs, shots),
        LossKind::NegLogLikelihood => loss_neg_log_likelihood(pred, freqs, shots),
    }
}

/// Loss of the `[circuits, outcomes]` probability node `probs` as a graph scalar.
/// Agrees with [`evaluate_loss`].
pub fn loss_graph(
    g: &mut Graph,
    kind: LossKind,
    probs: Var,
    freqs: &[Vec<f64>],
    shots: &[u64],
) -> Result<Var, AdError> {
    let shape = g.shape(probs).to_vec();
    let flat_f: Vec<f64> = freqs.iter().flatten().cloned().collect();
    if shape.len() != 2 || shape[0] != freqs.len() || shape[0] != shots.len() || shape[0] * shape[1] != flat_f.len() {
        return Err(AdError::Shape { op: "loss", left: shape, right: vec![freqs.len(), flat_f.len()] });
    }
    let n_out = shape[1];
    let n: Vec<f64> = shots.iter().flat_map(|&s| std::iter::repeat_n(s as f64, n_out)).collect();
    let f = g.constant_from(&shape, flat_f.clone());
    let nv = g.constant_from(&shape, n.clone());
    match kind {
        LossKind::WeightedMse => {
            let d = g.sub(probs, f)?;
            let d2 = g.mul(d, d)?;
            let num = g.mul(d2, nv)?;
            let one_minus = g.scale(probs, -1.0);
            let one_minus = g.add_scalar(one_minus, 1.0);
            let var = g.mul(probs, one_minus)?;
            let var = g.clamp(var, SIGMA_FLOOR, f64::INFINITY);
            let t = g.div(num, var)?;
            Ok(g.sum(t))
        }
        LossKind::Chi2 => {
            let d = g.sub(probs, f)?;
            let d2 = g.mul(d, d)?;
            let num = g.mul(d2, nv)?;
            let pc = g.clamp(probs, PROB_EPS, f64::INFINITY);
            let t = g.div(num, pc)?;
            Ok(g.sum(t))
        }
        LossKind::Kl | LossKind::NegLogLikelihood => {
            let hi = if kind == LossKind::Kl { 1.0 - PROB_EPS } else { f64::INFINITY };
            let pc = g.clamp(probs, PROB_EPS, hi);
            let lp = g.log(pc);
            let w: Vec<f64> = match kind {
                LossKind::Kl => flat_f.clone(),
                _ => flat_f.iter().zip(&n).map(|(f, n)| f * n).collect(),
            };
            let wv = g.constant_from(&shape, w);
            let t = g.mul(lp, wv)?;
            let s = g.sum(t);
            let neg = g.scale(s, -1.0);
            if kind == LossKind::Kl {
                let entropy: f64 = flat_f.iter().filter(|&&f| f > 0.0).map(|f| f * f.ln()).sum();
                Ok(g.add_scalar(neg, entropy))
            } else {
                Ok(neg)
            }
        }
    }
}
