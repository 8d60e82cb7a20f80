#![allow(dead_code)]

use qgst::autodiff::Graph;
use qgst::experiment::{default_design, simulate_counts, Dataset};
use qgst::models::{Model, ModelConfig};
use qgst::params::{GateError, GateKind};
use qgst::training::{group_dataset, loss_graph, predict_and_reconstruct, tokens_for, LossKind};
use qgst::{Circuit, ErrorParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn params(entries: &[(GateKind, f64, f64)]) -> ErrorParams {
    ErrorParams::new(
        entries.iter().map(|&(k, e, p)| (k, GateError { over_rotation: e, depolarization: p })).collect(),
    )
    .unwrap()
}

pub fn dataset(n_qubits: usize, max_length: usize, truth: &ErrorParams, shots: u64, seed: u64) -> Dataset {
    let design = default_design(n_qubits, max_length).unwrap();
    simulate_counts(&design, truth, shots, seed).unwrap()
}

pub fn max_len(ds: &Dataset) -> usize {
    ds.circuits.iter().map(Circuit::len).max().unwrap()
}

pub fn model_for(ds: &Dataset, seed: u64) -> Model {
    Model::new(ModelConfig::with_defaults(ds.n_qubits, max_len(ds)), seed).unwrap()
}

/// Loss of the model on group `gi` of the dataset.
pub fn group_loss(model: &Model, ds: &Dataset, gi: usize, loss: LossKind) -> (Graph, qgst::autodiff::Var) {
    let tokens = tokens_for(model, ds).unwrap();
    let group = &group_dataset(ds, model.config.group_size).unwrap()[gi];
    let input = group.input(ds, &tokens);
    let circuits: Vec<&Circuit> = group.indices.iter().map(|&i| &ds.circuits[i]).collect();
    let shots: Vec<u64> = group.indices.iter().map(|&i| ds.shots[i]).collect();
    let mut g = Graph::new();
    let (_, probs) = predict_and_reconstruct(model, &mut g, &input, &circuits).unwrap();
    let l = loss_graph(&mut g, loss, probs, &input.freqs, &shots).unwrap();
    (g, l)
}

pub struct FdResult {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl FdResult {
    pub fn rel_err(&self) -> f64 {
        (self.analytic - self.numeric).abs() / self.analytic.abs().max(self.numeric.abs()).max(1e-12)
    }
}

/// Backprop against five-point central differences on `n` randomly chosen scalar
/// parameters whose gradient is not negligibly small.
pub fn finite_difference_check(model: &Model, ds: &Dataset, loss: LossKind, n: usize, seed: u64) -> Vec<FdResult> {
    let (g, l) = group_loss(model, ds, 0, loss);
    let grads = g.backward(l).unwrap();
    let mut store = model.params.clone();
    store.accumulate(&g, &grads).unwrap();
    let names: Vec<String> = store.names().to_vec();
    let gmax = names
        .iter()
        .flat_map(|nm| store.grad(nm).unwrap().unwrap().iter().map(|v| v.abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < n && tries < 100 * n {
        tries += 1;
        let name = &names[rng.random_range(0..names.len())];
        let size = store.value(name).unwrap().len();
        let index = rng.random_range(0..size);
        let analytic = store.grad(name).unwrap().unwrap().as_slice().unwrap()[index];
        if analytic.abs() < 1e-6 * gmax || out.iter().any(|r: &FdResult| r.name == *name && r.index == index) {
            continue;
        }
        let eval = |delta: f64| {
            let mut m = model.clone();
            m.params.value_mut(name).unwrap().as_slice_mut().unwrap()[index] += delta;
            let (g, l) = group_loss(&m, ds, 0, loss);
            g.scalar(l)
        };
        let x = model.params.value(name).unwrap().as_slice().unwrap()[index];
        // Five-point stencil: O(h⁴) truncation with a step large enough that
        // roundoff in the loss stays far below the smallest gradients checked.
        let h = 1e-3 * x.abs().max(1.0);
        let numeric = (8.0 * (eval(h) - eval(-h)) - (eval(2.0 * h) - eval(-2.0 * h))) / (12.0 * h);
        out.push(FdResult { name: name.clone(), index, analytic, numeric });
    }
    out
}

/// Replaces the zero-initialized adaLN modulation weights with small random
/// values so gradients reach every block parameter.
pub fn open_modulation(model: &Model, seed: u64) -> Model {
    let mut m = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for name in m.params.names().to_vec() {
        if name.contains(".mod.") {
            m.params.value_mut(&name).unwrap().mapv_inplace(|_| rng.random_range(-0.05..0.05));
        }
    }
    m
}
