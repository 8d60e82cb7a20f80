//! Python bindings: error parameters, PTMs, datasets, models and the baseline fitter.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use qgst::bench::{baseline_fit, evaluate_metrics, BaselineConfig};
use qgst::experiment::{default_design, load_dataset, save_dataset, simulate_counts};
use qgst::models::{Model, ModelConfig};
use qgst::params::{parametrized_kinds, GateError, GateKind};
use qgst::ptm::{self, Axis, GateSet};
use qgst::training::{estimate, train, LossKind, TrainConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(p: &ptm::Ptm) -> Vec<Vec<f64>> {
    p.matrix.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

fn parse_loss(name: &str) -> PyResult<LossKind> {
    name.parse().map_err(PyValueError::new_err)
}

/// Over-rotation and depolarization per gate kind.
#[pyclass(name = "ErrorParams", from_py_object)]
#[derive(Clone)]
struct PyErrorParams {
    inner: qgst::ErrorParams,
}

#[pymethods]
impl PyErrorParams {
    /// `gates` maps gate names ("Gx", "Gy", "Gcphase") to `(eps, p)`.
    #[new]
    fn new(gates: BTreeMap<String, (f64, f64)>) -> PyResult<Self> {
        let mut entries = Vec::with_capacity(gates.len());
        for (name, (e, p)) in gates {
            let kind = GateKind::parse(&name).ok_or_else(|| value_err(format!("unknown gate {name}")))?;
            entries.push((kind, GateError { over_rotation: e, depolarization: p }));
        }
        entries.sort_by_key(|(k, _)| *k);
        Ok(PyErrorParams { inner: qgst::ErrorParams::new(entries).map_err(value_err)? })
    }

    fn to_dict(&self) -> BTreeMap<String, (f64, f64)> {
        self.inner
            .gates
            .iter()
            .map(|(k, e)| (k.name().to_string(), (e.over_rotation, e.depolarization)))
            .collect()
    }

    /// Flat `[eps..., p...]` values.
    fn flat(&self) -> Vec<f64> {
        self.inner.to_flat()
    }

    fn __repr__(&self) -> String {
        format!("ErrorParams({:?})", self.to_dict())
    }
}

/// Outcome counts for a set of circuits.
#[pyclass(name = "Dataset", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: qgst::experiment::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Simulates the default experiment design.
    #[staticmethod]
    #[pyo3(signature = (n_qubits, max_length, truth, shots, seed=0))]
    fn simulate(n_qubits: usize, max_length: usize, truth: &PyErrorParams, shots: u64, seed: u64) -> PyResult<Self> {
        let design = default_design(n_qubits, max_length).map_err(value_err)?;
        let inner = simulate_counts(&design, &truth.inner, shots, seed).map_err(value_err)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset { inner: load_dataset(&path).map_err(|e| PyIOError::new_err(e.to_string()))? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_dataset(&self.inner, &path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits
    }

    /// Longest circuit in gates; the pad length a model needs.
    #[getter]
    fn max_length(&self) -> usize {
        self.inner.circuits.iter().map(|c| c.len()).max().unwrap_or(0)
    }

    fn circuits(&self) -> Vec<String> {
        self.inner.circuits.iter().map(|c| c.to_string()).collect()
    }

    fn counts(&self) -> Vec<Vec<u64>> {
        self.inner.counts.clone()
    }

    fn frequencies(&self) -> Vec<Vec<f64>> {
        self.inner.all_frequencies()
    }

    fn ground_truth(&self) -> Option<PyErrorParams> {
        self.inner.ground_truth.clone().map(|inner| PyErrorParams { inner })
    }
}

/// Transformer estimator.
#[pyclass(name = "Model")]
struct PyModel {
    inner: Model,
}

#[pymethods]
impl PyModel {
    /// Fresh model sized for circuits of up to `max_len` gates.
    #[new]
    #[pyo3(signature = (n_qubits, max_len, seed=0, d_model=64, n_heads=4, n_layers=3, ff_width=128, group_size=8))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n_qubits: usize,
        max_len: usize,
        seed: u64,
        d_model: usize,
        n_heads: usize,
        n_layers: usize,
        ff_width: usize,
        group_size: usize,
    ) -> PyResult<Self> {
        let config = ModelConfig {
            d_model,
            n_heads,
            n_layers,
            ff_width,
            group_size,
            ..ModelConfig::with_defaults(n_qubits, max_len)
        };
        Ok(PyModel { inner: Model::new(config, seed).map_err(value_err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel { inner: Model::load(&path).map_err(value_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(value_err)
    }

    /// Trains in place and returns the training log as CSV text.
    #[pyo3(signature = (dataset, epochs_per_part, curriculum=true, seed=0, loss=None, lr=1e-3))]
    fn train(
        &mut self,
        py: Python<'_>,
        dataset: &PyDataset,
        epochs_per_part: Vec<usize>,
        curriculum: bool,
        seed: u64,
        loss: Option<&str>,
        lr: f64,
    ) -> PyResult<String> {
        let mut config = TrainConfig::default_for(self.inner.config.n_qubits);
        config.epochs_per_part = epochs_per_part;
        config.curriculum = curriculum;
        config.seed = seed;
        config.adam.lr = lr;
        if let Some(l) = loss {
            config.loss = parse_loss(l)?;
        }
        let model = &mut self.inner;
        let ds = &dataset.inner;
        let log = py.detach(|| train(model, ds, &config)).map_err(value_err)?;
        Ok(log.to_csv())
    }

    /// Mean prediction over the dataset's groups.
    fn estimate(&self, dataset: &PyDataset) -> PyResult<PyErrorParams> {
        Ok(PyErrorParams { inner: estimate(&self.inner, &dataset.inner).map_err(value_err)? })
    }

    fn n_parameters(&self) -> usize {
        self.inner.params.n_scalars()
    }
}

/// PTM of a rotation about "x" or "y" by `angle`.
#[pyfunction]
fn rotation_ptm(axis: &str, angle: f64) -> PyResult<Vec<Vec<f64>>> {
    let axis = match axis {
        "x" | "X" => Axis::X,
        "y" | "Y" => Axis::Y,
        _ => return Err(value_err(format!("axis must be x or y, got {axis}"))),
    };
    Ok(matrix(&ptm::rotation_ptm(axis, angle).map_err(value_err)?))
}

#[pyfunction]
fn cphase_ptm(phase: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(matrix(&ptm::cphase_ptm(phase).map_err(value_err)?))
}

#[pyfunction]
fn depolarizing_ptm(p: f64, n_qubits: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(matrix(&ptm::depolarizing_ptm(p, n_qubits).map_err(value_err)?))
}

/// Noisy PTM of a gate label such as "Gx@0" or "Gcphase@0,1".
#[pyfunction]
fn noisy_gate_ptm(label: &str, params: &PyErrorParams, n_qubits: usize) -> PyResult<Vec<Vec<f64>>> {
    let label: qgst::GateLabel = label.parse().map_err(value_err)?;
    Ok(matrix(&ptm::noisy_gate_ptm(&label, &params.inner, n_qubits).map_err(value_err)?))
}

/// Outcome probabilities of a circuit such as "Gx@0:Gy@0" ("{}" is empty).
#[pyfunction]
fn circuit_probabilities(circuit: &str, params: &PyErrorParams, n_qubits: usize) -> PyResult<Vec<f64>> {
    let circuit: qgst::Circuit = circuit.parse().map_err(value_err)?;
    let gs = GateSet::noisy(n_qubits, circuit.labels().iter().cloned(), &params.inner).map_err(value_err)?;
    ptm::circuit_probabilities(&circuit, &gs).map_err(value_err)
}

/// Direct fit of the error parameters.
#[pyfunction]
#[pyo3(signature = (dataset, loss=None, max_iters=3000))]
fn fit_baseline(py: Python<'_>, dataset: &PyDataset, loss: Option<&str>, max_iters: usize) -> PyResult<PyErrorParams> {
    let mut config = BaselineConfig { max_iters, ..BaselineConfig::default() };
    if let Some(l) = loss {
        config.loss = parse_loss(l)?;
    } else if dataset.inner.n_qubits > 1 {
        config.loss = LossKind::Kl;
    }
    let ds = &dataset.inner;
    let fit = py.detach(|| baseline_fit(ds, None, &config)).map_err(value_err)?;
    Ok(PyErrorParams { inner: fit.params })
}

/// Weighted MSE, KL, χ² and negative log-likelihood of `params` on the dataset.
#[pyfunction]
fn metrics(params: &PyErrorParams, dataset: &PyDataset) -> PyResult<BTreeMap<String, f64>> {
    let m = evaluate_metrics(&params.inner, &dataset.inner).map_err(value_err)?;
    Ok(LossKind::ALL.iter().map(|&k| (k.name().to_string(), m.get(k))).collect())
}

/// Gate kinds with error parameters for the qubit count.
#[pyfunction]
fn gate_kinds(n_qubits: usize) -> Vec<String> {
    parametrized_kinds(n_qubits).iter().map(|k| k.name().to_string()).collect()
}

#[pymodule]
#[pyo3(name = "qgst")]
fn qgst_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyErrorParams>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(rotation_ptm, m)?)?;
    m.add_function(wrap_pyfunction!(cphase_ptm, m)?)?;
    m.add_function(wrap_pyfunction!(depolarizing_ptm, m)?)?;
    m.add_function(wrap_pyfunction!(noisy_gate_ptm, m)?)?;
    m.add_function(wrap_pyfunction!(circuit_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(fit_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(gate_kinds, m)?)?;
    Ok(())
}
