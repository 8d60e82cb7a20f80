use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{
    build_pauli_basis, computational_effects, computational_state, noisy_gate_derivatives,
    GateSet, PtmError,
};
use crate::circuit::{Circuit, GateLabel};
use crate::params::{ErrorParams, GateKind};

const RANGE_TOL: f64 = 1e-10;
const SUM_TOL: f64 = 1e-9;

/// Outcome probabilities `⟨⟨E_b| M_T ⋯ M_1 |ρ⟩⟩` without clipping.
pub fn circuit_probabilities_raw(circuit: &Circuit, gateset: &GateSet) -> Result<Vec<f64>, PtmError> {
    let mut state = gateset.prep.coeffs.clone();
    for label in circuit.labels() {
        let m = gateset.gates.get(label).ok_or_else(|| PtmError::UnknownGate(label.to_string()))?;
        state = &m.matrix * state;
    }
    Ok(gateset.effects.iter().map(|e| e.coeffs.dot(&state)).collect())
}

/// Outcome probabilities clipped to [0, 1] after range and normalization checks.
pub fn circuit_probabilities(circuit: &Circuit, gateset: &GateSet) -> Result<Vec<f64>, PtmError> {
    let raw = circuit_probabilities_raw(circuit, gateset)?;
    let sum: f64 = raw.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL || raw.iter().any(|&p| !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&p)) {
        return Err(PtmError::NotNormalized(sum));
    }
    Ok(raw.into_iter().map(|p| p.clamp(0.0, 1.0)).collect())
}

struct GateEntry {
    m: DMatrix<f64>,
    /// Flat parameter indices of (ε, p) with the matching derivative matrices.
    derivs: Option<[(usize, DMatrix<f64>); 2]>,
}

/// Noisy gate set evaluated at one parameter point, with parameter derivatives.
///
/// Produces outcome probabilities of circuits and their Jacobian with respect to
/// the flat parameter vector of [`ErrorParams::to_flat`].
pub struct GateSetJacobian {
    kinds: Vec<GateKind>,
    gates: BTreeMap<GateLabel, GateEntry>,
    prep: DVector<f64>,
    effects: DMatrix<f64>,
}

impl GateSetJacobian {
    pub fn new<'a>(
        n_qubits: usize,
        params: &ErrorParams,
        labels: impl IntoIterator<Item = &'a GateLabel>,
    ) -> Result<Self, PtmError> {
        let basis = build_pauli_basis(n_qubits)?;
        let kinds = params.kinds();
        let n_kinds = kinds.len();
        let mut gates = BTreeMap::new();
        for label in labels {
            if gates.contains_key(label) {
                continue;
            }
            let (m, d) = noisy_gate_derivatives(label, params, n_qubits)?;
            let derivs = match d {
                None => None,
                Some((de, dp)) => {
                    let idx = kinds
                        .iter()
                        .position(|k| *k == label.kind)
                        .ok_or(PtmError::MissingParams(label.kind))?;
                    Some([(idx, de.matrix), (n_kinds + idx, dp.matrix)])
                }
            };
            gates.insert(label.clone(), GateEntry { m: m.matrix, derivs });
        }
        let effects = computational_effects(&basis);
        let dim = basis.dim();
        let effects = DMatrix::from_fn(effects.len(), dim, |r, c| effects[r].coeffs[c]);
        Ok(GateSetJacobian { kinds, gates, prep: computational_state(&basis, 0).coeffs, effects })
    }

    pub fn n_params(&self) -> usize {
        2 * self.kinds.len()
    }

    fn entry(&self, label: &GateLabel) -> Result<&GateEntry, PtmError> {
        self.gates.get(label).ok_or_else(|| PtmError::UnknownGate(label.to_string()))
    }

    pub fn probabilities(&self, circuit: &Circuit) -> Result<Vec<f64>, PtmError> {
        let mut state = self.prep.clone();
        for label in circuit.labels() {
            state = &self.entry(label)?.m * state;
        }
        Ok((&self.effects * state).iter().cloned().collect())
    }

    /// Probabilities and the `n_outcomes × n_params` Jacobian.
    pub fn probabilities_and_jacobian(&self, circuit: &Circuit) -> Result<(Vec<f64>, DMatrix<f64>), PtmError> {
        let labels = circuit.labels();
        let mut states = Vec::with_capacity(labels.len() + 1);
        states.push(self.prep.clone());
        for label in labels {
            let next = &self.entry(label)?.m * states.last().expect("non-empty");
            states.push(next);
        }
        let probs: Vec<f64> = (&self.effects * states.last().expect("non-empty")).iter().cloned().collect();

        let n_out = self.effects.nrows();
        let mut jac = DMatrix::zeros(n_out, self.n_params());
        // Rows of `cov` are ⟨⟨E_b| M_T ⋯ M_{t+1}.
        let mut cov = self.effects.clone();
        for (t, label) in labels.iter().enumerate().rev() {
            let entry = self.entry(label)?;
            if let Some(derivs) = &entry.derivs {
                for (idx, dm) in derivs {
                    let u = dm * &states[t];
                    let contrib = &cov * u;
                    for b in 0..n_out {
                        jac[(b, *idx)] += contrib[b];
                    }
                }
            }
            cov = cov * &entry.m;
        }
        Ok((probs, jac))
    }
}
