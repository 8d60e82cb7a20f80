use crate::circuit::Circuit;
use crate::params::GateKind;

use super::{Dataset, ExperimentError};

pub const PAD: u32 = 0;
const IDLE: &str = "idle";

/// Token names; id = index + 1, with 0 reserved for padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub names: Vec<String>,
}

impl Vocabulary {
    /// Sorted gate names for the gate set, plus `idle` for multi-qubit grids.
    pub fn for_qubits(n_qubits: usize) -> Self {
        let mut names: Vec<String> = GateKind::ALL
            .iter()
            .filter(|k| k.arity() <= n_qubits)
            .map(|k| k.name().to_string())
            .collect();
        if n_qubits > 1 {
            names.push(IDLE.to_string());
        }
        names.sort();
        Vocabulary { names }
    }

    /// Vocabulary size including the padding token.
    pub fn size(&self) -> usize {
        self.names.len() + 1
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|n| n == name).map(|i| i as u32 + 1)
    }
}

/// Integer-encoded, zero-padded circuit.
///
/// `rows` has one row for a single qubit, and one row per qubit otherwise,
/// where a row holds the gate on that qubit at each step or `idle`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenizedCircuit {
    pub rows: Vec<Vec<u32>>,
    pub nonzero_len: usize,
}

impl TokenizedCircuit {
    pub fn tokens(&self) -> &[u32] {
        &self.rows[0]
    }

    pub fn padded_len(&self) -> usize {
        self.rows[0].len()
    }
}

pub fn tokenize_circuit(
    circuit: &Circuit,
    n_qubits: usize,
    vocab: &Vocabulary,
    l_pad: usize,
) -> Result<TokenizedCircuit, ExperimentError> {
    if circuit.len() > l_pad {
        return Err(ExperimentError::TooLong { len: circuit.len(), l_pad });
    }
    let n_rows = if n_qubits == 1 { 1 } else { n_qubits };
    let mut rows = vec![vec![PAD; l_pad]; n_rows];
    let idle = vocab.id(IDLE);
    for (t, label) in circuit.labels().iter().enumerate() {
        let id = vocab
            .id(label.kind.name())
            .ok_or_else(|| ExperimentError::Invalid(format!("gate {label} not in vocabulary")))?;
        if n_rows == 1 {
            rows[0][t] = id;
            continue;
        }
        for (q, row) in rows.iter_mut().enumerate() {
            row[t] = if label.acts_on(q) {
                id
            } else {
                idle.ok_or_else(|| ExperimentError::Invalid("vocabulary lacks idle".into()))?
            };
        }
    }
    Ok(TokenizedCircuit { rows, nonzero_len: circuit.len() })
}

/// Tokenizes every circuit, padding to the longest one.
pub fn tokenize(dataset: &Dataset) -> Result<(Vec<TokenizedCircuit>, Vocabulary), ExperimentError> {
    let l_pad = dataset.circuits.iter().map(|c| c.len()).max().unwrap_or(0);
    tokenize_padded(dataset, l_pad)
}

/// Tokenizes with an explicit pad length (at least the longest circuit).
pub fn tokenize_padded(
    dataset: &Dataset,
    l_pad: usize,
) -> Result<(Vec<TokenizedCircuit>, Vocabulary), ExperimentError> {
    let vocab = Vocabulary::for_qubits(dataset.n_qubits);
    let toks = dataset
        .circuits
        .iter()
        .map(|c| tokenize_circuit(c, dataset.n_qubits, &vocab, l_pad))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((toks, vocab))
}
