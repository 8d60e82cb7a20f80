use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::params::ErrorParams;

use super::ExperimentError;

pub const DATASET_FORMAT: &str = "qgst-dataset";
pub const DATASET_VERSION: u32 = 1;

/// Outcome counts per circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_qubits: usize,
    pub circuits: Vec<Circuit>,
    /// Counts over the 2ⁿ outcomes, bitstring order with qubit 0 most significant.
    pub counts: Vec<Vec<u64>>,
    pub shots: Vec<u64>,
    pub seed: Option<u64>,
    pub ground_truth: Option<ErrorParams>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    n_qubits: usize,
    seed: Option<u64>,
    ground_truth: Option<ErrorParams>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    circuit: String,
    shots: u64,
    counts: Vec<u64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.circuits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circuits.is_empty()
    }

    pub fn n_outcomes(&self) -> usize {
        1 << self.n_qubits
    }

    /// `f = N_β / N`
    pub fn frequencies(&self, i: usize) -> Vec<f64> {
        let n = self.shots[i] as f64;
        self.counts[i].iter().map(|&c| c as f64 / n).collect()
    }

    pub fn all_frequencies(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.frequencies(i)).collect()
    }

    /// Subset of circuits in the order given.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            n_qubits: self.n_qubits,
            circuits: indices.iter().map(|&i| self.circuits[i].clone()).collect(),
            counts: indices.iter().map(|&i| self.counts[i].clone()).collect(),
            shots: indices.iter().map(|&i| self.shots[i]).collect(),
            seed: self.seed,
            ground_truth: self.ground_truth.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.counts.len() != self.circuits.len() || self.shots.len() != self.circuits.len() {
            return Err(ExperimentError::Invalid("record counts disagree".into()));
        }
        for (i, (c, &n)) in self.counts.iter().zip(&self.shots).enumerate() {
            if c.len() != self.n_outcomes() {
                return Err(ExperimentError::Invalid(format!(
                    "circuit {i}: {} outcomes, expected {}",
                    c.len(),
                    self.n_outcomes()
                )));
            }
            if n == 0 {
                return Err(ExperimentError::Invalid(format!("circuit {i}: zero shots")));
            }
            let total: u64 = c.iter().sum();
            if total != n {
                return Err(ExperimentError::Invalid(format!(
                    "circuit {i}: counts sum to {total}, shots = {n}"
                )));
            }
            for label in self.circuits[i].labels() {
                if label.targets.iter().any(|&t| t >= self.n_qubits) {
                    return Err(ExperimentError::Invalid(format!(
                        "circuit {i}: label {label} outside {} qubits",
                        self.n_qubits
                    )));
                }
            }
        }
        if let Some(gt) = &self.ground_truth {
            gt.validate().map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<(), ExperimentError> {
        let header = Header {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            n_qubits: self.n_qubits,
            seed: self.seed,
            ground_truth: self.ground_truth.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        for i in 0..self.len() {
            let rec = Record {
                circuit: self.circuits[i].to_string(),
                shots: self.shots[i],
                counts: self.counts[i].clone(),
            };
            writeln!(out, "{}", serde_json::to_string(&rec)?)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Dataset, ExperimentError> {
        let mut lines = input.lines().enumerate().filter(|(_, l)| match l {
            Ok(l) => !l.trim().is_empty(),
            Err(_) => true,
        });
        let (_, first) = lines.next().ok_or_else(|| ExperimentError::Invalid("empty file".into()))?;
        let first = first?;
        let raw: serde_json::Value = serde_json::from_str(&first)?;
        let version = raw.get("version").and_then(|v| v.as_u64());
        let format = raw.get("format").and_then(|v| v.as_str());
        if format != Some(DATASET_FORMAT) {
            return Err(ExperimentError::Invalid(format!("line 1: not a {DATASET_FORMAT} header")));
        }
        if version != Some(DATASET_VERSION as u64) {
            return Err(ExperimentError::Version { found: version, expected: DATASET_VERSION });
        }
        let header: Header = serde_json::from_value(raw)?;
        let mut ds = Dataset {
            n_qubits: header.n_qubits,
            circuits: Vec::new(),
            counts: Vec::new(),
            shots: Vec::new(),
            seed: header.seed,
            ground_truth: header.ground_truth,
        };
        for (lineno, line) in lines {
            let line = line?;
            let rec: Record = serde_json::from_str(&line)
                .map_err(|e| ExperimentError::Invalid(format!("line {}: {e}", lineno + 1)))?;
            let circuit: Circuit = rec
                .circuit
                .parse()
                .map_err(|e| ExperimentError::Invalid(format!("line {}: {e}", lineno + 1)))?;
            ds.circuits.push(circuit);
            ds.shots.push(rec.shots);
            ds.counts.push(rec.counts);
        }
        ds.validate()?;
        Ok(ds)
    }
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), ExperimentError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    dataset.write(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, ExperimentError> {
    let file = std::fs::File::open(path)?;
    Dataset::read(std::io::BufReader::new(file))
}
