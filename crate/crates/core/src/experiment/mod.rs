//! Experiment designs, simulated count data and tokenization.

mod dataset;
mod design;
mod simulate;
mod tokenize;

pub use dataset::{load_dataset, save_dataset, Dataset, DATASET_FORMAT, DATASET_VERSION};
pub use design::{
    default_design, standard_design, standard_fiducials_1q, standard_fiducials_2q, standard_germs_1q,
    standard_germs_2q, ExperimentDesign,
};
pub use simulate::{resample, simulate_counts, true_probabilities};
pub use tokenize::{tokenize, tokenize_circuit, tokenize_padded, TokenizedCircuit, Vocabulary, PAD};

use crate::ptm::PtmError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("experiment designs support 1 or 2 qubits, got {0}")]
    QubitCount(usize),
    #[error("germ set is empty or contains an empty germ")]
    EmptyGerms,
    #[error("fiducial set is empty")]
    EmptyFiducials,
    #[error("max length {0} is not a power of two")]
    MaxLength(usize),
    #[error("circuit of length {len} exceeds pad length {l_pad}")]
    TooLong { len: usize, l_pad: usize },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("unsupported dataset version {found:?} (this build reads version {expected})")]
    Version { found: Option<u64>, expected: u32 },
    #[error(transparent)]
    Ptm(#[from] PtmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
