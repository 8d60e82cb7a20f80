//! Pauli-transfer-matrix linear algebra.
//!
//! States, measurement effects and channels are expressed in the normalized
//! Pauli basis `{I/√d, σx/√2, σy/√2, σz/√2}^{⊗n}`, where every physical
//! object is real. Channel application is a matrix-vector product and
//! composition is a matrix product.

mod basis;
mod choi;
mod circuit;
mod gates;

pub use basis::{build_pauli_basis, PauliBasis};
pub use choi::{choi_matrix, choi_min_eigenvalue};
pub use circuit::{circuit_probabilities, circuit_probabilities_raw, GateSetJacobian};
pub use gates::{
    cphase_ptm, depolarizing_ptm, ideal_gate_ptm, noisy_gate_derivatives, noisy_gate_ptm,
    rotation_ptm, unitary_ptm, Axis, GateSet,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::fmt;
use std::io::Write;

use crate::params::GateKind;

/// Imaginary residue tolerated when projecting onto the real Pauli basis.
pub const IMAG_TOLERANCE: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum PtmError {
    #[error("number of qubits {0} outside supported range 1..=3")]
    QubitCount(usize),
    #[error("density matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("density matrix trace is {0}, expected 1")]
    NotUnitTrace(f64),
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("depolarization {0} outside [0, 1]")]
    Depolarization(f64),
    #[error("non-finite angle {0}")]
    NonFiniteAngle(f64),
    #[error("gate {label} invalid for a {n_qubits}-qubit gate set")]
    BadLabel { label: String, n_qubits: usize },
    #[error("gate {0} not in gate set")]
    UnknownGate(String),
    #[error("no error parameters for gate kind {0:?}")]
    MissingParams(GateKind),
    #[error("outcome probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("imaginary residue {0:.3e} exceeds tolerance")]
    ImaginaryResidue(f64),
}

/// Column vector `|ρ⟩⟩` with coefficients `Tr(Bᵢ† ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSuperket {
    pub coeffs: DVector<f64>,
}

/// Row vector `⟨⟨E|` of a measurement effect.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectSuperbra {
    pub coeffs: DVector<f64>,
}

impl EffectSuperbra {
    /// `⟨⟨E|ρ⟩⟩`
    pub fn apply(&self, state: &StateSuperket) -> f64 {
        self.coeffs.dot(&state.coeffs)
    }
}

/// A real d²×d² Pauli transfer matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Ptm {
    pub matrix: DMatrix<f64>,
}

impl Ptm {
    pub fn identity(dim: usize) -> Self {
        Ptm { matrix: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, state: &StateSuperket) -> Result<StateSuperket, PtmError> {
        if state.coeffs.len() != self.dim() {
            return Err(PtmError::DimMismatch { left: self.dim(), right: state.coeffs.len() });
        }
        Ok(StateSuperket { coeffs: &self.matrix * &state.coeffs })
    }

    /// Writes the matrix row-major as CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write_matrix_csv(&self.matrix, &mut out)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

impl fmt::Display for Ptm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.matrix.nrows() {
            let row: Vec<String> =
                (0..self.matrix.ncols()).map(|c| format!("{:+.6}", self.matrix[(r, c)])).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

pub(crate) fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, out: &mut W) -> std::io::Result<()> {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.16e}", m[(r, c)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// `a · b`: `b` is applied first.
pub fn compose(a: &Ptm, b: &Ptm) -> Result<Ptm, PtmError> {
    if a.dim() != b.dim() {
        return Err(PtmError::DimMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(Ptm { matrix: &a.matrix * &b.matrix })
}

/// Kronecker product; `a` acts on the leading (more significant) qubits.
pub fn tensor(a: &Ptm, b: &Ptm) -> Ptm {
    Ptm { matrix: a.matrix.kronecker(&b.matrix) }
}

/// Expands `rho` in the Pauli basis.
pub fn superket_from_density(
    rho: &DMatrix<Complex64>,
    basis: &PauliBasis,
) -> Result<StateSuperket, PtmError> {
    let d = basis.hilbert_dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(PtmError::DimMismatch { left: d, right: rho.nrows() });
    }
    let herm_dev = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm_dev > 1e-10 {
        return Err(PtmError::NotHermitian(herm_dev));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
        return Err(PtmError::NotUnitTrace(tr.re));
    }
    Ok(StateSuperket { coeffs: basis.project(rho)? })
}

/// Computational-basis effects, ordered by bitstring with qubit 0 most significant.
pub fn computational_effects(basis: &PauliBasis) -> Vec<EffectSuperbra> {
    let d = basis.hilbert_dim();
    (0..d)
        .map(|b| {
            let mut proj = DMatrix::<Complex64>::zeros(d, d);
            proj[(b, b)] = Complex64::new(1.0, 0.0);
            let coeffs = basis.project(&proj).expect("projector is Hermitian");
            EffectSuperbra { coeffs }
        })
        .collect()
}

/// Superket of the computational basis state `|b⟩⟨b|`.
pub fn computational_state(basis: &PauliBasis, b: usize) -> StateSuperket {
    let d = basis.hilbert_dim();
    let mut proj = DMatrix::<Complex64>::zeros(d, d);
    proj[(b, b)] = Complex64::new(1.0, 0.0);
    StateSuperket { coeffs: basis.project(&proj).expect("projector is Hermitian") }
}
