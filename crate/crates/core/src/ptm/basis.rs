use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{PtmError, IMAG_TOLERANCE};

/// Normalized Pauli products ordered lexicographically, qubit 0 leftmost.
#[derive(Debug, Clone)]
pub struct PauliBasis {
    n_qubits: usize,
    elements: Vec<DMatrix<Complex64>>,
}

fn single_qubit_paulis() -> [DMatrix<Complex64>; 4] {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
    .map(|m| m * Complex64::new(s, 0.0))
}

pub fn build_pauli_basis(n_qubits: usize) -> Result<PauliBasis, PtmError> {
    if !(1..=3).contains(&n_qubits) {
        return Err(PtmError::QubitCount(n_qubits));
    }
    let singles = single_qubit_paulis();
    let mut elements: Vec<DMatrix<Complex64>> = singles.to_vec();
    for _ in 1..n_qubits {
        elements = elements
            .iter()
            .flat_map(|a| singles.iter().map(move |b| a.kronecker(b)))
            .collect();
    }
    Ok(PauliBasis { n_qubits, elements })
}

impl PauliBasis {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Hilbert-space dimension d = 2ⁿ.
    pub fn hilbert_dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Superoperator dimension d² = 4ⁿ.
    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[DMatrix<Complex64>] {
        &self.elements
    }

    /// Coefficients `Tr(Bᵢ† A)` of a Hermitian operator, which are real.
    pub fn project(&self, op: &DMatrix<Complex64>) -> Result<DVector<f64>, PtmError> {
        let mut out = DVector::zeros(self.dim());
        for (i, b) in self.elements.iter().enumerate() {
            let v = trace_of_product(&b.adjoint(), op);
            if v.im.abs() > IMAG_TOLERANCE {
                return Err(PtmError::ImaginaryResidue(v.im.abs()));
            }
            out[i] = v.re;
        }
        Ok(out)
    }
}

/// `Tr(A B)` without forming the product.
pub(crate) fn trace_of_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_qubit_basis_matches_normalized_paulis() {
        let basis = build_pauli_basis(1).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let e = basis.elements();
        assert_eq!(e[0][(0, 0)].re, s);
        assert_eq!(e[0][(1, 1)].re, s);
        assert_eq!(e[1][(0, 1)].re, s);
        assert_eq!(e[2][(0, 1)].im, -s);
        assert_eq!(e[2][(1, 0)].im, s);
        assert_eq!(e[3][(1, 1)].re, -s);
    }

    #[test]
    fn basis_invariants_hold() {
        for n in 1..=3 {
            let basis = build_pauli_basis(n).unwrap();
            let d = basis.hilbert_dim();
            assert_eq!(basis.dim(), d * d);
            for (i, bi) in basis.elements().iter().enumerate() {
                assert!((bi - bi.adjoint()).iter().all(|z| z.norm() < 1e-15), "hermiticity");
                let tr = bi.trace();
                if i == 0 {
                    assert!((tr.re - (d as f64).sqrt()).abs() < 1e-12);
                } else {
                    assert!(tr.norm() < 1e-12, "traceless element {i}");
                }
                for (j, bj) in basis.elements().iter().enumerate() {
                    let t = trace_of_product(bi, bj);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((t.re - expect).abs() < 1e-12 && t.im.abs() < 1e-12, "Tr(B{i}B{j})");
                }
            }
        }
    }

    #[test]
    fn two_qubit_ordering_is_lexicographic() {
        let one = build_pauli_basis(1).unwrap();
        let two = build_pauli_basis(2).unwrap();
        // index 1*4 + 3 = X ⊗ Z
        let xz = one.elements()[1].kronecker(&one.elements()[3]);
        assert_eq!(two.elements()[7], xz);
    }

    #[test]
    fn qubit_count_out_of_range() {
        assert!(matches!(build_pauli_basis(0), Err(PtmError::QubitCount(0))));
        assert!(matches!(build_pauli_basis(4), Err(PtmError::QubitCount(4))));
    }
}
