use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{PauliBasis, Ptm, PtmError};

/// Choi matrix `J = Σ_{jk} R_{jk} B_kᵀ ⊗ B_j`.
///
/// `J` is positive semidefinite iff the channel is completely positive.
pub fn choi_matrix(ptm: &Ptm, basis: &PauliBasis) -> Result<DMatrix<Complex64>, PtmError> {
    if ptm.dim() != basis.dim() {
        return Err(PtmError::DimMismatch { left: ptm.dim(), right: basis.dim() });
    }
    let d = basis.hilbert_dim();
    let mut choi = DMatrix::<Complex64>::zeros(d * d, d * d);
    let elems = basis.elements();
    for k in 0..basis.dim() {
        let bkt = elems[k].transpose();
        for j in 0..basis.dim() {
            let r = ptm.matrix[(j, k)];
            if r == 0.0 {
                continue;
            }
            choi += bkt.kronecker(&elems[j]) * Complex64::new(r, 0.0);
        }
    }
    Ok(choi)
}

/// Smallest eigenvalue of the (Hermitian) Choi matrix.
pub fn choi_min_eigenvalue(ptm: &Ptm, basis: &PauliBasis) -> Result<f64, PtmError> {
    let choi = choi_matrix(ptm, basis)?;
    // Symmetrize away rounding noise before the Hermitian solver.
    let herm = (&choi + choi.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}
