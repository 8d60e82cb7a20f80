use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::basis::trace_of_product;
use super::{
    build_pauli_basis, computational_effects, computational_state, tensor, EffectSuperbra,
    PauliBasis, Ptm, PtmError, StateSuperket, IMAG_TOLERANCE,
};
use crate::circuit::GateLabel;
use crate::params::{ErrorParams, GateKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

fn cz(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// PTM of `ρ ↦ U ρ U†`: `R_jk = Tr(B_j U B_k U†)`.
///
/// Unitary channels are trace preserving and unital, so the first row and
/// column are set to `(1, 0, …, 0)` exactly rather than left with rounding noise.
pub fn unitary_ptm(u: &DMatrix<Complex64>, basis: &PauliBasis) -> Result<Ptm, PtmError> {
    let mut ptm = real_part(conjugation_ptm(u, u, basis))?;
    let dim = ptm.dim();
    for i in 0..dim {
        ptm.matrix[(0, i)] = 0.0;
        ptm.matrix[(i, 0)] = 0.0;
    }
    ptm.matrix[(0, 0)] = 1.0;
    Ok(ptm)
}

/// Derivative of the unitary PTM along `du = ∂U`.
fn unitary_ptm_derivative(
    u: &DMatrix<Complex64>,
    du: &DMatrix<Complex64>,
    basis: &PauliBasis,
) -> Result<Ptm, PtmError> {
    let mut d = real_part(conjugation_ptm(du, u, basis) + conjugation_ptm(u, du, basis))?;
    let dim = d.dim();
    for i in 0..dim {
        d.matrix[(0, i)] = 0.0;
        d.matrix[(i, 0)] = 0.0;
    }
    Ok(d)
}

fn real_part(m: DMatrix<Complex64>) -> Result<Ptm, PtmError> {
    let worst = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst > IMAG_TOLERANCE {
        return Err(PtmError::ImaginaryResidue(worst));
    }
    Ok(Ptm { matrix: m.map(|z| z.re) })
}

/// `R_jk = Tr(B_j L B_k R†)`
fn conjugation_ptm(
    left: &DMatrix<Complex64>,
    right: &DMatrix<Complex64>,
    basis: &PauliBasis,
) -> DMatrix<Complex64> {
    let dim = basis.dim();
    let elems = basis.elements();
    let right_dag = right.adjoint();
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let image = left * &elems[k] * &right_dag;
        for j in 0..dim {
            m[(j, k)] = trace_of_product(&elems[j], &image);
        }
    }
    m
}

fn rotation_unitary(axis: Axis, angle: f64) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    // U = cos(θ/2) I − i sin(θ/2) σ
    let (s, c) = (angle / 2.0).sin_cos();
    let (u, du) = match axis {
        Axis::X => (
            [cz(c, 0.0), cz(0.0, -s), cz(0.0, -s), cz(c, 0.0)],
            [cz(-s / 2.0, 0.0), cz(0.0, -c / 2.0), cz(0.0, -c / 2.0), cz(-s / 2.0, 0.0)],
        ),
        Axis::Y => (
            [cz(c, 0.0), cz(-s, 0.0), cz(s, 0.0), cz(c, 0.0)],
            [cz(-s / 2.0, 0.0), cz(-c / 2.0, 0.0), cz(c / 2.0, 0.0), cz(-s / 2.0, 0.0)],
        ),
    };
    (DMatrix::from_row_slice(2, 2, &u), DMatrix::from_row_slice(2, 2, &du))
}

fn cphase_unitary(phase: f64) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let mut u = DMatrix::<Complex64>::identity(4, 4);
    let mut du = DMatrix::<Complex64>::zeros(4, 4);
    let e = Complex64::from_polar(1.0, phase);
    u[(3, 3)] = e;
    du[(3, 3)] = e * cz(0.0, 1.0);
    (u, du)
}

fn check_angle(angle: f64) -> Result<(), PtmError> {
    if angle.is_finite() {
        Ok(())
    } else {
        Err(PtmError::NonFiniteAngle(angle))
    }
}

/// PTM of `exp(−i·angle·σ_axis/2)`.
pub fn rotation_ptm(axis: Axis, angle: f64) -> Result<Ptm, PtmError> {
    check_angle(angle)?;
    let basis = build_pauli_basis(1)?;
    let (u, _) = rotation_unitary(axis, angle);
    unitary_ptm(&u, &basis)
}

/// 16×16 PTM of `diag(1, 1, 1, e^{i·phase})`.
pub fn cphase_ptm(phase: f64) -> Result<Ptm, PtmError> {
    check_angle(phase)?;
    let basis = build_pauli_basis(2)?;
    let (u, _) = cphase_unitary(phase);
    unitary_ptm(&u, &basis)
}

/// `diag(1, 1−p, …, 1−p)`.
pub fn depolarizing_ptm(p: f64, n_qubits: usize) -> Result<Ptm, PtmError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(PtmError::Depolarization(p));
    }
    if !(1..=3).contains(&n_qubits) {
        return Err(PtmError::QubitCount(n_qubits));
    }
    let dim = 1usize << (2 * n_qubits);
    let mut diag = DVector::from_element(dim, 1.0 - p);
    diag[0] = 1.0;
    Ok(Ptm { matrix: DMatrix::from_diagonal(&diag) })
}

fn depolarizing_derivative(dim: usize) -> DMatrix<f64> {
    let mut diag = DVector::from_element(dim, -1.0);
    diag[0] = 0.0;
    DMatrix::from_diagonal(&diag)
}

fn validate_label(label: &GateLabel, n_qubits: usize) -> Result<(), PtmError> {
    let bad = || PtmError::BadLabel { label: label.to_string(), n_qubits };
    if label.targets.len() != label.kind.arity() || label.targets.iter().any(|&t| t >= n_qubits) {
        return Err(bad());
    }
    if label.kind == GateKind::Gcphase && (n_qubits != 2 || label.targets[0] == label.targets[1]) {
        return Err(bad());
    }
    Ok(())
}

fn embed(local: &Ptm, target: usize, n_qubits: usize) -> Ptm {
    let id = Ptm::identity(4);
    let mut out: Option<Ptm> = None;
    for q in 0..n_qubits {
        let factor = if q == target { local } else { &id };
        out = Some(match out {
            None => factor.clone(),
            Some(acc) => tensor(&acc, factor),
        });
    }
    out.expect("n_qubits >= 1")
}

fn ideal_angle(kind: GateKind) -> f64 {
    match kind {
        GateKind::Gi => 0.0,
        GateKind::Gx | GateKind::Gy => FRAC_PI_2,
        GateKind::Gcphase => PI,
    }
}

/// Local (unembedded) unitary and its angle derivative for a parametrized kind.
fn local_unitary(kind: GateKind, over_rotation: f64) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let angle = ideal_angle(kind) + over_rotation;
    match kind {
        GateKind::Gi => (DMatrix::identity(2, 2), DMatrix::zeros(2, 2)),
        GateKind::Gx => rotation_unitary(Axis::X, angle),
        GateKind::Gy => rotation_unitary(Axis::Y, angle),
        GateKind::Gcphase => cphase_unitary(angle),
    }
}

fn local_basis(kind: GateKind) -> Result<PauliBasis, PtmError> {
    build_pauli_basis(kind.arity())
}

/// Noise-free PTM of a gate, embedded into the `n_qubits` register.
pub fn ideal_gate_ptm(label: &GateLabel, n_qubits: usize) -> Result<Ptm, PtmError> {
    validate_label(label, n_qubits)?;
    let basis = local_basis(label.kind)?;
    let (u, _) = local_unitary(label.kind, 0.0);
    let local = unitary_ptm(&u, &basis)?;
    Ok(place(label, local, n_qubits))
}

fn place(label: &GateLabel, local: Ptm, n_qubits: usize) -> Ptm {
    match label.kind {
        // Gcphase is symmetric under qubit exchange, so target order is irrelevant.
        GateKind::Gcphase => local,
        _ => embed(&local, label.targets[0], n_qubits),
    }
}

/// `D(p) · R(θ_ideal + ε)`, embedded on the target qubit(s).
///
/// `Gi` is always the noiseless identity.
pub fn noisy_gate_ptm(label: &GateLabel, params: &ErrorParams, n_qubits: usize) -> Result<Ptm, PtmError> {
    Ok(noisy_gate_derivatives(label, params, n_qubits)?.0)
}

/// Noisy PTM together with `∂M/∂ε` and `∂M/∂p`.
///
/// The derivatives are `None` for `Gi`, which carries no parameters.
pub fn noisy_gate_derivatives(
    label: &GateLabel,
    params: &ErrorParams,
    n_qubits: usize,
) -> Result<(Ptm, Option<(Ptm, Ptm)>), PtmError> {
    validate_label(label, n_qubits)?;
    if label.kind == GateKind::Gi {
        return Ok((Ptm::identity(1 << (2 * n_qubits)), None));
    }
    let err = params.get(label.kind).ok_or(PtmError::MissingParams(label.kind))?;
    check_angle(err.over_rotation)?;
    let local_q = label.kind.arity();
    let depol = depolarizing_ptm(err.depolarization, local_q)?;
    let basis = local_basis(label.kind)?;
    let (u, du) = local_unitary(label.kind, err.over_rotation);
    let rot = unitary_ptm(&u, &basis)?;
    let drot = unitary_ptm_derivative(&u, &du, &basis)?;

    let m = Ptm { matrix: &depol.matrix * &rot.matrix };
    let dm_eps = Ptm { matrix: &depol.matrix * &drot.matrix };
    let dm_p = Ptm { matrix: depolarizing_derivative(basis.dim()) * &rot.matrix };
    Ok((
        place(label, m, n_qubits),
        Some((place(label, dm_eps, n_qubits), place(label, dm_p, n_qubits))),
    ))
}

/// Gate channels plus |0…0⟩ preparation and computational-basis effects.
#[derive(Debug, Clone)]
pub struct GateSet {
    pub n_qubits: usize,
    pub gates: BTreeMap<GateLabel, Ptm>,
    pub prep: StateSuperket,
    pub effects: Vec<EffectSuperbra>,
}

impl GateSet {
    /// Builds noisy channels for every label in `labels`.
    pub fn noisy(
        n_qubits: usize,
        labels: impl IntoIterator<Item = GateLabel>,
        params: &ErrorParams,
    ) -> Result<Self, PtmError> {
        let basis = build_pauli_basis(n_qubits)?;
        let mut gates = BTreeMap::new();
        for label in labels {
            let m = noisy_gate_ptm(&label, params, n_qubits)?;
            gates.insert(label, m);
        }
        Ok(GateSet {
            n_qubits,
            gates,
            prep: computational_state(&basis, 0),
            effects: computational_effects(&basis),
        })
    }

    /// Noise-free channels for every label in `labels`.
    pub fn ideal(n_qubits: usize, labels: impl IntoIterator<Item = GateLabel>) -> Result<Self, PtmError> {
        let kinds = crate::params::parametrized_kinds(n_qubits);
        Self::noisy(n_qubits, labels, &ErrorParams::zeros(&kinds))
    }

    pub fn dim(&self) -> usize {
        1 << (2 * self.n_qubits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ptm::{choi_min_eigenvalue, compose};
    use approx::assert_abs_diff_eq;

    fn mat4(rows: [[f64; 4]; 4]) -> DMatrix<f64> {
        DMatrix::from_fn(4, 4, |r, c| rows[r][c])
    }

    #[test]
    fn rx_half_pi_is_exact() {
        let m = rotation_ptm(Axis::X, FRAC_PI_2).unwrap();
        let expect = mat4([[1., 0., 0., 0.], [0., 1., 0., 0.], [0., 0., 0., -1.], [0., 0., 1., 0.]]);
        assert_abs_diff_eq!(m.matrix, expect, epsilon = 1e-12);
    }

    #[test]
    fn ry_half_pi() {
        let m = rotation_ptm(Axis::Y, FRAC_PI_2).unwrap();
        let expect = mat4([[1., 0., 0., 0.], [0., 0., 0., 1.], [0., 0., 1., 0.], [0., -1., 0., 0.]]);
        assert_abs_diff_eq!(m.matrix, expect, epsilon = 1e-12);
    }

    #[test]
    fn zero_rotation_is_identity() {
        for axis in [Axis::X, Axis::Y] {
            assert_abs_diff_eq!(rotation_ptm(axis, 0.0).unwrap().matrix, DMatrix::identity(4, 4), epsilon = 1e-15);
        }
        assert!(rotation_ptm(Axis::X, f64::NAN).is_err());
    }

    #[test]
    fn rotation_matches_closed_form() {
        // R_x(θ): rotates the (y, z) block.
        for &t in &[0.3, -1.2, 2.5] {
            let (s, c) = f64::sin_cos(t);
            let m = rotation_ptm(Axis::X, t).unwrap();
            let expect = mat4([[1., 0., 0., 0.], [0., 1., 0., 0.], [0., 0., c, -s], [0., 0., s, c]]);
            assert_abs_diff_eq!(m.matrix, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn cphase_properties() {
        assert_abs_diff_eq!(cphase_ptm(0.0).unwrap().matrix, DMatrix::identity(16, 16), epsilon = 1e-12);
        let cz = cphase_ptm(PI).unwrap();
        let sq = compose(&cz, &cz).unwrap();
        assert_abs_diff_eq!(sq.matrix, DMatrix::identity(16, 16), epsilon = 1e-12);
        assert_abs_diff_eq!(cz.matrix.transpose() * &cz.matrix, DMatrix::identity(16, 16), epsilon = 1e-12);
    }

    #[test]
    fn cz_on_plus_plus() {
        // CZ|++⟩ measured in the computational basis: each outcome 1/4.
        let ry = rotation_ptm(Axis::Y, FRAC_PI_2).unwrap();
        let prep = tensor(&ry, &ry);
        let cz = cphase_ptm(PI).unwrap();
        let basis = build_pauli_basis(2).unwrap();
        let s0 = computational_state(&basis, 0);
        let s = cz.apply(&prep.apply(&s0).unwrap()).unwrap();
        let e = computational_effects(&basis);
        assert_abs_diff_eq!(e[0].apply(&s), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn depolarizing_channel() {
        assert_eq!(depolarizing_ptm(0.0, 1).unwrap(), Ptm::identity(4));
        let full = depolarizing_ptm(1.0, 2).unwrap();
        assert_eq!(full.matrix[(0, 0)], 1.0);
        assert_eq!(full.matrix.sum(), 1.0);
        assert!(matches!(depolarizing_ptm(1.5, 1), Err(PtmError::Depolarization(_))));
        assert!(depolarizing_ptm(-0.1, 1).is_err());
    }

    #[test]
    fn noisy_gate_composition_order() {
        let kinds = crate::params::parametrized_kinds(1);
        let params = ErrorParams::uniform(&kinds, 0.1, 0.01);
        let m = noisy_gate_ptm(&GateLabel::single(GateKind::Gx, 0), &params, 1).unwrap();
        let expect = depolarizing_ptm(0.01, 1).unwrap().matrix * rotation_ptm(Axis::X, FRAC_PI_2 + 0.1).unwrap().matrix;
        assert_abs_diff_eq!(m.matrix, expect, epsilon = 1e-12);

        let zero = ErrorParams::zeros(&kinds);
        let ideal = noisy_gate_ptm(&GateLabel::single(GateKind::Gx, 0), &zero, 1).unwrap();
        assert_abs_diff_eq!(ideal.matrix, rotation_ptm(Axis::X, FRAC_PI_2).unwrap().matrix, epsilon = 1e-12);
    }

    #[test]
    fn two_qubit_embedding_and_trace_preservation() {
        let kinds = crate::params::parametrized_kinds(2);
        let params = ErrorParams::uniform(&kinds, 0.1, 0.01);
        let cz = noisy_gate_ptm(&GateLabel::cphase(0, 1), &params, 2).unwrap();
        assert_eq!(cz.matrix[(0, 0)], 1.0);
        assert!((1..16).all(|c| cz.matrix[(0, c)] == 0.0));

        let x1 = noisy_gate_ptm(&GateLabel::single(GateKind::Gx, 1), &params, 2).unwrap();
        let local = noisy_gate_ptm(&GateLabel::single(GateKind::Gx, 0), &ErrorParams::uniform(&kinds, 0.1, 0.01), 1)
            .unwrap();
        assert_abs_diff_eq!(x1.matrix, tensor(&Ptm::identity(4), &local).matrix, epsilon = 1e-15);
    }

    #[test]
    fn label_validation() {
        let params = ErrorParams::zeros(&crate::params::parametrized_kinds(2));
        assert!(noisy_gate_ptm(&GateLabel::cphase(0, 1), &params, 1).is_err());
        assert!(noisy_gate_ptm(&GateLabel::single(GateKind::Gx, 1), &params, 1).is_err());
        assert!(noisy_gate_ptm(&GateLabel::cphase(1, 1), &params, 2).is_err());
        let one_q = ErrorParams::zeros(&crate::params::parametrized_kinds(1));
        assert!(matches!(
            noisy_gate_ptm(&GateLabel::cphase(0, 1), &one_q, 2),
            Err(PtmError::MissingParams(GateKind::Gcphase))
        ));
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let kinds = crate::params::parametrized_kinds(2);
        let h = 1e-6;
        for label in [GateLabel::single(GateKind::Gy, 0), GateLabel::cphase(0, 1)] {
            let base = ErrorParams::uniform(&kinds, 0.13, 0.04);
            let (_, d) = noisy_gate_derivatives(&label, &base, 2).unwrap();
            let (de, dp) = d.unwrap();
            let shifted = |de_: f64, dp_: f64| {
                let mut p = base.clone();
                for g in p.gates.iter_mut() {
                    if g.0 == label.kind {
                        g.1.over_rotation += de_;
                        g.1.depolarization += dp_;
                    }
                }
                noisy_gate_ptm(&label, &p, 2).unwrap().matrix
            };
            let fd_e = (shifted(h, 0.0) - shifted(-h, 0.0)) / (2.0 * h);
            let fd_p = (shifted(0.0, h) - shifted(0.0, -h)) / (2.0 * h);
            assert_abs_diff_eq!(de.matrix, fd_e, epsilon = 1e-8);
            assert_abs_diff_eq!(dp.matrix, fd_p, epsilon = 1e-8);
        }
    }

    #[test]
    fn noisy_channels_are_cptp() {
        let basis1 = build_pauli_basis(1).unwrap();
        let basis2 = build_pauli_basis(2).unwrap();
        let kinds = crate::params::parametrized_kinds(2);
        for &(e, p) in &[(0.0, 0.0), (1.0, 1.0), (-0.7, 0.3), (0.1, 0.01)] {
            let params = ErrorParams::uniform(&kinds, e, p);
            let m = noisy_gate_ptm(&GateLabel::single(GateKind::Gx, 0), &params, 1).unwrap();
            assert!(choi_min_eigenvalue(&m, &basis1).unwrap() >= -1e-9);
            let m = noisy_gate_ptm(&GateLabel::cphase(0, 1), &params, 2).unwrap();
            assert!(choi_min_eigenvalue(&m, &basis2).unwrap() >= -1e-9);
        }
    }
}
