use std::collections::HashSet;

use crate::circuit::{Circuit, GateLabel};
use crate::params::GateKind;

use super::ExperimentError;

/// Fiducial-germ-fiducial experiment design.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDesign {
    pub n_qubits: usize,
    pub prep_fiducials: Vec<Circuit>,
    pub meas_fiducials: Vec<Circuit>,
    pub germs: Vec<Circuit>,
    /// Germ-power caps `1, 2, 4, …, L_max`.
    pub max_lengths: Vec<usize>,
    /// Deduplicated composite circuits in generation order.
    pub circuits: Vec<Circuit>,
}

fn g(kind: GateKind, q: usize) -> GateLabel {
    GateLabel::single(kind, q)
}

fn seq(labels: &[GateLabel]) -> Circuit {
    Circuit(labels.to_vec())
}

/// `{∅, Gx, Gy, GxGx, GxGxGx, GyGyGy}` on qubit 0.
pub fn standard_fiducials_1q() -> Vec<Circuit> {
    let (x, y) = (g(GateKind::Gx, 0), g(GateKind::Gy, 0));
    vec![
        Circuit::empty(),
        seq(&[x.clone()]),
        seq(&[y.clone()]),
        seq(&[x.clone(), x.clone()]),
        seq(&[x.clone(), x.clone(), x]),
        seq(&[y.clone(), y.clone(), y]),
    ]
}

fn germs_on(q: usize, with_idle: bool) -> Vec<Circuit> {
    let (i, x, y) = (g(GateKind::Gi, q), g(GateKind::Gx, q), g(GateKind::Gy, q));
    let mut out = Vec::new();
    if with_idle {
        out.push(seq(&[i]));
    }
    out.extend([
        seq(&[x.clone()]),
        seq(&[y.clone()]),
        seq(&[x.clone(), y.clone()]),
        seq(&[x.clone(), x, y]),
    ]);
    out
}

/// `{Gi, Gx, Gy, GxGy, GxGxGy}` on qubit 0.
pub fn standard_germs_1q() -> Vec<Circuit> {
    germs_on(0, true)
}

/// Products `f₀ ⊗ f₁` of the single-qubit fiducials with at most two gates,
/// written as `f₀` on qubit 0 followed by `f₁` on qubit 1.
pub fn standard_fiducials_2q() -> Vec<Circuit> {
    let short: Vec<Circuit> = standard_fiducials_1q().into_iter().filter(|c| c.len() <= 2).collect();
    let on = |c: &Circuit, q: usize| Circuit(c.labels().iter().map(|l| g(l.kind, q)).collect());
    let mut out = Vec::new();
    for f0 in &short {
        for f1 in &short {
            out.push(on(f0, 0).then(&on(f1, 1)));
        }
    }
    out
}

/// Single-qubit germs on each qubit plus the entangling germs
/// `{Gcphase, Gx@0·Gcphase, Gy@1·Gcphase}`.
pub fn standard_germs_2q() -> Vec<Circuit> {
    let cz = GateLabel::cphase(0, 1);
    let mut out = germs_on(0, true);
    out.extend(germs_on(1, false));
    out.extend([
        seq(&[cz.clone()]),
        seq(&[g(GateKind::Gx, 0), cz.clone()]),
        seq(&[g(GateKind::Gy, 1), cz]),
    ]);
    out
}

/// Fiducial pairs used with germ index `germ`: all pairs for one qubit; for two
/// qubits each preparation fiducial `i` meets measurement fiducials
/// `(i + germ) mod m` and `(i + germ + 7) mod m`.
fn fiducial_pairs(n_qubits: usize, n_prep: usize, n_meas: usize, germ: usize) -> Vec<(usize, usize)> {
    if n_qubits == 1 {
        return (0..n_prep).flat_map(|i| (0..n_meas).map(move |j| (i, j))).collect();
    }
    let mut pairs = Vec::new();
    for i in 0..n_prep {
        for offset in [0, 7] {
            let j = (i + germ + offset) % n_meas;
            if !pairs.contains(&(i, j)) {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Builds the composite circuit list.
///
/// The first block is every fiducial pair with no germ; then, for each cap `L`
/// in the ladder and each germ `g` with `|g| ≤ L`, the circuits
/// `F_prep · g^⌊L/|g|⌋ · F_meas`. Later duplicates are dropped.
pub fn standard_design(
    n_qubits: usize,
    max_length: usize,
    germs: &[Circuit],
    fiducials: &[Circuit],
) -> Result<ExperimentDesign, ExperimentError> {
    if !(1..=2).contains(&n_qubits) {
        return Err(ExperimentError::QubitCount(n_qubits));
    }
    if germs.is_empty() || germs.iter().any(|g| g.is_empty()) {
        return Err(ExperimentError::EmptyGerms);
    }
    if fiducials.is_empty() {
        return Err(ExperimentError::EmptyFiducials);
    }
    if max_length == 0 || !max_length.is_power_of_two() {
        return Err(ExperimentError::MaxLength(max_length));
    }
    let max_lengths: Vec<usize> =
        std::iter::successors(Some(1usize), |l| (*l < max_length).then_some(l * 2)).collect();

    let mut seen = HashSet::new();
    let mut circuits = Vec::new();
    let mut push = |c: Circuit| {
        if seen.insert(c.clone()) {
            circuits.push(c);
        }
    };
    for (i, j) in fiducial_pairs(n_qubits, fiducials.len(), fiducials.len(), 0) {
        push(fiducials[i].then(&fiducials[j]));
    }
    for &l in &max_lengths {
        for (gi, germ) in germs.iter().enumerate() {
            if germ.len() > l {
                continue;
            }
            let power = germ.repeat(l / germ.len());
            for (i, j) in fiducial_pairs(n_qubits, fiducials.len(), fiducials.len(), gi) {
                push(fiducials[i].then(&power).then(&fiducials[j]));
            }
        }
    }
    Ok(ExperimentDesign {
        n_qubits,
        prep_fiducials: fiducials.to_vec(),
        meas_fiducials: fiducials.to_vec(),
        germs: germs.to_vec(),
        max_lengths,
        circuits,
    })
}

/// Design with the standard fiducial and germ sets for `n_qubits`.
pub fn default_design(n_qubits: usize, max_length: usize) -> Result<ExperimentDesign, ExperimentError> {
    match n_qubits {
        1 => standard_design(1, max_length, &standard_germs_1q(), &standard_fiducials_1q()),
        2 => standard_design(2, max_length, &standard_germs_2q(), &standard_fiducials_2q()),
        n => Err(ExperimentError::QubitCount(n)),
    }
}

impl ExperimentDesign {
    /// Distinct gate labels used anywhere in the design, sorted.
    pub fn gate_labels(&self) -> Vec<GateLabel> {
        let mut labels: Vec<GateLabel> =
            self.circuits.iter().flat_map(|c| c.labels().iter().cloned()).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// One circuit per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.circuits {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }
}
