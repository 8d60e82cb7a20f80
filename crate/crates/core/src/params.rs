//! Error-model parameters: one (over-rotation, depolarization) pair per gate kind.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Gi,
    Gx,
    Gy,
    Gcphase,
}

impl GateKind {
    pub const ALL: [GateKind; 4] = [GateKind::Gi, GateKind::Gx, GateKind::Gy, GateKind::Gcphase];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Gi => "Gi",
            GateKind::Gx => "Gx",
            GateKind::Gy => "Gy",
            GateKind::Gcphase => "Gcphase",
        }
    }

    pub fn parse(s: &str) -> Option<GateKind> {
        GateKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::Gcphase => 2,
            _ => 1,
        }
    }

    /// Short name used in report columns.
    pub fn short(self) -> &'static str {
        match self {
            GateKind::Gi => "I",
            GateKind::Gx => "X",
            GateKind::Gy => "Y",
            GateKind::Gcphase => "CPHASE",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Gate kinds carrying error parameters for an `n_qubits` gate set.
pub fn parametrized_kinds(n_qubits: usize) -> Vec<GateKind> {
    if n_qubits >= 2 {
        vec![GateKind::Gx, GateKind::Gy, GateKind::Gcphase]
    } else {
        vec![GateKind::Gx, GateKind::Gy]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateError {
    /// Radians added to the ideal rotation angle.
    pub over_rotation: f64,
    /// Depolarization strength p in [0, 1].
    pub depolarization: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParamsError {
    #[error("depolarization {value} for {kind} outside [0, 1]")]
    Depolarization { kind: GateKind, value: f64 },
    #[error("over-rotation {value} for {kind} outside [-1, 1]")]
    OverRotation { kind: GateKind, value: f64 },
    #[error("gate kind {0} listed twice")]
    Duplicate(GateKind),
    #[error("expected {expected} flat values, got {got}")]
    FlatLength { expected: usize, got: usize },
}

/// Ordered per-gate error parameters.
///
/// The flat layout used by models and fitters is
/// `[ε_k for k in kinds] ++ [p_k for k in kinds]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorParams {
    pub gates: Vec<(GateKind, GateError)>,
}

impl ErrorParams {
    pub fn new(gates: Vec<(GateKind, GateError)>) -> Result<Self, ParamsError> {
        let p = ErrorParams { gates };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(kinds: &[GateKind]) -> Self {
        let gates = kinds
            .iter()
            .map(|&k| (k, GateError { over_rotation: 0.0, depolarization: 0.0 }))
            .collect();
        ErrorParams { gates }
    }

    /// Same (ε, p) for every kind.
    pub fn uniform(kinds: &[GateKind], over_rotation: f64, depolarization: f64) -> Self {
        let gates = kinds.iter().map(|&k| (k, GateError { over_rotation, depolarization })).collect();
        ErrorParams { gates }
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        for (i, (k, e)) in self.gates.iter().enumerate() {
            if self.gates[..i].iter().any(|(k2, _)| k2 == k) {
                return Err(ParamsError::Duplicate(*k));
            }
            if !(0.0..=1.0).contains(&e.depolarization) {
                return Err(ParamsError::Depolarization { kind: *k, value: e.depolarization });
            }
            if !(-1.0..=1.0).contains(&e.over_rotation) {
                return Err(ParamsError::OverRotation { kind: *k, value: e.over_rotation });
            }
        }
        Ok(())
    }

    pub fn get(&self, kind: GateKind) -> Option<GateError> {
        self.gates.iter().find(|(k, _)| *k == kind).map(|(_, e)| *e)
    }

    pub fn kinds(&self) -> Vec<GateKind> {
        self.gates.iter().map(|(k, _)| *k).collect()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.gates
            .iter()
            .map(|(_, e)| e.over_rotation)
            .chain(self.gates.iter().map(|(_, e)| e.depolarization))
            .collect()
    }

    pub fn from_flat(kinds: &[GateKind], flat: &[f64]) -> Result<Self, ParamsError> {
        let n = kinds.len();
        if flat.len() != 2 * n {
            return Err(ParamsError::FlatLength { expected: 2 * n, got: flat.len() });
        }
        let gates = kinds
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, GateError { over_rotation: flat[i], depolarization: flat[n + i] }))
            .collect();
        Ok(ErrorParams { gates })
    }

    /// Column names matching [`ErrorParams::to_flat`].
    pub fn flat_names(kinds: &[GateKind]) -> Vec<String> {
        kinds
            .iter()
            .map(|k| format!("eps_{}", k.short()))
            .chain(kinds.iter().map(|k| format!("p_{}", k.short())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_layout_round_trips() {
        let kinds = parametrized_kinds(2);
        let flat = [0.1, 0.15, 0.1, 0.01, 0.02, 0.03];
        let p = ErrorParams::from_flat(&kinds, &flat).unwrap();
        assert_eq!(p.get(GateKind::Gy).unwrap().depolarization, 0.02);
        assert_eq!(p.to_flat(), flat);
        assert_eq!(ErrorParams::flat_names(&kinds)[3], "p_X");
    }

    #[test]
    fn validation() {
        let bad = ErrorParams::uniform(&[GateKind::Gx], 0.1, 1.5);
        assert!(matches!(bad.validate(), Err(ParamsError::Depolarization { .. })));
        let bad = ErrorParams::uniform(&[GateKind::Gx], -1.5, 0.1);
        assert!(matches!(bad.validate(), Err(ParamsError::OverRotation { .. })));
        let dup = ErrorParams::uniform(&[GateKind::Gx, GateKind::Gx], 0.1, 0.1);
        assert_eq!(dup.validate(), Err(ParamsError::Duplicate(GateKind::Gx)));
        assert!(ErrorParams::from_flat(&[GateKind::Gx], &[0.1]).is_err());
    }
}
