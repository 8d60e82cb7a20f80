//! Gate labels and circuits with their text form.
//!
//! A label prints as `Gx@0` or `Gcphase@0,1`; a circuit joins labels with
//! `:` and the empty circuit prints as `{}`.

use std::fmt;
use std::str::FromStr;

use crate::params::GateKind;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GateLabel {
    pub kind: GateKind,
    pub targets: Vec<usize>,
}

impl GateLabel {
    pub fn single(kind: GateKind, qubit: usize) -> Self {
        GateLabel { kind, targets: vec![qubit] }
    }

    pub fn cphase(a: usize, b: usize) -> Self {
        GateLabel { kind: GateKind::Gcphase, targets: vec![a, b] }
    }

    pub fn acts_on(&self, qubit: usize) -> bool {
        self.targets.contains(&qubit)
    }
}

impl fmt::Display for GateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t: Vec<String> = self.targets.iter().map(|q| q.to_string()).collect();
        write!(f, "{}@{}", self.kind, t.join(","))
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("cannot parse gate label {0:?}")]
pub struct LabelParseError(pub String);

impl FromStr for GateLabel {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || LabelParseError(s.to_string());
        let (name, targets) = s.split_once('@').ok_or_else(err)?;
        let kind = GateKind::parse(name).ok_or_else(err)?;
        let targets: Vec<usize> =
            targets.split(',').map(|t| t.parse().map_err(|_| err())).collect::<Result<_, _>>()?;
        if targets.len() != kind.arity() {
            return Err(err());
        }
        Ok(GateLabel { kind, targets })
    }
}

/// Gate sequence, applied left to right.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Circuit(pub Vec<GateLabel>);

impl Circuit {
    pub fn empty() -> Self {
        Circuit(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn then(&self, other: &Circuit) -> Circuit {
        Circuit(self.0.iter().chain(other.0.iter()).cloned().collect())
    }

    pub fn repeat(&self, k: usize) -> Circuit {
        Circuit(self.0.iter().cloned().cycle().take(self.0.len() * k).collect())
    }

    pub fn labels(&self) -> &[GateLabel] {
        &self.0
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("{}");
        }
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join(":"))
    }
}

impl FromStr for Circuit {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "{}" {
            return Ok(Circuit::empty());
        }
        s.split(':').map(GateLabel::from_str).collect::<Result<Vec<_>, _>>().map(Circuit)
    }
}
