//! Dense reverse-mode automatic differentiation.
//!
//! A [`Graph`] records operations on `f64` arrays as they are evaluated and
//! replays them backwards from a scalar loss. Graphs are single-threaded and
//! short-lived: build one per forward pass, call [`Graph::backward`], then
//! move the leaf gradients into a [`ParamStore`].

mod adam;
mod checkpoint;
mod ops;
mod param;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT};
pub use param::{ParamStore, Rng};

use ndarray::{ArrayD, IxDyn};

pub type Array = ArrayD<f64>;

/// Layer-norm variance floor. Small enough that normalized rows have unit
/// variance to ~1e-12.
pub const LN_EPS: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum AdError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape { op: &'static str, left: Vec<usize>, right: Vec<usize> },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("{op}: index {index} out of range {len}")]
    Index { op: &'static str, index: usize, len: usize },
    #[error("parameter {0} has no gradient; call backward first")]
    MissingGrad(String),
    #[error("unknown parameter {0}")]
    UnknownParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Reshape(Var),
    Transpose(Var),
    Concat(Vec<Var>, usize),
    Slice(Var, usize, usize),
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    Softmax(Var),
    Normalize(Var, Vec<f64>),
    Tanh(Var),
    Sigmoid(Var),
    Abs(Var),
    Gelu(Var),
    Silu(Var),
    Log(Var),
    Clamp(Var, f64, f64),
    GatherRows(Var, Vec<usize>),
    Jacobian(Var, ndarray::Array2<f64>),
}

pub(crate) struct Node {
    pub(crate) value: Array,
    pub(crate) op: Op,
    pub(crate) requires_grad: bool,
}

/// Tape of evaluated operations.
#[derive(Default)]
pub struct Graph {
    pub(crate) nodes: Vec<Node>,
    pub(crate) params: Vec<(Var, String)>,
}

/// Leaf gradients produced by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Array>>,
}

impl Gradients {
    /// Gradient of a leaf; `None` when the leaf is unreachable from the loss
    /// or does not track gradients.
    pub fn get(&self, v: Var) -> Option<&Array> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of a leaf, zeros when unreachable.
    pub fn get_or_zeros(&self, g: &Graph, v: Var) -> Array {
        self.get(v).cloned().unwrap_or_else(|| Array::zeros(g.value(v).raw_dim()))
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        *self.nodes[v.0].value.iter().next().expect("non-empty")
    }

    pub(crate) fn push(&mut self, value: Array, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Leaf that tracks gradients.
    pub fn input(&mut self, value: Array) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf without gradient tracking.
    pub fn constant(&mut self, value: Array) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn constant_from(&mut self, shape: &[usize], data: Vec<f64>) -> Var {
        let a = Array::from_shape_vec(IxDyn(shape), data).expect("shape matches data length");
        self.constant(a)
    }

    /// Leaf holding the current value of a stored parameter.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var, AdError> {
        let value = store.value(name)?.clone();
        let v = self.input(value);
        self.params.push((v, name.to_string()));
        Ok(v)
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, AdError> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(AdError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Array>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array::ones(lv.raw_dim()));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if !node.requires_grad {
                continue;
            }
            self.backprop_node(i, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }
}

pub(crate) fn accumulate(grads: &mut [Option<Array>], v: Var, g: Array) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}
