use ndarray::IxDyn;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{AdError, Array, Gradients, Graph};

/// Deterministic RNG used for parameter initialization.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Named trainable arrays with optional accumulated gradients.
///
/// Iteration order is insertion order, which also fixes the checkpoint layout.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array>,
    grads: Vec<Option<Array>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn index(&self, name: &str) -> Result<usize, AdError> {
        self.names.iter().position(|n| n == name).ok_or_else(|| AdError::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    /// Inserts or replaces a parameter.
    pub fn insert(&mut self, name: &str, value: Array) {
        match self.index(name) {
            Ok(i) => {
                self.values[i] = value;
                self.grads[i] = None;
            }
            Err(_) => {
                self.names.push(name.to_string());
                self.values.push(value);
                self.grads.push(None);
            }
        }
    }

    pub fn value(&self, name: &str) -> Result<&Array, AdError> {
        Ok(&self.values[self.index(name)?])
    }

    pub fn value_mut(&mut self, name: &str) -> Result<&mut Array, AdError> {
        let i = self.index(name)?;
        Ok(&mut self.values[i])
    }

    pub fn grad(&self, name: &str) -> Result<Option<&Array>, AdError> {
        Ok(self.grads[self.index(name)?].as_ref())
    }

    pub(crate) fn entries_mut(&mut self) -> impl Iterator<Item = (&String, &mut Array, &Option<Array>)> {
        self.names.iter().zip(self.values.iter_mut()).zip(self.grads.iter()).map(|((n, v), g)| (n, v, g))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    /// Adds the gradients of every parameter leaf of `graph` into the store.
    /// Parameters the loss does not reach get a zero gradient.
    pub fn accumulate(&mut self, graph: &Graph, grads: &Gradients) -> Result<(), AdError> {
        for (var, name) in &graph.params {
            let i = self.index(name)?;
            let g = grads.get_or_zeros(graph, *var);
            match &mut self.grads[i] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    /// Global L2 norm of the held gradients.
    pub fn grad_norm(&self) -> f64 {
        self.grads.iter().flatten().map(|g| g.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }

    /// Multiplies every held gradient by `factor`.
    pub fn scale_grads(&mut self, factor: f64) {
        self.grads.iter_mut().flatten().for_each(|g| g.mapv_inplace(|v| v * factor));
    }

    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Linear weight `[fan_in, fan_out]` drawn from U(±1/√fan_in).
    pub fn init_linear(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
        self.insert(name, Array::from_shape_vec(IxDyn(&[fan_in, fan_out]), data).expect("sized"));
    }

    /// Embedding table `[rows, dim]` drawn from N(0, std²).
    pub fn init_normal(&mut self, name: &str, shape: &[usize], std: f64, rng: &mut Rng) {
        let dist = Normal::new(0.0, std).expect("finite std");
        let n = shape.iter().product();
        let data = (0..n).map(|_| dist.sample(rng)).collect();
        self.insert(name, Array::from_shape_vec(IxDyn(shape), data).expect("sized"));
    }

    pub fn init_const(&mut self, name: &str, shape: &[usize], value: f64) {
        self.insert(name, Array::from_elem(IxDyn(shape), value));
    }
}
