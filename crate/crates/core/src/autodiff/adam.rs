use serde::{Deserialize, Serialize};

use super::{AdError, Array, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moment buffers are keyed by parameter order.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Array>,
    v: Vec<Array>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// Applies one update using the gradients held in `store`, then clears them.
    /// Every parameter must have a gradient.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<(), AdError> {
        if self.m.len() != store.len() {
            self.m = store.iter().map(|(_, v)| Array::zeros(v.raw_dim())).collect();
            self.v = self.m.clone();
        }
        for (name, _, g) in store.entries_mut() {
            if g.is_none() {
                return Err(AdError::MissingGrad(name.clone()));
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (i, (_, value, grad)) in store.entries_mut().enumerate() {
            let g = grad.as_ref().expect("checked above");
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::Zip::from(value).and(m).and(v).and(g).for_each(|x, m, v, &g| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let mh = *m / bc1;
                let vh = *v / bc2;
                *x -= lr * mh / (vh.sqrt() + eps);
            });
        }
        store.zero_grad();
        Ok(())
    }
}
