//! First-order optimizers over a [`ParamStore`].

use std::collections::HashMap;

use crate::error::{Result, TensorError};
use crate::params::{ParamId, ParamStore};

/// Update rule plus its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
    SgdMomentum { momentum: f64 },
    RmsProp { decay: f64, epsilon: f64 },
}

/// Optimizer state: auxiliary buffers are keyed by parameter id and created
/// lazily with the parameter's shape.
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    step_count: u64,
    buf_a: HashMap<ParamId, Vec<f64>>, // adam m / momentum velocity / rmsprop sq-avg
    buf_b: HashMap<ParamId, Vec<f64>>, // adam v
    // Adam bias correction counts steps per parameter, so a parameter that
    // first receives gradient late still starts at t=1.
    param_steps: HashMap<ParamId, u64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Optimizer {
            kind,
            lr,
            step_count: 0,
            buf_a: HashMap::new(),
            buf_b: HashMap::new(),
            param_steps: HashMap::new(),
        }
    }

    /// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
    pub fn adam(lr: f64) -> Self {
        Optimizer::new(
            OptimizerKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
                epsilon: 1e-8,
            },
            lr,
        )
    }

    pub fn sgd(lr: f64) -> Self {
        Optimizer::new(OptimizerKind::Sgd, lr)
    }

    pub fn sgd_momentum(lr: f64, momentum: f64) -> Self {
        Optimizer::new(OptimizerKind::SgdMomentum { momentum }, lr)
    }

    /// RMSProp with decay 0.99 and eps 1e-8.
    pub fn rmsprop(lr: f64) -> Self {
        Optimizer::new(
            OptimizerKind::RmsProp {
                decay: 0.99,
                epsilon: 1e-8,
            },
            lr,
        )
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Apply one update to `params` in place, then zero their gradients.
    /// Every listed parameter must carry a gradient populated by `backward`.
    pub fn step(&mut self, store: &mut ParamStore, params: &[ParamId]) -> Result<()> {
        if self.lr <= 0.0 {
            return Err(TensorError::Contract(format!("learning rate must be positive, got {}", self.lr)));
        }
        for &id in params {
            if !store.grad_populated(id) {
                return Err(TensorError::Contract(format!(
                    "parameter '{}' has no populated gradient",
                    store.name(id)
                )));
            }
        }
        self.step_count += 1;
        for &id in params {
            let n = store.grad(id).len();
            match self.kind {
                OptimizerKind::Sgd => {
                    let g = store.grad(id).to_vec();
                    let data = store.data_mut(id);
                    for i in 0..n {
                        data[i] -= self.lr * g[i];
                    }
                }
                OptimizerKind::SgdMomentum { momentum } => {
                    let g = store.grad(id).to_vec();
                    let v = self.buf_a.entry(id).or_insert_with(|| vec![0.0; n]);
                    let data = store.data_mut(id);
                    for i in 0..n {
                        v[i] = momentum * v[i] + g[i];
                        data[i] -= self.lr * v[i];
                    }
                }
                OptimizerKind::RmsProp { decay, epsilon } => {
                    let g = store.grad(id).to_vec();
                    let s = self.buf_a.entry(id).or_insert_with(|| vec![0.0; n]);
                    let data = store.data_mut(id);
                    for i in 0..n {
                        s[i] = decay * s[i] + (1.0 - decay) * g[i] * g[i];
                        data[i] -= self.lr * g[i] / (s[i].sqrt() + epsilon);
                    }
                }
                OptimizerKind::Adam { beta1, beta2, epsilon } => {
                    let g = store.grad(id).to_vec();
                    let t = *self.param_steps.entry(id).and_modify(|t| *t += 1).or_insert(1);
                    let m = self.buf_a.entry(id).or_insert_with(|| vec![0.0; n]);
                    let v = self.buf_b.entry(id).or_insert_with(|| vec![0.0; n]);
                    let bc1 = 1.0 - beta1.powi(t as i32);
                    let bc2 = 1.0 - beta2.powi(t as i32);
                    let data = store.data_mut(id);
                    for i in 0..n {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        data[i] -= self.lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        // Contract: gradients are consumed by the step.
        store.zero_grads();
        Ok(())
    }
}
