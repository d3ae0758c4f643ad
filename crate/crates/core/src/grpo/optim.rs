use serde::{Deserialize, Serialize};

use crate::policy::PolicyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// First-order ascent rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: PolicyParams,
    pub v: PolicyParams,
    pub t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, like: &PolicyParams) -> Self {
        Self { kind, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: like.zeros_like(), v: like.zeros_like(), t: 0 }
    }

    /// Moves `params` uphill along `grad`.
    pub fn ascend(&mut self, params: &mut PolicyParams, grad: &PolicyParams, lr: f64) {
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => params.add_scaled(grad, lr),
            OptimizerKind::Adam => {
                let c1 = 1.0 - self.beta1.powi(self.t as i32);
                let c2 = 1.0 - self.beta2.powi(self.t as i32);
                let (m, v) = (self.m.as_mut_slice(), self.v.as_mut_slice());
                for (((p, &g), m), v) in params.as_mut_slice().iter_mut().zip(grad.as_slice()).zip(m).zip(v) {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    *p += lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
                }
            }
        }
    }
}

/// Rescales `grad` to at most `max_norm`; returns the norm before and after.
pub fn clip_grad_norm(grad: &mut PolicyParams, max_norm: f64) -> (f64, f64) {
    let norm = grad.norm();
    if norm > max_norm {
        grad.scale(max_norm / norm);
        (norm, grad.norm())
    } else {
        (norm, norm)
    }
}
