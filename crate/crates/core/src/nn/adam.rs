//! Adam with bias correction, over a whole parameter store.

use super::tape::{ParamId, ParamStore};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment state per parameter.
#[derive(Clone, Debug)]
pub struct Adam {
    pub cfg: AdamConfig,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    t: u32,
    /// Parameters excluded from updates (frozen).
    frozen: Vec<bool>,
}

impl Adam {
    pub fn new(store: &ParamStore, cfg: AdamConfig) -> Self {
        let m = (0..store.len())
            .map(|i| vec![0.0; store.get(i).len()])
            .collect();
        let v = (0..store.len())
            .map(|i| vec![0.0; store.get(i).len()])
            .collect();
        Adam {
            cfg,
            m,
            v,
            t: 0,
            frozen: vec![false; store.len()],
        }
    }

    pub fn freeze(&mut self, id: ParamId) {
        self.frozen[id] = true;
    }

    pub fn step_count(&self) -> u32 {
        self.t
    }

    /// One bias-corrected update from the store's accumulated gradients.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.t += 1;
        let b1t = 1.0 - self.cfg.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.cfg.beta2.powi(self.t as i32);
        for id in 0..store.len() {
            if self.frozen[id] {
                continue;
            }
            let t = store.get_mut(id);
            let grad = t.grad.as_ref().expect("params carry grads").clone();
            let m = &mut self.m[id];
            let v = &mut self.v[id];
            for i in 0..grad.len() {
                let g = grad[i];
                m[i] = self.cfg.beta1 * m[i] + (1.0 - self.cfg.beta1) * g;
                v[i] = self.cfg.beta2 * v[i] + (1.0 - self.cfg.beta2) * g * g;
                let m_hat = m[i] / b1t;
                let v_hat = v[i] / b2t;
                t.data[i] -= self.cfg.lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
            }
        }
    }
}
