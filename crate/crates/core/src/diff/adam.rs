use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Matrix, ParamId, ParamStore};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam over a fixed subset of a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    ids: Vec<ParamId>,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    step: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, ids: Vec<ParamId>, config: AdamConfig) -> Self {
        let zeros = |id: &ParamId| {
            let (r, c) = store.get(*id).shape();
            Matrix::zeros(r, c)
        };
        let first = ids.iter().map(zeros).collect();
        let second = ids.iter().map(zeros).collect();
        Self { config, ids, first, second, step: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn moments(&self, slot: usize) -> (&Matrix, &Matrix) {
        (&self.first[slot], &self.second[slot])
    }

    /// One bias-corrected update. `grads` is indexed by parameter; a missing
    /// entry counts as a zero gradient. Parameters whose gradient holds a
    /// non-finite value are left untouched (moments included) and reported.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Option<Matrix>], lr: f64) -> Vec<ParamId> {
        debug_assert!(lr >= 0.0);
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - math::powi(beta1, t);
        let bc2 = 1.0 - math::powi(beta2, t);
        let mut skipped = Vec::new();
        for (slot, &id) in self.ids.iter().enumerate() {
            let grad = grads.get(id.0).and_then(Option::as_ref);
            if let Some(g) = grad {
                if !g.is_finite() {
                    log::warn!("non-finite gradient for parameter '{}', update skipped", store.name(id));
                    skipped.push(id);
                    continue;
                }
            }
            let m = self.first[slot].as_mut_slice();
            let v = self.second[slot].as_mut_slice();
            let p = store.get_mut(id).as_mut_slice();
            for i in 0..p.len() {
                let gi = grad.map_or(0.0, |g| g.as_slice()[i]);
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * mhat / (math::sqrt(vhat) + eps);
            }
        }
        skipped
    }
}
