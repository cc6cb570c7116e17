//! AdamW with decoupled weight decay, a reduce-on-plateau learning-rate
//! scheduler, and early stopping on the validation metric.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::model::ModelParams;

/// AdamW state; moments mirror the parameter layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamW<S> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub t: usize,
    m: ModelParams<S>,
    v: ModelParams<S>,
}

impl<S: Scalar> AdamW<S> {
    pub fn new(template: &ModelParams<S>, lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: template.zeros_like(),
            v: template.zeros_like(),
        }
    }

    /// One update step with the given gradients.  Weight decay is
    /// decoupled and only applied to weight matrices, not biases.
    pub fn step(&mut self, params: &mut ModelParams<S>, grads: &ModelParams<S>) {
        self.t += 1;
        let b1 = S::of_f64(self.beta1);
        let b2 = S::of_f64(self.beta2);
        let one = S::one();
        let eps = S::of_f64(self.eps);
        let lr = S::of_f64(self.lr);
        let bc1 = S::of_f64(1.0 - self.beta1.powi(self.t as i32));
        let bc2 = S::of_f64(1.0 - self.beta2.powi(self.t as i32));
        let wd = S::of_f64(self.weight_decay);

        // Walk moments in lockstep with params/grads: all four trees
        // share the exact tensor layout.
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        let ps = params.tensors_mut();
        let gs = grads.tensors();
        for ((((p, decay), (g, _)), (m, _)), (v, _)) in
            ps.into_iter().zip(gs).zip(ms).zip(vs)
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                let mut upd = mhat / (vhat.sqrt() + eps);
                if decay {
                    upd = upd + wd * p[i];
                }
                p[i] = p[i] - lr * upd;
            }
        }
    }
}

/// Reduce-on-plateau: when the tracked metric fails to improve for
/// `patience` evaluations, multiply the learning rate by `factor`.
/// The baseline can be reset (used when new loss terms activate).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    best: f64,
    stale: usize,
}

impl PlateauScheduler {
    pub fn new(factor: f64, patience: usize, min_lr: f64) -> Self {
        PlateauScheduler {
            factor,
            patience,
            min_lr,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    /// Feed one metric observation (lower is better); returns the new
    /// learning rate given the current one.
    pub fn observe(&mut self, metric: f64, current_lr: f64) -> f64 {
        if metric < self.best {
            self.best = metric;
            self.stale = 0;
            current_lr
        } else {
            self.stale += 1;
            if self.stale > self.patience {
                self.stale = 0;
                (current_lr * self.factor).max(self.min_lr)
            } else {
                current_lr
            }
        }
    }

    /// Forget the best-so-far; the next observation becomes the baseline.
    pub fn reset_baseline(&mut self) {
        self.best = f64::INFINITY;
        self.stale = 0;
    }
}

/// Stop when the metric has not improved for `patience` evaluations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub patience: usize,
    best: f64,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    /// Returns true when training should stop.
    pub fn observe(&mut self, metric: f64) -> bool {
        if metric < self.best {
            self.best = metric;
            self.stale = 0;
            false
        } else {
            self.stale += 1;
            self.stale >= self.patience
        }
    }

    pub fn reset_baseline(&mut self) {
        self.best = f64::INFINITY;
        self.stale = 0;
    }
}
