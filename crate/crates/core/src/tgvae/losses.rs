//! The composite training objective, term by term.
//!
//! `L = L_recon + β(t)·KL + γ(e)·(w_hull·L_hull + w_ph·L_ph + w_smooth·L_smooth)`
//!
//! Every term exposes its analytic gradient alongside the value; the
//! training loop composes them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::RuleSequence;
use crate::scalar::Scalar;

use super::model::ModelParams;
use super::tensor::{axpy, dot, Mat};

#[derive(Debug, Error)]
pub enum LossError {
    #[error("hull loss needs a nonempty reservoir")]
    EmptyReservoir,
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

/// Per-position softmax cross-entropy, mean over the L positions.
/// `logits` is row-major C×L; returns the loss and `dL/dlogits`.
pub fn loss_recon_grad<S: Scalar>(
    logits: &[S],
    target: &RuleSequence,
    c: usize,
    l: usize,
) -> (S, Vec<S>) {
    debug_assert_eq!(logits.len(), c * l);
    debug_assert_eq!(target.indices.len(), l);
    let inv_l = S::of_f64(1.0 / l as f64);
    let mut loss = S::zero();
    let mut grad = vec![S::zero(); c * l];
    for pos in 0..l {
        // Stable softmax over the column.
        let mut maxv = S::neg_infinity();
        for r in 0..c {
            maxv = maxv.max(logits[r * l + pos]);
        }
        let mut denom = S::zero();
        for r in 0..c {
            denom = denom + (logits[r * l + pos] - maxv).exp();
        }
        let log_denom = denom.ln();
        let tgt = target.indices[pos];
        loss = loss - (logits[tgt * l + pos] - maxv - log_denom) * inv_l;
        for r in 0..c {
            let p = (logits[r * l + pos] - maxv).exp() / denom;
            let y = if r == tgt { S::one() } else { S::zero() };
            grad[r * l + pos] = (p - y) * inv_l;
        }
    }
    (loss, grad)
}

pub fn loss_recon<S: Scalar>(logits: &[S], target: &RuleSequence, c: usize, l: usize) -> S {
    loss_recon_grad(logits, target, c, l).0
}

// ---------------------------------------------------------------------------
// KL
// ---------------------------------------------------------------------------

/// Closed-form KL of `N(μ, diag σ²)` against `N(0, I)`:
/// `−½ Σ_d (1 + logσ²_d − μ_d² − exp(logσ²_d))`.
pub fn loss_kl<S: Scalar>(mu: &[S], lv: &[S]) -> S {
    let half = S::of_f64(0.5);
    let one = S::one();
    let mut acc = S::zero();
    for i in 0..mu.len() {
        acc = acc + one + lv[i] - mu[i] * mu[i] - lv[i].exp();
    }
    -half * acc
}

/// `(dKL/dμ, dKL/dlogσ²) = (μ, ½(exp(logσ²) − 1))`.
pub fn loss_kl_grad<S: Scalar>(mu: &[S], lv: &[S]) -> (Vec<S>, Vec<S>) {
    let half = S::of_f64(0.5);
    let one = S::one();
    let dmu = mu.to_vec();
    let dlv = lv.iter().map(|&v| half * (v.exp() - one)).collect();
    (dmu, dlv)
}

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

/// KL warmup: `β(t) = β₀ + (1 − β₀)·min(t/7000, 1)`.
pub fn beta_schedule(t: usize, beta0: f64, warmup_steps: usize) -> f64 {
    beta0 + (1.0 - beta0) * ((t as f64 / warmup_steps as f64).min(1.0))
}

/// Topology ramp: 0 before activation, linear to 1 over `ramp_epochs`
/// (fractional epochs allowed, so the ramp is smooth across steps).
pub fn gamma_schedule(epoch: f64, activation_epoch: Option<f64>, ramp_epochs: f64) -> f64 {
    match activation_epoch {
        None => 0.0,
        Some(a) => ((epoch - a) / ramp_epochs).clamp(0.0, 1.0),
    }
}

// ---------------------------------------------------------------------------
// Hull loss
// ---------------------------------------------------------------------------

/// Farthest-point reservoir: a point is inserted only if it is at least
/// `δ` away from everything already kept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reservoir<S> {
    pub points: Vec<Vec<S>>,
    pub delta: f64,
}

impl<S: Scalar> Reservoir<S> {
    pub fn new(delta: f64) -> Self {
        Reservoir {
            points: Vec::new(),
            delta,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Insert batch points (in batch order) that keep the pairwise-δ
    /// invariant; returns how many were inserted.
    pub fn update(&mut self, batch: &[Vec<S>]) -> usize {
        let d2 = S::of_f64(self.delta * self.delta);
        let mut inserted = 0;
        for cand in batch {
            let far = self.points.iter().all(|p| dist2(p, cand) >= d2);
            if far {
                self.points.push(cand.clone());
                inserted += 1;
            }
        }
        inserted
    }

    /// Support function `h_R(n) = max over reservoir of ⟨n, p⟩`.
    pub fn support(&self, direction: &[S]) -> S {
        self.points
            .iter()
            .map(|p| dot(p, direction))
            .fold(S::neg_infinity(), S::max)
    }
}

fn dist2<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc = acc + d * d;
    }
    acc
}

/// Hull loss against a frozen reservoir:
/// `(1/BK) Σ_i Σ_k relu(⟨n_k, z_i⟩ − h_R(n_k))²`, plus `dL/dz_i`.
pub fn hull_loss_grad<S: Scalar>(
    reservoir: &Reservoir<S>,
    batch: &[Vec<S>],
    directions: &[Vec<S>],
) -> Result<(S, Vec<Vec<S>>), LossError> {
    if reservoir.is_empty() {
        return Err(LossError::EmptyReservoir);
    }
    let supports: Vec<S> = directions.iter().map(|n| reservoir.support(n)).collect();
    let bk = S::of_f64(1.0 / (batch.len() * directions.len()) as f64);
    let two = S::of_f64(2.0);
    let mut loss = S::zero();
    let mut grads = vec![vec![S::zero(); batch.first().map_or(0, Vec::len)]; batch.len()];
    for (i, z) in batch.iter().enumerate() {
        for (k, n) in directions.iter().enumerate() {
            let excess = dot(n, z) - supports[k];
            if excess > S::zero() {
                loss = loss + excess * excess * bk;
                axpy(&mut grads[i], n, two * excess * bk);
            }
        }
    }
    Ok((loss, grads))
}

pub fn hull_loss<S: Scalar>(
    reservoir: &Reservoir<S>,
    batch: &[Vec<S>],
    directions: &[Vec<S>],
) -> Result<S, LossError> {
    hull_loss_grad(reservoir, batch, directions).map(|(l, _)| l)
}

/// K fixed unit directions, drawn once at training start.
pub fn sample_directions<S: Scalar, R: rand::Rng>(
    k: usize,
    dim: usize,
    rng: &mut R,
) -> Vec<Vec<S>> {
    use rand_distr::{Distribution, StandardNormal};
    (0..k)
        .map(|_| {
            loop {
                let v: Vec<S> = (0..dim)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(rng);
                        S::of_f64(e)
                    })
                    .collect();
                let n = super::tensor::norm2(&v);
                if n > S::of_f64(1e-8) {
                    return v.iter().map(|&x| x / n).collect();
                }
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Smoothness loss
// ---------------------------------------------------------------------------

/// Analytic gradient of `f(z) = 1ᵀ decode_logits(z)` for the two-layer
/// tanh decoder: `∇f(z) = W1ᵀ (w̃ ⊙ tanh'(a))` with `a = W1 z + b1`,
/// `w̃ = W2ᵀ 1`.
fn sum_logit_grad<S: Scalar>(params: &ModelParams<S>, wt: &[S], z: &[S]) -> Vec<S> {
    let one = S::one();
    let a = params.dec_w1.matvec(z, Some(&params.dec_b1));
    let u: Vec<S> = a
        .iter()
        .zip(wt)
        .map(|(&ai, &wi)| {
            let t = ai.tanh();
            wi * (one - t * t)
        })
        .collect();
    params.dec_w1.matvec_t(&u)
}

fn column_sums<S: Scalar>(m: &Mat<S>) -> Vec<S> {
    let mut out = vec![S::zero(); m.cols];
    for r in 0..m.rows {
        for c in 0..m.cols {
            out[c] = out[c] + m.at(r, c);
        }
    }
    out
}

/// Hutchinson-style curvature penalty `E‖H_f(z)v‖²`, with the
/// Hessian-vector product realized as a central finite difference of the
/// analytic gradient: `Hv ≈ (∇f(z+hv) − ∇f(z−hv)) / 2h`.
///
/// `f` is the mean decoder logit (the all-ones readout normalized by the
/// output size, keeping the penalty's scale independent of C·L).
///
/// Returns the value; `grads`, when given, accumulates the exact
/// parameter gradient of this finite-difference objective.
pub fn smoothness_loss<S: Scalar>(
    params: &ModelParams<S>,
    zs: &[Vec<S>],
    probes: &[Vec<S>],
    h: f64,
    mut grads: Option<&mut ModelParams<S>>,
) -> S {
    if zs.is_empty() || probes.is_empty() {
        return S::zero();
    }
    let hh = S::of_f64(h);
    let inv2h = S::of_f64(1.0 / (2.0 * h));
    let count = S::of_f64(1.0 / (zs.len() * probes.len()) as f64);
    let inv_out = S::of_f64(1.0 / params.arch.input() as f64);
    let wt: Vec<S> = column_sums(&params.dec_w2)
        .into_iter()
        .map(|w| w * inv_out)
        .collect();
    let mut total = S::zero();
    for z in zs {
        for v in probes {
            let zp: Vec<S> = z.iter().zip(v).map(|(&a, &b)| a + hh * b).collect();
            let zm: Vec<S> = z.iter().zip(v).map(|(&a, &b)| a - hh * b).collect();
            let gp = sum_logit_grad(params, &wt, &zp);
            let gm = sum_logit_grad(params, &wt, &zm);
            let hv: Vec<S> = gp
                .iter()
                .zip(&gm)
                .map(|(&a, &b)| (a - b) * inv2h)
                .collect();
            total = total + dot(&hv, &hv) * count;
            if let Some(g) = grads.as_deref_mut() {
                // dL/d(hv) = 2·hv·count; propagate through both gradient
                // evaluations with opposite signs.
                let lambda: Vec<S> = hv
                    .iter()
                    .map(|&x| S::of_f64(2.0) * x * count * inv2h)
                    .collect();
                accumulate_grad_of_gradient(params, g, &wt, &zp, &lambda, S::one());
                accumulate_grad_of_gradient(params, g, &wt, &zm, &lambda, -S::one());
            }
        }
    }
    total
}

/// Backprop `λᵀ ∇f(z₀)` into the decoder parameters with sign `sign`,
/// where `∇f(z₀) = W1ᵀ (w̃ ⊙ s'(a))`, `a = W1 z₀ + b1`.
fn accumulate_grad_of_gradient<S: Scalar>(
    params: &ModelParams<S>,
    grads: &mut ModelParams<S>,
    wt: &[S],
    z0: &[S],
    lambda: &[S],
    sign: S,
) {
    let one = S::one();
    let two = S::of_f64(2.0);
    let a = params.dec_w1.matvec(z0, Some(&params.dec_b1));
    let t: Vec<S> = a.iter().map(|&v| v.tanh()).collect();
    let sp: Vec<S> = t.iter().map(|&v| one - v * v).collect(); // tanh'
    let spp: Vec<S> = t.iter().zip(&sp).map(|(&ti, &si)| -two * ti * si).collect(); // tanh''
    let u: Vec<S> = sp.iter().zip(wt).map(|(&si, &wi)| si * wi).collect();

    // g = W1ᵀ u: direct W1 term — d(λᵀ W1ᵀ u)/dW1 = u λᵀ.
    grads.dec_w1.add_outer(&u, lambda, sign);

    // Through u: du = W1 λ.
    let du = params.dec_w1.matvec(lambda, None);
    // u = w̃ ⊙ s'(a):
    //   dw̃ = s'(a) ⊙ du  → spread into every row of W2.
    //   da  = w̃ ⊙ s''(a) ⊙ du.
    let dwt: Vec<S> = sp.iter().zip(&du).map(|(&si, &d)| si * d).collect();
    // w̃ is the mean over W2 rows, so each row receives 1/(C·L) of dw̃.
    let inv_out = S::of_f64(1.0 / params.arch.input() as f64);
    for r in 0..grads.dec_w2.rows {
        for c in 0..grads.dec_w2.cols {
            *grads.dec_w2.at_mut(r, c) = grads.dec_w2.at(r, c) + sign * inv_out * dwt[c];
        }
    }
    let da: Vec<S> = wt
        .iter()
        .zip(&spp)
        .zip(&du)
        .map(|((&wi, &pi), &d)| wi * pi * d)
        .collect();
    grads.dec_w1.add_outer(&da, z0, sign);
    for (g, d) in grads.dec_b1.iter_mut().zip(&da) {
        *g = *g + sign * *d;
    }
}
