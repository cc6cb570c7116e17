//! The desk-scale autoencoder: fully connected encoder to a diagonal
//! Gaussian over R^32, fully connected decoder back to per-position rule
//! logits.  Forward passes cache activations; backward passes are
//! hand-rolled.
//!
//! The μ and logσ² heads are bias-free.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::grammar::OneHotMatrix;
use crate::scalar::Scalar;

use super::tensor::{tanh_vec, Mat};

/// Architecture sizes; `input = c * l` flattened one-hot channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// One-hot channels (rule count C).
    pub c: usize,
    /// Sequence length L.
    pub l: usize,
    pub hidden: usize,
    pub latent: usize,
}

impl Architecture {
    pub fn input(&self) -> usize {
        self.c * self.l
    }
}

/// All trainable tensors.  Also reused as the gradient accumulator, which
/// keeps the optimizer a flat walk over matching tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<S> {
    pub arch: Architecture,
    pub enc_w1: Mat<S>,
    pub enc_b1: Vec<S>,
    /// Bias-free μ head.
    pub enc_mu: Mat<S>,
    /// Bias-free logσ² head.
    pub enc_lv: Mat<S>,
    pub dec_w1: Mat<S>,
    pub dec_b1: Vec<S>,
    pub dec_w2: Mat<S>,
    pub dec_b2: Vec<S>,
}

impl<S: Scalar> ModelParams<S> {
    pub fn init<R: Rng>(arch: Architecture, rng: &mut R) -> Self {
        ModelParams {
            arch,
            enc_w1: Mat::glorot(arch.hidden, arch.input(), rng),
            enc_b1: vec![S::zero(); arch.hidden],
            enc_mu: Mat::glorot(arch.latent, arch.hidden, rng),
            enc_lv: Mat::glorot(arch.latent, arch.hidden, rng),
            dec_w1: Mat::glorot(arch.hidden, arch.latent, rng),
            dec_b1: vec![S::zero(); arch.hidden],
            dec_w2: Mat::glorot(arch.input(), arch.hidden, rng),
            dec_b2: vec![S::zero(); arch.input()],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let arch = self.arch;
        ModelParams {
            arch,
            enc_w1: Mat::zeros(arch.hidden, arch.input()),
            enc_b1: vec![S::zero(); arch.hidden],
            enc_mu: Mat::zeros(arch.latent, arch.hidden),
            enc_lv: Mat::zeros(arch.latent, arch.hidden),
            dec_w1: Mat::zeros(arch.hidden, arch.latent),
            dec_b1: vec![S::zero(); arch.hidden],
            dec_w2: Mat::zeros(arch.input(), arch.hidden),
            dec_b2: vec![S::zero(); arch.input()],
        }
    }

    /// Flat walk over all tensors, paired between `self` and `other`
    /// (used by the optimizer: params vs gradients).
    pub fn for_each_tensor_mut(
        &mut self,
        other: &Self,
        f: &mut impl FnMut(&mut [S], &[S], bool),
    ) {
        // The boolean marks weight matrices (decayed) vs biases (not).
        f(&mut self.enc_w1.data, &other.enc_w1.data, true);
        f(&mut self.enc_b1, &other.enc_b1, false);
        f(&mut self.enc_mu.data, &other.enc_mu.data, true);
        f(&mut self.enc_lv.data, &other.enc_lv.data, true);
        f(&mut self.dec_w1.data, &other.dec_w1.data, true);
        f(&mut self.dec_b1, &other.dec_b1, false);
        f(&mut self.dec_w2.data, &other.dec_w2.data, true);
        f(&mut self.dec_b2, &other.dec_b2, false);
    }

    /// All tensors in a fixed order, with the weight-decay flag (weight
    /// matrices decayed, biases not).
    pub fn tensors(&self) -> [(&[S], bool); 8] {
        [
            (&self.enc_w1.data, true),
            (&self.enc_b1, false),
            (&self.enc_mu.data, true),
            (&self.enc_lv.data, true),
            (&self.dec_w1.data, true),
            (&self.dec_b1, false),
            (&self.dec_w2.data, true),
            (&self.dec_b2, false),
        ]
    }

    /// Mutable view of the same tensors in the same order.
    pub fn tensors_mut(&mut self) -> [(&mut Vec<S>, bool); 8] {
        [
            (&mut self.enc_w1.data, true),
            (&mut self.enc_b1, false),
            (&mut self.enc_mu.data, true),
            (&mut self.enc_lv.data, true),
            (&mut self.dec_w1.data, true),
            (&mut self.dec_b1, false),
            (&mut self.dec_w2.data, true),
            (&mut self.dec_b2, false),
        ]
    }

    pub fn n_params(&self) -> usize {
        self.enc_w1.data.len()
            + self.enc_b1.len()
            + self.enc_mu.data.len()
            + self.enc_lv.data.len()
            + self.dec_w1.data.len()
            + self.dec_b1.len()
            + self.dec_w2.data.len()
            + self.dec_b2.len()
    }
}

/// Cached encoder activations for one input.
#[derive(Debug, Clone)]
pub struct EncCache<S> {
    pub x: Vec<S>,
    pub h: Vec<S>,
    pub mu: Vec<S>,
    pub lv: Vec<S>,
}

/// Cached decoder activations for one latent.
#[derive(Debug, Clone)]
pub struct DecCache<S> {
    pub z: Vec<S>,
    pub h: Vec<S>,
    pub logits: Vec<S>,
}

pub fn flatten_onehot<S: Scalar>(x: &OneHotMatrix) -> Vec<S> {
    x.data.iter().map(|&v| S::of_f64(v)).collect()
}

/// Encoder forward: `(μ, logσ²)` plus cached activations.
pub fn encode_cached<S: Scalar>(params: &ModelParams<S>, x: Vec<S>) -> EncCache<S> {
    debug_assert_eq!(x.len(), params.arch.input());
    let h = tanh_vec(&params.enc_w1.matvec(&x, Some(&params.enc_b1)));
    let mu = params.enc_mu.matvec(&h, None);
    let lv = params.enc_lv.matvec(&h, None);
    EncCache { x, h, mu, lv }
}

/// Encoder forward without caching.
pub fn encode<S: Scalar>(params: &ModelParams<S>, x: &OneHotMatrix) -> (Vec<S>, Vec<S>) {
    let cache = encode_cached(params, flatten_onehot(x));
    (cache.mu, cache.lv)
}

/// `z = μ + exp(logσ²/2) ⊙ ε`, `ε ~ N(0, I)`.
pub fn reparameterize<S: Scalar, R: Rng>(mu: &[S], lv: &[S], rng: &mut R) -> (Vec<S>, Vec<S>) {
    let half = S::of_f64(0.5);
    let mut z = Vec::with_capacity(mu.len());
    let mut eps = Vec::with_capacity(mu.len());
    for i in 0..mu.len() {
        let e: f64 = StandardNormal.sample(rng);
        let e = S::of_f64(e);
        eps.push(e);
        z.push(mu[i] + (lv[i] * half).exp() * e);
    }
    (z, eps)
}

/// Decoder forward: per-position logits (row-major C×L) plus cache.
pub fn decode_cached<S: Scalar>(params: &ModelParams<S>, z: Vec<S>) -> DecCache<S> {
    debug_assert_eq!(z.len(), params.arch.latent);
    let h = tanh_vec(&params.dec_w1.matvec(&z, Some(&params.dec_b1)));
    let logits = params.dec_w2.matvec(&h, Some(&params.dec_b2));
    DecCache { z, h, logits }
}

/// Decoder forward without caching, for inference.
pub fn decode_logits<S: Scalar>(params: &ModelParams<S>, z: &[S]) -> Vec<S> {
    decode_cached(params, z.to_vec()).logits
}

/// Backprop `dL/dlogits` through the decoder; accumulates parameter
/// gradients into `grads` and returns `dL/dz`.
pub fn decoder_backward<S: Scalar>(
    params: &ModelParams<S>,
    grads: &mut ModelParams<S>,
    cache: &DecCache<S>,
    dlogits: &[S],
) -> Vec<S> {
    let one = S::one();
    grads.dec_w2.add_outer(dlogits, &cache.h, one);
    for (g, d) in grads.dec_b2.iter_mut().zip(dlogits) {
        *g = *g + *d;
    }
    let mut dh = params.dec_w2.matvec_t(dlogits);
    for (d, h) in dh.iter_mut().zip(&cache.h) {
        *d = *d * (one - *h * *h); // through tanh
    }
    grads.dec_w1.add_outer(&dh, &cache.z, one);
    for (g, d) in grads.dec_b1.iter_mut().zip(&dh) {
        *g = *g + *d;
    }
    params.dec_w1.matvec_t(&dh)
}

/// Backprop `(dL/dμ, dL/dlogσ²)` through the encoder, accumulating
/// parameter gradients.
pub fn encoder_backward<S: Scalar>(
    params: &ModelParams<S>,
    grads: &mut ModelParams<S>,
    cache: &EncCache<S>,
    dmu: &[S],
    dlv: &[S],
) {
    let one = S::one();
    grads.enc_mu.add_outer(dmu, &cache.h, one);
    grads.enc_lv.add_outer(dlv, &cache.h, one);
    let mut dh = params.enc_mu.matvec_t(dmu);
    let dh2 = params.enc_lv.matvec_t(dlv);
    for (a, b) in dh.iter_mut().zip(&dh2) {
        *a = *a + *b;
    }
    for (d, h) in dh.iter_mut().zip(&cache.h) {
        *d = *d * (one - *h * *h);
    }
    grads.enc_w1.add_outer(&dh, &cache.x, one);
    for (g, d) in grads.enc_b1.iter_mut().zip(&dh) {
        *g = *g + *d;
    }
}
