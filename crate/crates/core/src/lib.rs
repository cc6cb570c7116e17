//! # sigs-core
//!
//! Core library of a grammar-guided symbolic solver for differential
//! equations.  The pipeline, end to end:
//!
//! - [`grammar`] — a context-free grammar over mathematical expressions,
//!   with conversions between expression text, leftmost-derivation rule
//!   sequences, and one-hot matrices, plus grammar-masked decoding.
//! - [`atoms`] — generation, validation, and deduplication of the library
//!   of candidate expression atoms (eigenfunctions, time factors, shock
//!   profiles, Gaussian bumps, random grammar expansions).
//! - [`interp`] — the interpretation map from expression text to an
//!   evaluable, symbolically differentiable expression tree, plus constant
//!   extraction and rebinding for refinement.
//! - [`residual`] — PDE problem definitions and the discretized augmented
//!   residual used to score candidate solutions.
//! - [`tgvae`] — a topologically regularized autoencoder over one-hot rule
//!   sequences (reconstruction, KL with warmup, convex-hull, persistent
//!   homology, and decoder-smoothness losses).
//! - [`search`] — two-stage solution discovery: clustered latent search
//!   over component libraries followed by multi-start constant refinement.
//!
//! Numeric kernels (tensors, losses, clustering, homology, evaluation) are
//! generic over the scalar type via [`scalar::Scalar`]; the concrete alias
//! [`Real`] (`f64`) is what the solver pipeline runs on.

pub mod atoms;
pub mod grammar;
pub mod interp;
pub mod residual;
pub mod scalar;
pub mod search;
pub mod tgvae;

/// Scalar type the solver pipeline runs on.
pub type Real = f64;

/// Dimension of the latent space the autoencoder maps rule sequences into.
pub const LATENT_DIM: usize = 32;

/// Reference maximum derivation length (one-hot sequence length).
pub const MAX_RULE_LEN: usize = 72;

/// Text of the shipped reference grammar (52 productions; 53 one-hot
/// channels including the padding rule).
pub const REFERENCE_GRAMMAR: &str = include_str!("../data/grammar.txt");
