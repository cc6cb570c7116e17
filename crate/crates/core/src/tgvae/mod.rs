//! Topologically regularized autoencoder over one-hot rule sequences.
//!
//! A fully connected encoder maps a flattened C×L one-hot derivation to a
//! 32-dim diagonal Gaussian; the decoder maps latents back to per-position
//! rule logits, decoded under the grammar mask.  Training optimizes
//! reconstruction + warmed-up KL plus, once validation accuracy crosses
//! the activation threshold, three geometry terms: a convex-hull support
//! penalty against a frozen reservoir, a clamped persistent-homology
//! penalty, and a decoder curvature (smoothness) penalty.

pub mod adam;
pub mod losses;
pub mod model;
pub mod ph;
pub mod tensor;
pub mod train;

#[cfg(test)]
mod tests;

pub use adam::{AdamW, EarlyStopping, PlateauScheduler};
pub use losses::{
    beta_schedule, gamma_schedule, hull_loss, hull_loss_grad, loss_kl, loss_kl_grad, loss_recon,
    loss_recon_grad, sample_directions, smoothness_loss, LossError, Reservoir,
};
pub use model::{
    decode_logits, encode, flatten_onehot, reparameterize, Architecture, ModelParams,
};
pub use ph::{clamped_lifetime, ph_loss, ph_loss_grad, rips_pairs, PersistencePairs};
pub use train::{
    log_to_csv, seq_exact_accuracy, split_dataset, train, Checkpoint, LogRow, TrainConfig,
    TrainError, TrainResult,
};
