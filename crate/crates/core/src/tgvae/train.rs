//! The training loop: 70/20/10 split, per-step composite objective with
//! KL warmup and topology activation/ramp schedules, plateau LR decay,
//! early stopping, checkpointing and a per-step CSV log.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Grammar, RuleSequence};

use super::adam::{AdamW, EarlyStopping, PlateauScheduler};
use super::losses::{
    beta_schedule, gamma_schedule, hull_loss_grad, loss_kl, loss_kl_grad, loss_recon_grad,
    sample_directions, smoothness_loss, Reservoir,
};
use super::model::{
    decode_cached, decoder_backward, encode_cached, encoder_backward, flatten_onehot,
    reparameterize, Architecture, ModelParams,
};
use super::ph::ph_loss_grad;
use super::tensor::axpy;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("nonfinite loss at step {step}: ce={ce} kl={kl} hull={hull} ph={ph} smooth={smooth}")]
    NonFiniteLoss {
        step: usize,
        ce: f64,
        kl: f64,
        hull: f64,
        ph: f64,
        smooth: f64,
    },
    #[error("dataset too small to split: {0} items")]
    DatasetTooSmall(usize),
    #[error("checkpoint grammar hash {found} does not match the loaded grammar {expected}")]
    GrammarMismatch { expected: String, found: String },
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(#[from] serde_json::Error),
}

/// Training hyperparameters; the defaults are the desk-scale settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub latent: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch: usize,
    pub epochs: usize,
    pub early_stop_patience: usize,
    pub beta0: f64,
    pub warmup_steps: usize,
    /// Validation sequence-exact accuracy threshold that switches the
    /// topology terms on.
    pub activation_val_acc: f64,
    pub gamma_ramp_epochs: f64,
    /// Evaluate topology terms every this many training steps.
    pub topo_train_cadence: usize,
    /// Evaluate topology terms every this many validation batches.
    pub topo_val_cadence: usize,
    pub w_hull: f64,
    pub w_ph: f64,
    pub w_smooth: f64,
    /// Number of fixed unit hull directions.
    pub hull_directions: usize,
    pub ph_max_points: usize,
    /// Clamp radii at which the persistence loss is evaluated and summed.
    pub ph_radii: Vec<f64>,
    /// H0 weight inside the persistence loss.
    pub ph_a0: f64,
    /// Reservoir farthest-point insertion radius.
    pub reservoir_delta: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub min_lr: f64,
    /// Hutchinson probes per smoothness evaluation.
    pub smooth_probes: usize,
    /// Finite-difference step for the Hessian-vector product.
    pub smooth_h: f64,
    pub split_seed: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 256,
            latent: crate::LATENT_DIM,
            lr: 3e-4,
            weight_decay: 1e-5,
            batch: 64,
            epochs: 200,
            early_stop_patience: 10,
            beta0: 0.01,
            warmup_steps: 7000,
            activation_val_acc: 0.20,
            gamma_ramp_epochs: 5.0,
            topo_train_cadence: 50,
            topo_val_cadence: 12,
            w_hull: 0.8,
            w_ph: 0.8,
            w_smooth: 1e-4,
            hull_directions: 256,
            ph_max_points: 24,
            ph_radii: vec![0.10, 0.50],
            ph_a0: 1.0,
            reservoir_delta: 0.5,
            plateau_factor: 0.2,
            plateau_patience: 5,
            min_lr: 1e-5,
            smooth_probes: 4,
            smooth_h: 1e-3,
            split_seed: 42,
            seed: 0,
        }
    }
}

/// One CSV log row, written per optimizer step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub ce: f64,
    pub kl: f64,
    pub beta: f64,
    pub gamma: f64,
    pub hull: f64,
    pub ph: f64,
    pub smooth: f64,
    pub val_acc: f64,
}

pub fn log_to_csv(rows: &[LogRow]) -> String {
    let mut out = String::from("step,ce,kl,beta,gamma,hull,ph,smooth,val_acc\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.step, r.ce, r.kl, r.beta, r.gamma, r.hull, r.ph, r.smooth, r.val_acc
        ));
    }
    out
}

/// Shuffled 70/20/10 index split.
pub fn split_dataset(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_train = (n as f64 * 0.7).round() as usize;
    let n_val = (n as f64 * 0.2).round() as usize;
    let train = idx[..n_train].to_vec();
    let val = idx[n_train..(n_train + n_val).min(n)].to_vec();
    let test = idx[(n_train + n_val).min(n)..].to_vec();
    (train, val, test)
}

/// Training output: final parameters, per-step log, split indices.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: ModelParams<f64>,
    pub log: Vec<LogRow>,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub final_val_acc: f64,
    pub activation_epoch: Option<f64>,
    pub epochs_run: usize,
}

/// Validation sequence-exact accuracy: masked argmax decode of the
/// encoder-mean logits must reproduce the target sequence exactly.
pub fn seq_exact_accuracy(
    grammar: &Grammar,
    params: &ModelParams<f64>,
    dataset: &[RuleSequence],
    idx: &[usize],
) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    for &i in idx {
        let x = grammar.encode_onehot(&dataset[i]);
        let cache = encode_cached(params, flatten_onehot::<f64>(&x));
        let logits = super::model::decode_logits(params, &cache.mu);
        if let Ok(decoded) = grammar.masked_argmax_decode(&logits) {
            if decoded == dataset[i] {
                hits += 1;
            }
        }
    }
    hits as f64 / idx.len() as f64
}

/// Mean validation ELBO (CE + β·KL) at the given β; topology terms are
/// folded in at the configured cadence once active.
#[allow(clippy::too_many_arguments)]
fn validation_loss(
    grammar: &Grammar,
    params: &ModelParams<f64>,
    dataset: &[RuleSequence],
    idx: &[usize],
    beta: f64,
    gamma: f64,
    cfg: &TrainConfig,
    reservoir: &Reservoir<f64>,
    directions: &[Vec<f64>],
    rng: &mut ChaCha8Rng,
) -> f64 {
    let (c, l) = (grammar.rule_count(), grammar.max_len());
    let mut total = 0.0;
    let mut batches = 0usize;
    for (b, chunk) in idx.chunks(cfg.batch).enumerate() {
        let mut acc = 0.0;
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(chunk.len());
        for &i in chunk {
            let x = grammar.encode_onehot(&dataset[i]);
            let cache = encode_cached(params, flatten_onehot::<f64>(&x));
            let kl = loss_kl(&cache.mu, &cache.lv);
            // Deterministic validation: decode the posterior mean so the
            // metric is noise-free for the plateau/early-stop trackers.
            let dec = decode_cached(params, cache.mu.clone());
            let (ce, _) = loss_recon_grad(&dec.logits, &dataset[i], c, l);
            acc += ce + beta * kl;
            zs.push(cache.mu);
        }
        acc /= chunk.len() as f64;
        if gamma > 0.0 && (b + 1) % cfg.topo_val_cadence == 0 && !reservoir.is_empty() {
            let hull = hull_loss_grad(reservoir, &zs, directions)
                .map(|(v, _)| v)
                .unwrap_or(0.0);
            let sub = subsample(&zs, cfg.ph_max_points, rng);
            let (ph, _) = ph_loss_grad(&sub, &cfg.ph_radii, cfg.ph_a0);
            let probes = draw_probes(cfg.smooth_probes, cfg.latent, rng);
            let smooth = smoothness_loss(params, &zs, &probes, cfg.smooth_h, None);
            acc += gamma * (cfg.w_hull * hull + cfg.w_ph * ph + cfg.w_smooth * smooth);
        }
        total += acc;
        batches += 1;
    }
    if batches == 0 {
        f64::INFINITY
    } else {
        total / batches as f64
    }
}

fn subsample(zs: &[Vec<f64>], max_points: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    if zs.len() <= max_points {
        return zs.to_vec();
    }
    let mut idx: Vec<usize> = (0..zs.len()).collect();
    idx.shuffle(rng);
    idx.truncate(max_points);
    idx.sort_unstable();
    idx.into_iter().map(|i| zs[i].clone()).collect()
}

fn draw_probes(count: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| StandardNormal.sample(rng))
                .collect::<Vec<f64>>()
        })
        .collect()
}

/// Train the autoencoder on a dataset of rule sequences.
pub fn train(
    grammar: &Grammar,
    dataset: &[RuleSequence],
    cfg: &TrainConfig,
) -> Result<TrainResult, TrainError> {
    if dataset.len() < 10 {
        return Err(TrainError::DatasetTooSmall(dataset.len()));
    }
    let (train_idx, val_idx, test_idx) = split_dataset(dataset.len(), cfg.split_seed);
    let (c, l) = (grammar.rule_count(), grammar.max_len());
    let arch = Architecture {
        c,
        l,
        hidden: cfg.hidden,
        latent: cfg.latent,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params: ModelParams<f64> = ModelParams::init(arch, &mut rng);
    let mut opt = AdamW::new(&params, cfg.lr, cfg.weight_decay);
    let mut plateau = PlateauScheduler::new(cfg.plateau_factor, cfg.plateau_patience, cfg.min_lr);
    let mut stopper = EarlyStopping::new(cfg.early_stop_patience);
    let directions: Vec<Vec<f64>> = sample_directions(cfg.hull_directions, cfg.latent, &mut rng);
    let mut reservoir: Reservoir<f64> = Reservoir::new(cfg.reservoir_delta);

    let steps_per_epoch = train_idx.len().div_ceil(cfg.batch).max(1);
    let mut log: Vec<LogRow> = Vec::new();
    let mut step = 0usize;
    let mut activation_epoch: Option<f64> = None;
    let mut val_acc = 0.0;
    let mut epochs_run = 0usize;

    for epoch in 0..cfg.epochs {
        epochs_run = epoch + 1;
        let mut order = train_idx.clone();
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            let beta = beta_schedule(step, cfg.beta0, cfg.warmup_steps);
            let frac_epoch = step as f64 / steps_per_epoch as f64;
            let gamma = gamma_schedule(frac_epoch, activation_epoch, cfg.gamma_ramp_epochs);
            let inv_b = 1.0 / chunk.len() as f64;

            // Forward pass over the batch, caching everything needed for
            // the backward pass.
            let mut enc_caches = Vec::with_capacity(chunk.len());
            let mut dec_caches = Vec::with_capacity(chunk.len());
            let mut epss = Vec::with_capacity(chunk.len());
            let mut recon_grads = Vec::with_capacity(chunk.len());
            let mut ce_mean = 0.0;
            let mut kl_mean = 0.0;
            for &i in chunk {
                let x = grammar.encode_onehot(&dataset[i]);
                let ec = encode_cached(&params, flatten_onehot::<f64>(&x));
                kl_mean += loss_kl(&ec.mu, &ec.lv) * inv_b;
                let (z, eps) = reparameterize(&ec.mu, &ec.lv, &mut rng);
                let dc = decode_cached(&params, z);
                let (ce, dlogits) = loss_recon_grad(&dc.logits, &dataset[i], c, l);
                ce_mean += ce * inv_b;
                enc_caches.push(ec);
                dec_caches.push(dc);
                epss.push(eps);
                recon_grads.push(dlogits);
            }
            let zs: Vec<Vec<f64>> = dec_caches.iter().map(|d| d.z.clone()).collect();

            // Topology terms at cadence, once active and the reservoir is
            // seeded.
            let mut grads = params.zeros_like();
            let topo_step = gamma > 0.0
                && step % cfg.topo_train_cadence == 0
                && !reservoir.is_empty();
            let (mut hull, mut ph, mut smooth) = (0.0, 0.0, 0.0);
            let mut dz_topo: Vec<Vec<f64>> = vec![vec![0.0; cfg.latent]; chunk.len()];
            if topo_step {
                if let Ok((h, dzs)) = hull_loss_grad(&reservoir, &zs, &directions) {
                    hull = h;
                    for (acc, dz) in dz_topo.iter_mut().zip(&dzs) {
                        axpy(acc, dz, gamma * cfg.w_hull);
                    }
                }
                // Subsample for persistence by index so the gradients map
                // back to the right batch items.
                let mut idx: Vec<usize> = (0..zs.len()).collect();
                if idx.len() > cfg.ph_max_points {
                    idx.shuffle(&mut rng);
                    idx.truncate(cfg.ph_max_points);
                    idx.sort_unstable();
                }
                let sub: Vec<Vec<f64>> = idx.iter().map(|&i| zs[i].clone()).collect();
                let (p, dzs) = ph_loss_grad(&sub, &cfg.ph_radii, cfg.ph_a0);
                ph = p;
                for (slot, dz) in idx.iter().zip(&dzs) {
                    axpy(&mut dz_topo[*slot], dz, gamma * cfg.w_ph);
                }
                // Smoothness regularizes the decoder directly; its
                // parameter gradient accumulates into a scratch tree and
                // is folded in with its weight.
                let probes = draw_probes(cfg.smooth_probes, cfg.latent, &mut rng);
                let mut sgrads = params.zeros_like();
                smooth = smoothness_loss(&params, &zs, &probes, cfg.smooth_h, Some(&mut sgrads));
                grads.for_each_tensor_mut(&sgrads, &mut |g, s, _| {
                    for (a, b) in g.iter_mut().zip(s) {
                        *a += gamma * cfg.w_smooth * *b;
                    }
                });
            }

            let total_loss = ce_mean
                + beta * kl_mean
                + gamma * (cfg.w_hull * hull + cfg.w_ph * ph + cfg.w_smooth * smooth);
            if !total_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    step,
                    ce: ce_mean,
                    kl: kl_mean,
                    hull,
                    ph,
                    smooth,
                });
            }

            // Backward pass per item.
            for (item, ((ec, dc), eps)) in enc_caches.iter().zip(&dec_caches).zip(&epss).enumerate()
            {
                let dlogits = &mut recon_grads[item];
                for d in dlogits.iter_mut() {
                    *d *= inv_b;
                }
                let mut dz = decoder_backward(&params, &mut grads, dc, dlogits);
                // Topology gradients enter through z as well.
                axpy(&mut dz, &dz_topo[item], 1.0);
                // Reparameterization: z = μ + exp(lv/2)·ε.
                let (kl_dmu, kl_dlv) = loss_kl_grad(&ec.mu, &ec.lv);
                let mut dmu = dz.clone();
                let mut dlv: Vec<f64> = dz
                    .iter()
                    .zip(&ec.lv)
                    .zip(eps)
                    .map(|((&d, &lv), &e)| d * 0.5 * (0.5 * lv).exp() * e)
                    .collect();
                axpy(&mut dmu, &kl_dmu, beta * inv_b);
                axpy(&mut dlv, &kl_dlv, beta * inv_b);
                encoder_backward(&params, &mut grads, ec, &dmu, &dlv);
            }

            opt.step(&mut params, &grads);
            reservoir.update(&zs);

            log.push(LogRow {
                step,
                ce: ce_mean,
                kl: kl_mean,
                beta,
                gamma,
                hull,
                ph,
                smooth,
                val_acc,
            });
            step += 1;
        }

        // End of epoch: validation metric, schedules, stopping.  The
        // validation ELBO uses the current β and deterministic (mean)
        // decoding, so the plateau and early-stop trackers see a
        // noise-free metric.
        let beta = beta_schedule(step, cfg.beta0, cfg.warmup_steps);
        let frac_epoch = step as f64 / steps_per_epoch as f64;
        let gamma = gamma_schedule(frac_epoch, activation_epoch, cfg.gamma_ramp_epochs);
        val_acc = seq_exact_accuracy(grammar, &params, dataset, &val_idx);
        let val_loss = validation_loss(
            grammar, &params, dataset, &val_idx, beta, gamma, cfg, &reservoir, &directions,
            &mut rng,
        );
        if activation_epoch.is_none() && val_acc >= cfg.activation_val_acc {
            activation_epoch = Some(frac_epoch);
            // New loss terms change the metric's scale: start both
            // trackers from a fresh baseline.
            plateau.reset_baseline();
            stopper.reset_baseline();
        }
        opt.lr = plateau.observe(val_loss, opt.lr);
        if stopper.observe(val_loss) {
            break;
        }
    }

    let final_val_acc = seq_exact_accuracy(grammar, &params, dataset, &val_idx);
    Ok(TrainResult {
        params,
        log,
        train_idx,
        val_idx,
        test_idx,
        final_val_acc,
        activation_epoch,
        epochs_run,
    })
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Self-describing JSON checkpoint.  The grammar hash pins the rule set
/// the model was trained against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub grammar_hash: String,
    pub params: ModelParams<f64>,
}

impl Checkpoint {
    pub fn new(grammar: &Grammar, params: ModelParams<f64>) -> Self {
        Checkpoint {
            grammar_hash: grammar.hash(),
            params,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    /// Parse and validate against the grammar the caller intends to use.
    pub fn from_json(json: &str, grammar: &Grammar) -> Result<Checkpoint, TrainError> {
        let ckpt: Checkpoint = serde_json::from_str(json)?;
        let expected = grammar.hash();
        if ckpt.grammar_hash != expected {
            return Err(TrainError::GrammarMismatch {
                expected,
                found: ckpt.grammar_hash,
            });
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), TrainError> {
        // Write-then-rename keeps half-written checkpoints off disk.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path, grammar: &Grammar) -> Result<Checkpoint, TrainError> {
        let text = std::fs::read_to_string(path)?;
        Checkpoint::from_json(&text, grammar)
    }
}
