//! Mahalanobis latent novelty filter and the two sampling ablations
//! (race-to-k validity and atoms vs. raw grammar primitives).

use super::stages::decode_latent;
use super::{Ansatz, SearchError};
use crate::atoms::{validate, validate_component, AtomLibrary, ProblemClass};
use crate::grammar::Grammar;
use crate::interp::{interpret, Var};
use crate::residual::Domain;
use crate::tgvae::ModelParams;
use crate::{Real, LATENT_DIM};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeSet;

const DECIMALS: usize = 6;

/// Novelty filter: a candidate latent is accepted only if its smallest
/// Mahalanobis distance to the reference points is at least `τ`.
#[derive(Debug, Clone)]
pub struct MahalanobisFilter {
    points: Vec<Vec<Real>>,
    /// Lower-triangular Cholesky factor of the regularized covariance.
    chol: Vec<Vec<Real>>,
    pub tau: f64,
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

impl MahalanobisFilter {
    /// Fit the covariance of `points` (ridge-regularized by `1e-6 I`) and
    /// keep the points as the reference set.
    pub fn new(points: &[Vec<Real>], tau: f64) -> Result<Self, SearchError> {
        if points.is_empty() {
            return Err(SearchError::SingularCovariance);
        }
        let dim = points[0].len();
        let n = points.len() as f64;
        let mut mean = vec![0.0; dim];
        for p in points {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v / n;
            }
        }
        let mut sigma = vec![vec![0.0; dim]; dim];
        for p in points {
            for i in 0..dim {
                for j in 0..dim {
                    sigma[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / n;
                }
            }
        }
        for (i, row) in sigma.iter_mut().enumerate() {
            row[i] += 1e-6;
        }
        let chol = cholesky(&sigma).ok_or(SearchError::SingularCovariance)?;
        Ok(MahalanobisFilter {
            points: points.to_vec(),
            chol,
            tau,
        })
    }

    /// `min_i √((z − x_i)ᵀ Σ⁻¹ (z − x_i))` via forward substitution
    /// against the Cholesky factor.
    pub fn min_distance(&self, z: &[Real]) -> f64 {
        let dim = z.len();
        let mut best = f64::INFINITY;
        for p in &self.points {
            let d: Vec<f64> = z.iter().zip(p).map(|(a, b)| a - b).collect();
            // Solve L w = d; then dᵀΣ⁻¹d = ‖w‖².
            let mut w = vec![0.0; dim];
            for i in 0..dim {
                let mut s = d[i];
                for k in 0..i {
                    s -= self.chol[i][k] * w[k];
                }
                w[i] = s / self.chol[i][i];
            }
            let dist2: f64 = w.iter().map(|v| v * v).sum();
            best = best.min(dist2.sqrt());
        }
        best
    }

    pub fn accepts(&self, z: &[Real]) -> bool {
        self.min_distance(z) >= self.tau
    }
}

/// Draw standard-normal latents, keeping those the filter accepts (all of
/// them when no filter is supplied).  Gives up after `1000 · n` draws.
pub fn sample_admissible_latents<R: Rng>(
    n: usize,
    filter: Option<&MahalanobisFilter>,
    rng: &mut R,
) -> Vec<Vec<Real>> {
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n && attempts < n.saturating_mul(1000).max(1) {
        attempts += 1;
        let z: Vec<Real> = (0..LATENT_DIM)
            .map(|_| {
                let v: f64 = rng.sample(StandardNormal);
                v
            })
            .collect();
        if filter.is_none_or(|f| f.accepts(&z)) {
            out.push(z);
        }
    }
    out
}

fn latent_is_valid(
    grammar: &Grammar,
    model: &ModelParams<Real>,
    z: &[Real],
    domain: &Domain,
) -> bool {
    match decode_latent(grammar, model, z) {
        Ok(text) => validate_component(&text, domain, DECIMALS).is_valid(),
        Err(_) => false,
    }
}

/// Per-split decode attempts for two competing decoders.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RaceResult {
    pub attempts_a: Vec<usize>,
    pub attempts_b: Vec<usize>,
    pub k: usize,
}

impl RaceResult {
    pub fn mean_a(&self) -> f64 {
        self.attempts_a.iter().sum::<usize>() as f64 / self.attempts_a.len() as f64
    }
    pub fn mean_b(&self) -> f64 {
        self.attempts_b.iter().sum::<usize>() as f64 / self.attempts_b.len() as f64
    }
}

/// Split the latent pool into `splits` disjoint contiguous sets; in each,
/// count how many latents each decoder consumes before producing `k`
/// admissible expressions.
pub fn race_to_k_valid(
    grammar: &Grammar,
    model_a: &ModelParams<Real>,
    model_b: &ModelParams<Real>,
    latents: &[Vec<Real>],
    k: usize,
    splits: usize,
    domain: &Domain,
) -> Result<RaceResult, SearchError> {
    let per = latents.len() / splits.max(1);
    let mut attempts_a = Vec::with_capacity(splits);
    let mut attempts_b = Vec::with_capacity(splits);
    for s in 0..splits {
        let pool = &latents[s * per..(s + 1) * per];
        for (model, out) in [(model_a, &mut attempts_a), (model_b, &mut attempts_b)] {
            let mut valid = 0usize;
            let mut used = 0usize;
            for z in pool {
                used += 1;
                if latent_is_valid(grammar, model, z, domain) {
                    valid += 1;
                    if valid == k {
                        break;
                    }
                }
            }
            if valid < k {
                return Err(SearchError::LatentPoolExhausted {
                    attempts: used,
                    valid,
                    k,
                });
            }
            out.push(used);
        }
    }
    Ok(RaceResult {
        attempts_a,
        attempts_b,
        k,
    })
}

/// Admissible fraction of a sampling scheme.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AblationReport {
    pub samples: usize,
    pub admissible: usize,
}

impl AblationReport {
    pub fn fraction(&self) -> f64 {
        self.admissible as f64 / self.samples.max(1) as f64
    }
}

/// Baseline of the atoms ablation: draw `n` expressions uniformly from
/// the raw grammar (masked uniform decode) and measure how many pass the
/// full admissibility checks for the problem class (variable presence
/// included).
pub fn atoms_vs_primitives_ablation(
    grammar: &Grammar,
    class: ProblemClass,
    n: usize,
    domain: &Domain,
    seed: u64,
) -> Result<AblationReport, SearchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut admissible = 0usize;
    for _ in 0..n {
        let seq = grammar.masked_uniform_decode(&mut rng)?;
        let text = grammar.derive(&seq)?;
        if validate(&text, class, domain).is_valid() {
            admissible += 1;
        }
    }
    Ok(AblationReport {
        samples: n,
        admissible,
    })
}

/// Treatment arm of the atoms ablation: assemble `n` random library-atom
/// tuples through the Ansatz and measure admissibility.
pub fn ansatz_admissibility(
    ansatz: &Ansatz,
    library: &AtomLibrary,
    n: usize,
    domain: &Domain,
    seed: u64,
) -> Result<AblationReport, SearchError> {
    let mut per_slot: Vec<Vec<&str>> = Vec::with_capacity(ansatz.len());
    for slot in &ansatz.slots {
        let mut matches = Vec::new();
        for entry in library.entries() {
            let vars: BTreeSet<Var> =
                interpret(&entry.canonical)?.variables().into_iter().collect();
            if vars == slot.vars {
                matches.push(entry.canonical.as_str());
            }
        }
        if matches.is_empty() {
            return Err(SearchError::EmptyComponentLibrary(slot.label.clone()));
        }
        per_slot.push(matches);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut admissible = 0usize;
    for _ in 0..n {
        let components: Vec<String> = per_slot
            .iter()
            .map(|m| m[rng.gen_range(0..m.len())].to_string())
            .collect();
        if let Ok(assembled) = ansatz.assemble(&components) {
            if validate_component(&assembled, domain, DECIMALS).is_valid() {
                admissible += 1;
            }
        }
    }
    Ok(AblationReport {
        samples: n,
        admissible,
    })
}
