//! Two-stage solution discovery in the autoencoder's latent space.
//!
//! Stage 0 filters the atom library into per-slot component sets, clusters
//! their latent codes, and assembles an initial incumbent from sampled
//! cluster tuples.  Stage I subclusters the incumbent's clusters and
//! refines the structure.  Stage II lifts the incumbent's numeric literals
//! into parameters and polishes them with multi-start Adam on the
//! discretized residual.  The module also hosts the Mahalanobis latent
//! filter and the two sampling ablations.

mod ansatz;
mod filter;
mod kmeans;
mod refine;
mod stages;

pub use ansatz::{tag, Ansatz, Slot};
pub use filter::{
    atoms_vs_primitives_ablation, ansatz_admissibility, race_to_k_valid,
    sample_admissible_latents, AblationReport, MahalanobisFilter, RaceResult,
};
pub use kmeans::{kmeans, KMeans};
pub use refine::{stage2_refine, RefineOutcome, ResidualObjective};
pub use stages::{
    decode_latent, filter_component_library, run_search, stage0, stage1, ClusterState,
    ComponentSet, Incumbent, SearchOutcome, StageTraceRow,
};

use crate::grammar::GrammarError;
use crate::interp::InterpError;
use crate::residual::ResidualError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("ansatz template is malformed: {0}")]
    BadAnsatz(String),
    #[error("no library atom satisfies slot `{0}`")]
    EmptyComponentLibrary(String),
    #[error("k-means asked for {k} clusters from {n} points")]
    KMeansTooFewPoints { k: usize, n: usize },
    #[error("every scored candidate had a non-finite residual")]
    NoFiniteCandidate,
    #[error("all refinement starts diverged")]
    RefinementFailed,
    #[error("covariance is singular even after regularization")]
    SingularCovariance,
    #[error("latent pool exhausted after {attempts} attempts ({valid} of {k} valid)")]
    LatentPoolExhausted {
        attempts: usize,
        valid: usize,
        k: usize,
    },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
}

/// Search budgets and thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Clusters per component slot (Stage 0).
    pub k_clusters: usize,
    /// Subclusters per slot (Stage I).
    pub subclusters: usize,
    /// Cluster-tuple draw budget M (Stage 0).
    pub draws: usize,
    /// Stage I iteration cap.
    pub t_max: usize,
    /// Stage I stops once the incumbent residual falls below this.
    pub eps_struct: f64,
    /// Minimum subcluster population before synthetic fill-in.
    pub min_pop: usize,
    /// Isotropic jitter for synthesized latents.
    pub sigma_jit: f64,
    /// Stage II parallel starts.
    pub starts: usize,
    /// Stage II start-noise scale η.
    pub eta: f64,
    /// Stage II stops when √R falls below this.
    pub eps_tol: f64,
    /// Stage II per-start step budget.
    pub refine_steps: usize,
    /// Stage II initial learning rate.
    pub lr0: f64,
    /// Stage II final learning rate of the exponential decay.
    pub lr_end: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            k_clusters: 8,
            subclusters: 4,
            draws: 64,
            t_max: 50,
            eps_struct: 1e-10,
            min_pop: 5,
            sigma_jit: 0.05,
            starts: 8,
            eta: 0.05,
            eps_tol: 1e-4,
            refine_steps: 2000,
            lr0: 0.05,
            lr_end: 1e-4,
            seed: 0,
        }
    }
}
