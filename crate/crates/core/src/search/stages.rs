//! Stage 0 and Stage I: latent-space structure search by iterative
//! clustering, plus the full search orchestration.

use super::ansatz::Ansatz;
use super::kmeans::{kmeans, KMeans};
use super::refine::stage2_refine;
use super::{SearchConfig, SearchError};
use crate::atoms::{validate_component, Validation};
use crate::grammar::Grammar;
use crate::interp::{interpret, Var};
use crate::residual::{relative_l2, PDEProblem, Reference};
use crate::tgvae::{decode_logits, encode, hull_loss, sample_directions, Reservoir};
use crate::{atoms::AtomLibrary, tgvae::ModelParams, Real};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::{BTreeSet, HashSet};

/// Literal precision admitted in assembled candidates (time factors carry
/// six decimals).
const CANDIDATE_DECIMALS: usize = 6;

/// One slot's admissible atoms with their (deterministic) latent codes.
#[derive(Debug, Clone)]
pub struct ComponentSet {
    pub exprs: Vec<String>,
    pub latents: Vec<Vec<Real>>,
}

/// Per-slot component sets and their Stage 0 clusterings.
#[derive(Debug, Clone)]
pub struct ClusterState {
    pub sets: Vec<ComponentSet>,
    pub clusters: Vec<KMeans>,
}

/// Best candidate found so far.
#[derive(Debug, Clone)]
pub struct Incumbent {
    pub expr: String,
    pub components: Vec<String>,
    /// Latent code each component decoded from.
    pub zs: Vec<Vec<Real>>,
    /// Stage 0 cluster index per slot.
    pub tuple: Vec<usize>,
    pub residual: f64,
}

/// One trace entry per incumbent improvement.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct StageTraceRow {
    pub stage: String,
    pub iteration: usize,
    pub residual: f64,
    pub expr: String,
}

/// Final search result.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub expr: String,
    pub params: Vec<f64>,
    pub residual: f64,
    /// Error against the problem's exact solution, when one is known.
    pub relative_l2: Option<f64>,
    /// Hull penalty of the frozen incumbent latents (recorded, not
    /// optimized).
    pub hull_penalty: Option<f64>,
    pub trace: Vec<StageTraceRow>,
}

/// Decode a latent code to expression text: decoder logits, masked argmax
/// over the grammar, then derivation.
pub fn decode_latent(
    grammar: &Grammar,
    model: &ModelParams<Real>,
    z: &[Real],
) -> Result<String, SearchError> {
    let logits = decode_logits(model, z);
    let seq = grammar.masked_argmax_decode(&logits)?;
    Ok(grammar.derive(&seq)?)
}

/// Atoms whose variable set matches the slot exactly, with encoder-mean
/// latents.
pub fn filter_component_library(
    grammar: &Grammar,
    model: &ModelParams<Real>,
    library: &AtomLibrary,
    slot: &super::Slot,
) -> Result<ComponentSet, SearchError> {
    let mut exprs = Vec::new();
    let mut latents = Vec::new();
    for entry in library.entries() {
        let vars: BTreeSet<Var> = interpret(&entry.canonical)?.variables().into_iter().collect();
        if vars == slot.vars {
            let onehot = grammar.encode_onehot(&entry.rules);
            let (mu, _) = encode(model, &onehot);
            exprs.push(entry.canonical.clone());
            latents.push(mu);
        }
    }
    if exprs.is_empty() {
        return Err(SearchError::EmptyComponentLibrary(slot.label.clone()));
    }
    Ok(ComponentSet { exprs, latents })
}

/// Decode one latent per slot, assemble, admissibility-check, and score.
/// Inadmissible or unparseable candidates score `+∞`.
fn score_candidate(
    grammar: &Grammar,
    model: &ModelParams<Real>,
    ansatz: &Ansatz,
    zs: &[Vec<Real>],
    problem: &PDEProblem,
) -> (Option<(String, Vec<String>)>, f64) {
    let mut components = Vec::with_capacity(zs.len());
    for z in zs {
        match decode_latent(grammar, model, z) {
            Ok(text) => components.push(text),
            Err(_) => return (None, f64::INFINITY),
        }
    }
    let assembled = match ansatz.assemble(&components) {
        Ok(a) => a,
        Err(_) => return (None, f64::INFINITY),
    };
    match validate_component(&assembled, &problem.domain, CANDIDATE_DECIMALS) {
        Validation::Valid => {}
        Validation::Rejected(_) => return (None, f64::INFINITY),
    }
    let tree = match interpret(&assembled) {
        Ok(t) => t,
        Err(_) => return (None, f64::INFINITY),
    };
    let r = crate::residual::residual(&tree, problem);
    if r.is_finite() {
        (Some((assembled, components)), r)
    } else {
        (None, f64::INFINITY)
    }
}

/// Stage 0: filter, cluster, and seed the incumbent from sampled cluster
/// tuples (unseen tuples first, then with replacement).
pub fn stage0<R: Rng>(
    grammar: &Grammar,
    model: &ModelParams<Real>,
    ansatz: &Ansatz,
    library: &AtomLibrary,
    problem: &PDEProblem,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<(ClusterState, Incumbent), SearchError> {
    let mut sets = Vec::with_capacity(ansatz.len());
    let mut clusters = Vec::with_capacity(ansatz.len());
    for (j, slot) in ansatz.slots.iter().enumerate() {
        let set = filter_component_library(grammar, model, library, slot)?;
        let k = config.k_clusters.min(set.latents.len()).max(1);
        clusters.push(kmeans(&set.latents, k, config.seed ^ (j as u64 + 1))?);
        sets.push(set);
    }
    let state = ClusterState { sets, clusters };

    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut best: Option<Incumbent> = None;
    for _ in 0..config.draws {
        // Prefer an unseen cluster tuple; fall back to replacement once
        // a few uniform draws all collide.
        let mut tuple = Vec::with_capacity(state.clusters.len());
        for _ in 0..8 {
            tuple = state
                .clusters
                .iter()
                .map(|km| rng.gen_range(0..km.centroids.len()))
                .collect();
            if !seen.contains(&tuple) {
                break;
            }
        }
        seen.insert(tuple.clone());

        // Draw one member latent from each chosen cluster.
        let mut zs = Vec::with_capacity(tuple.len());
        for (j, &c) in tuple.iter().enumerate() {
            let members: Vec<usize> = state.clusters[j]
                .assignments
                .iter()
                .enumerate()
                .filter(|&(_, &a)| a == c)
                .map(|(i, _)| i)
                .collect();
            let pick = members[rng.gen_range(0..members.len())];
            zs.push(state.sets[j].latents[pick].clone());
        }
        let (built, r) = score_candidate(grammar, model, ansatz, &zs, problem);
        if let Some((expr, components)) = built {
            if best.as_ref().is_none_or(|b| r < b.residual) {
                best = Some(Incumbent {
                    expr,
                    components,
                    zs,
                    tuple,
                    residual: r,
                });
            }
        }
    }
    let incumbent = best.ok_or(SearchError::NoFiniteCandidate)?;
    Ok((state, incumbent))
}

/// Draw a latent from one subcluster.  Small subclusters (fewer than
/// `min_pop` members) are filled in synthetically: a simplex-uniform
/// convex combination of members plus isotropic `N(0, σ_jit² I)` jitter.
fn draw_from_subcluster<R: Rng>(
    points: &[Vec<Real>],
    subkm: &KMeans,
    sub: usize,
    config: &SearchConfig,
    rng: &mut R,
) -> Vec<Real> {
    let members: Vec<usize> = subkm
        .assignments
        .iter()
        .enumerate()
        .filter(|&(_, &a)| a == sub)
        .map(|(i, _)| i)
        .collect();
    if members.len() >= config.min_pop {
        return points[members[rng.gen_range(0..members.len())]].clone();
    }
    // Synthesize within the convex hull of the members (all cluster points
    // if the subcluster is empty).
    let pool: Vec<&Vec<Real>> = if members.is_empty() {
        points.iter().collect()
    } else {
        members.iter().map(|&i| &points[i]).collect()
    };
    let dim = pool[0].len();
    let weights: Vec<f64> = {
        let raw: Vec<f64> = (0..pool.len())
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    };
    let mut z = vec![0.0; dim];
    for (w, p) in weights.iter().zip(&pool) {
        for (zi, pi) in z.iter_mut().zip(p.iter()) {
            *zi += w * pi;
        }
    }
    for zi in z.iter_mut() {
        let noise: f64 = rng.sample(StandardNormal);
        *zi += config.sigma_jit * noise;
    }
    z
}

/// Stage I: subcluster the incumbent's clusters and iterate local draws,
/// keeping the incumbent monotone non-increasing in residual.
pub fn stage1<R: Rng>(
    grammar: &Grammar,
    model: &ModelParams<Real>,
    ansatz: &Ansatz,
    state: &ClusterState,
    mut incumbent: Incumbent,
    problem: &PDEProblem,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<(Incumbent, Vec<StageTraceRow>), SearchError> {
    // Member latents of the incumbent's cluster in each slot, subclustered
    // once up front.
    let mut slot_points: Vec<Vec<Vec<Real>>> = Vec::with_capacity(ansatz.len());
    let mut slot_sub: Vec<KMeans> = Vec::with_capacity(ansatz.len());
    for (j, &c) in incumbent.tuple.iter().enumerate() {
        let points: Vec<Vec<Real>> = state.clusters[j]
            .assignments
            .iter()
            .enumerate()
            .filter(|&(_, &a)| a == c)
            .map(|(i, _)| state.sets[j].latents[i].clone())
            .collect();
        let h = config.subclusters.min(points.len()).max(1);
        slot_sub.push(kmeans(&points, h, config.seed ^ 0x5151 ^ (j as u64 + 1))?);
        slot_points.push(points);
    }

    let mut trace = Vec::new();
    let mut t = 0;
    while t < config.t_max && incumbent.residual > config.eps_struct {
        let zs: Vec<Vec<Real>> = (0..ansatz.len())
            .map(|j| {
                let sub = rng.gen_range(0..slot_sub[j].centroids.len());
                draw_from_subcluster(&slot_points[j], &slot_sub[j], sub, config, rng)
            })
            .collect();
        let (built, r) = score_candidate(grammar, model, ansatz, &zs, problem);
        if let Some((expr, components)) = built {
            if r < incumbent.residual {
                incumbent = Incumbent {
                    expr,
                    components,
                    zs,
                    tuple: incumbent.tuple.clone(),
                    residual: r,
                };
                trace.push(StageTraceRow {
                    stage: "structure".to_string(),
                    iteration: t,
                    residual: r,
                    expr: incumbent.expr.clone(),
                });
            }
        }
        t += 1;
    }
    Ok((incumbent, trace))
}

/// Full pipeline: Stage 0 seeding, Stage I structure refinement, hull
/// penalty of the frozen incumbent, Stage II constant refinement.
pub fn run_search(
    grammar: &Grammar,
    model: &ModelParams<Real>,
    ansatz: &Ansatz,
    library: &AtomLibrary,
    problem: &PDEProblem,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (state, incumbent) = stage0(grammar, model, ansatz, library, problem, config, &mut rng)?;
    let mut trace = vec![StageTraceRow {
        stage: "seed".to_string(),
        iteration: 0,
        residual: incumbent.residual,
        expr: incumbent.expr.clone(),
    }];
    let (incumbent, stage1_trace) =
        stage1(grammar, model, ansatz, &state, incumbent, problem, config, &mut rng)?;
    trace.extend(stage1_trace);

    // Hull penalty of the frozen incumbent latents against the reservoir
    // of all admissible component latents.
    let mut reservoir = Reservoir::new(1e-9);
    for set in &state.sets {
        reservoir.update(&set.latents);
    }
    let directions = sample_directions::<Real, _>(64, crate::LATENT_DIM, &mut rng);
    let hull_penalty = hull_loss(&reservoir, &incumbent.zs, &directions).ok();

    let refined = stage2_refine(&incumbent.expr, problem, config, &mut rng, hull_penalty)?;
    // Keep whichever constants actually score better (refinement never
    // regresses the incumbent).
    let (expr, params, residual) = if refined.residual <= incumbent.residual {
        (refined.expr, refined.params, refined.residual)
    } else {
        (incumbent.expr.clone(), Vec::new(), incumbent.residual)
    };
    trace.push(StageTraceRow {
        stage: "refine".to_string(),
        iteration: 0,
        residual,
        expr: expr.clone(),
    });

    let relative = match &problem.analytical {
        Some(exact) => {
            let tree = interpret(&expr)?;
            let points: Vec<(f64, f64, f64)> = problem
                .spatial_points()
                .iter()
                .flat_map(|&(x, y)| problem.t_points().into_iter().map(move |t| (x, y, t)))
                .collect();
            Some(relative_l2(
                &tree,
                &Reference::Analytic(exact.clone()),
                &points,
            )?)
        }
        None => None,
    };

    Ok(SearchOutcome {
        expr,
        params,
        residual,
        relative_l2: relative,
        hull_penalty,
        trace,
    })
}
