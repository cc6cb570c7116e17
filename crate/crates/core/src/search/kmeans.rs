//! Seeded k-means with k-means++ initialization (Lloyd's iterations).

use super::SearchError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Assignments and centroids of one clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

const MAX_ITERS: usize = 100;

/// Cluster `points` into `k` groups.  Deterministic under `seed`; empty
/// clusters are reseeded to the point farthest from its centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans, SearchError> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(SearchError::KMeansTooFewPoints { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ spread initialization.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total <= 0.0 {
            // All remaining points coincide with a centroid.
            rng.gen_range(0..n)
        } else {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        };
        centroids.push(points[idx].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, centroids.last().unwrap()));
        }
    }

    let dim = points[0].len();
    let mut assignments = vec![0usize; n];
    for _ in 0..MAX_ITERS {
        // Assign.
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = dist2(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        // Update.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignments[i]] += 1;
            for (s, &v) in sums[assignments[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed an empty cluster to the point farthest from its
                // current centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = dist2(&points[a], &centroids[assignments[a]]);
                        let db = dist2(&points[b], &centroids[assignments[b]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centroids[c] = points[far].clone();
                assignments[far] = c;
                changed = true;
            } else {
                for (j, s) in sums[c].iter().enumerate() {
                    centroids[c][j] = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(KMeans {
        assignments,
        centroids,
    })
}
