//! Persistent homology of the Vietoris–Rips filtration on a small point
//! cloud (dimensions 0 and 1), with clamped-lifetime loss and coordinate
//! subgradients.
//!
//! H0 comes from the minimum spanning tree: every merging edge kills one
//! component at its length.  H1 comes from Z/2 boundary-matrix reduction
//! of triangle columns over the filtration-ordered edges; a reduced
//! column pairs its lowest edge (cycle birth) with the triangle's
//! diameter (cycle death).  At full filtration the flag complex of a
//! finite cloud has no essential 1-cycles, so every recorded pair is
//! finite.

use crate::scalar::Scalar;

/// One finite persistence pair with the simplices that realize birth and
/// death (edges as vertex index pairs).
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub birth: f64,
    pub death: f64,
    /// Birth edge; `None` for H0 classes born at 0.
    pub birth_edge: Option<(usize, usize)>,
    /// The edge whose length realizes the death value.
    pub death_edge: (usize, usize),
}

#[derive(Debug, Clone, Default)]
pub struct PersistencePairs {
    pub h0: Vec<Pair>,
    pub h1: Vec<Pair>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            false
        } else {
            self.parent[ra] = rb;
            true
        }
    }
}

fn dist<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = (a[i] - b[i]).to_f64_lossy();
        acc += d * d;
    }
    acc.sqrt()
}

/// Fixed-width bitset over edge ranks.
#[derive(Clone, PartialEq)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(words: usize) -> Self {
        Bits(vec![0; words])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn xor(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }

    fn low(&self) -> Option<usize> {
        for (w, word) in self.0.iter().enumerate().rev() {
            if *word != 0 {
                return Some(w * 64 + 63 - word.leading_zeros() as usize);
            }
        }
        None
    }
}

/// Persistence pairs of the Rips filtration (H0 and H1).
pub fn rips_pairs<S: Scalar>(points: &[Vec<S>]) -> PersistencePairs {
    let n = points.len();
    let mut out = PersistencePairs::default();
    if n < 2 {
        return out;
    }

    // Filtration-ordered edges; ties break on the vertex pair so the
    // order is total and deterministic.
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((dist(&points[i], &points[j]), i, j));
        }
    }
    edges.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite distances")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    // H0 via union-find; creator (non-merging) edges feed the H1 stage.
    let mut uf = UnionFind::new(n);
    let mut creator = vec![false; edges.len()];
    for (rank, &(len, i, j)) in edges.iter().enumerate() {
        if uf.union(i, j) {
            out.h0.push(Pair {
                birth: 0.0,
                death: len,
                birth_edge: None,
                death_edge: (i, j),
            });
        } else {
            creator[rank] = true;
        }
    }

    if n < 3 {
        return out;
    }

    // Edge rank lookup.
    let mut rank_of = vec![vec![usize::MAX; n]; n];
    for (rank, &(_, i, j)) in edges.iter().enumerate() {
        rank_of[i][j] = rank;
        rank_of[j][i] = rank;
    }

    // Triangles in filtration order (diameter = max edge rank, which also
    // resolves ties deterministically).
    let mut triangles: Vec<(usize, usize, usize, usize)> = Vec::new(); // (max_rank, i, j, k)
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let m = rank_of[i][j].max(rank_of[i][k]).max(rank_of[j][k]);
                triangles.push((m, i, j, k));
            }
        }
    }
    triangles.sort_by(|a, b| a.0.cmp(&b.0).then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3))));

    // Standard persistence reduction of triangle boundary columns.
    let words = (edges.len() + 63) / 64;
    let mut low_to_col: std::collections::HashMap<usize, Bits> = Default::default();
    for &(_, i, j, k) in &triangles {
        let mut col = Bits::new(words);
        col.set(rank_of[i][j]);
        col.set(rank_of[i][k]);
        col.set(rank_of[j][k]);
        loop {
            match col.low() {
                None => break, // cycle of earlier triangles; kills nothing
                Some(low) => match low_to_col.get(&low) {
                    Some(other) => col.xor(other),
                    None => {
                        let (blen, bi, bj) = edges[low];
                        // The triangle's diameter edge.
                        let dmax = rank_of[i][j].max(rank_of[i][k]).max(rank_of[j][k]);
                        let (dlen, di, dj) = edges[dmax];
                        debug_assert!(creator[low], "paired edge must be a creator");
                        if dlen > blen {
                            out.h1.push(Pair {
                                birth: blen,
                                death: dlen,
                                birth_edge: Some((bi, bj)),
                                death_edge: (di, dj),
                            });
                        }
                        low_to_col.insert(low, col);
                        break;
                    }
                },
            }
        }
    }
    out
}

/// Clamped lifetime `ℓ_r(b, d) = max(0, min(d, r) − min(b, r))`.
pub fn clamped_lifetime(b: f64, d: f64, r: f64) -> f64 {
    (d.min(r) - b.min(r)).max(0.0)
}

/// Clamped persistence loss
/// `Σ_radii [ Σ_{H1} ℓ_r² + a₀ Σ_{H0} ℓ_r² ]`
/// with subgradients to the point coordinates through the critical
/// edges.  The H0 essential class never appears (union-find only records
/// deaths), matching the exclusion of the component that survives.
pub fn ph_loss_grad<S: Scalar>(
    points: &[Vec<S>],
    radii: &[f64],
    a0: f64,
) -> (f64, Vec<Vec<S>>) {
    let dim = points.first().map_or(0, Vec::len);
    let mut grads = vec![vec![S::zero(); dim]; points.len()];
    if points.len() < 2 {
        return (0.0, grads);
    }
    let pairs = rips_pairs(points);
    let mut loss = 0.0;

    // d(edge length)/d(endpoint coordinates).
    let add_edge_grad = |edge: (usize, usize), scale: f64, grads: &mut Vec<Vec<S>>| {
        let (i, j) = edge;
        let len = dist(&points[i], &points[j]);
        if len <= 1e-12 {
            return; // coincident endpoints: subgradient 0
        }
        for c in 0..dim {
            let diff = (points[i][c] - points[j][c]).to_f64_lossy() / len;
            grads[i][c] = grads[i][c] + S::of_f64(scale * diff);
            grads[j][c] = grads[j][c] - S::of_f64(scale * diff);
        }
    };

    for &r in radii {
        for p in &pairs.h0 {
            let ell = clamped_lifetime(p.birth, p.death, r);
            loss += a0 * ell * ell;
            if ell > 0.0 && p.death < r {
                add_edge_grad(p.death_edge, a0 * 2.0 * ell, &mut grads);
            }
        }
        for p in &pairs.h1 {
            let ell = clamped_lifetime(p.birth, p.death, r);
            loss += ell * ell;
            if ell > 0.0 {
                if p.death < r {
                    add_edge_grad(p.death_edge, 2.0 * ell, &mut grads);
                }
                if p.birth < r {
                    if let Some(be) = p.birth_edge {
                        add_edge_grad(be, -2.0 * ell, &mut grads);
                    }
                }
            }
        }
    }
    (loss, grads)
}

/// Loss only.
pub fn ph_loss<S: Scalar>(points: &[Vec<S>], radii: &[f64], a0: f64) -> f64 {
    ph_loss_grad(points, radii, a0).0
}
