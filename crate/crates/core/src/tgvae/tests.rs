use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grammar::Grammar;
use crate::REFERENCE_GRAMMAR;

use super::adam::{AdamW, EarlyStopping, PlateauScheduler};
use super::losses::*;
use super::model::*;
use super::ph::*;
use super::train::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn tiny_arch() -> Architecture {
    Architecture {
        c: 4,
        l: 3,
        hidden: 6,
        latent: 3,
    }
}

// ---------------------------------------------------------------------------
// KL
// ---------------------------------------------------------------------------

#[test]
fn kl_closed_form_basics() {
    assert_eq!(loss_kl::<f64>(&[0.0; 4], &[0.0; 4]), 0.0);
    assert!((loss_kl::<f64>(&[1.0], &[0.0]) - 0.5).abs() < 1e-15);
    // Positivity off the optimum.
    assert!(loss_kl::<f64>(&[0.1, -0.2], &[0.3, -0.4]) > 0.0);
}

#[test]
fn kl_matches_monte_carlo_estimate() {
    // KL(q‖p) = E_q[log q(z) − log p(z)] estimated from q-samples.
    let mu = [0.7, -0.3, 1.2];
    let lv = [0.4, -0.6, 0.1];
    let exact = loss_kl::<f64>(&mu, &lv);
    let mut r = rng(7);
    let n = 1_000_000usize;
    let mut acc = 0.0;
    for _ in 0..n {
        let mut lq = 0.0;
        let mut lp = 0.0;
        for d in 0..mu.len() {
            let sigma = (0.5 * lv[d]).exp();
            let e: f64 = StandardNormal.sample(&mut r);
            let z = mu[d] + sigma * e;
            lq += -0.5 * e * e - sigma.ln();
            lp += -0.5 * z * z;
        }
        acc += lq - lp;
    }
    let mc = acc / n as f64;
    assert!(
        (mc - exact).abs() < 0.01 * exact,
        "mc {mc} vs exact {exact}"
    );
}

#[test]
fn kl_gradient_matches_finite_differences() {
    let mu = vec![0.3, -0.8, 0.1];
    let lv = vec![-0.2, 0.5, 0.0];
    let (dmu, dlv) = loss_kl_grad(&mu, &lv);
    let h = 1e-6;
    for d in 0..3 {
        let mut mp = mu.clone();
        mp[d] += h;
        let mut mm = mu.clone();
        mm[d] -= h;
        let fd: f64 = (loss_kl(&mp, &lv) - loss_kl(&mm, &lv)) / (2.0 * h);
        assert!((fd - dmu[d]).abs() < 1e-8, "dmu[{d}]: {fd} vs {}", dmu[d]);
        let mut lp = lv.clone();
        lp[d] += h;
        let mut lm = lv.clone();
        lm[d] -= h;
        let fd: f64 = (loss_kl(&mu, &lp) - loss_kl(&mu, &lm)) / (2.0 * h);
        assert!((fd - dlv[d]).abs() < 1e-8, "dlv[{d}]: {fd} vs {}", dlv[d]);
    }
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

#[test]
fn recon_uniform_logits_give_log_c() {
    let g = Grammar::reference();
    let (c, l) = (g.rule_count(), g.max_len());
    let seq = g.parse("sin(x)").unwrap();
    let logits = vec![0.0f64; c * l];
    let loss = loss_recon(&logits, &seq, c, l);
    assert!((loss - (c as f64).ln()).abs() < 1e-12, "{loss}");
    assert!((loss - 53f64.ln()).abs() < 1e-12);
}

#[test]
fn recon_sharp_logits_at_targets_give_near_zero() {
    let g = Grammar::reference();
    let (c, l) = (g.rule_count(), g.max_len());
    let seq = g.parse("x^2+t").unwrap();
    let mut logits = vec![0.0f64; c * l];
    for (pos, &t) in seq.indices.iter().enumerate() {
        logits[t * l + pos] = 100.0;
    }
    assert!(loss_recon(&logits, &seq, c, l) < 1e-12);
}

#[test]
fn recon_gradient_matches_finite_differences() {
    let g = Grammar::reference();
    let (c, l) = (g.rule_count(), g.max_len());
    let seq = g.parse("cos(2*x)").unwrap();
    let mut r = rng(3);
    let mut logits: Vec<f64> = (0..c * l).map(|_| StandardNormal.sample(&mut r)).collect();
    let (_, grad) = loss_recon_grad(&logits, &seq, c, l);
    let h = 1e-6;
    for &i in &[0usize, 17, c * l / 2, c * l - 1] {
        let orig = logits[i];
        logits[i] = orig + h;
        let fp = loss_recon(&logits, &seq, c, l);
        logits[i] = orig - h;
        let fm = loss_recon(&logits, &seq, c, l);
        logits[i] = orig;
        let fd = (fp - fm) / (2.0 * h);
        assert!((fd - grad[i]).abs() < 1e-6, "logit {i}: {fd} vs {}", grad[i]);
    }
}

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

#[test]
fn beta_schedule_matches_reference_points() {
    assert_eq!(beta_schedule(0, 0.01, 7000), 0.01);
    assert_eq!(beta_schedule(7000, 0.01, 7000), 1.0);
    assert_eq!(beta_schedule(14000, 0.01, 7000), 1.0);
    assert!((beta_schedule(3500, 0.01, 7000) - 0.505).abs() < 1e-15);
}

#[test]
fn gamma_schedule_ramps_after_activation() {
    assert_eq!(gamma_schedule(3.0, None, 5.0), 0.0);
    assert_eq!(gamma_schedule(9.9, Some(10.0), 5.0), 0.0);
    assert_eq!(gamma_schedule(15.0, Some(10.0), 5.0), 1.0);
    assert_eq!(gamma_schedule(20.0, Some(10.0), 5.0), 1.0);
    assert!((gamma_schedule(12.5, Some(10.0), 5.0) - 0.5).abs() < 1e-15);
}

// ---------------------------------------------------------------------------
// Hull loss & reservoir
// ---------------------------------------------------------------------------

#[test]
fn hull_loss_zero_for_batch_inside_reservoir() {
    let mut res: Reservoir<f64> = Reservoir::new(0.0);
    let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
    res.update(&pts);
    let mut r = rng(1);
    let dirs: Vec<Vec<f64>> = sample_directions(16, 2, &mut r);
    let (loss, grads) = hull_loss_grad(&res, &pts, &dirs).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grads.iter().flatten().all(|&g| g == 0.0));
}

#[test]
fn hull_loss_one_dimensional_support_oracle() {
    let mut res: Reservoir<f64> = Reservoir::new(0.0);
    res.update(&[vec![-1.0], vec![1.0]]);
    let dirs = vec![vec![1.0], vec![-1.0]];
    let batch = vec![vec![2.0]];
    // Direction +1: excess 2−1=1 → 1²; direction −1: −2−1 < 0 → 0.
    // Mean over B·K = 2 terms: 0.5.
    let loss = hull_loss(&res, &batch, &dirs).unwrap();
    assert!((loss - 0.5).abs() < 1e-15, "{loss}");
}

#[test]
fn hull_loss_errors_on_empty_reservoir() {
    let res: Reservoir<f64> = Reservoir::new(0.5);
    let dirs = vec![vec![1.0]];
    assert!(matches!(
        hull_loss(&res, &[vec![0.0]], &dirs),
        Err(LossError::EmptyReservoir)
    ));
}

#[test]
fn hull_gradient_matches_finite_differences() {
    let mut res: Reservoir<f64> = Reservoir::new(0.0);
    let mut r = rng(11);
    let pts: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..3).map(|_| StandardNormal.sample(&mut r)).collect())
        .collect();
    res.update(&pts);
    let dirs: Vec<Vec<f64>> = sample_directions(32, 3, &mut r);
    let mut batch: Vec<Vec<f64>> = (0..4)
        .map(|_| {
            (0..3)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut r);
                    3.0 * e
                })
                .collect()
        })
        .collect();
    let (_, grads) = hull_loss_grad(&res, &batch, &dirs).unwrap();
    let h = 1e-6;
    for i in 0..batch.len() {
        for d in 0..3 {
            let orig = batch[i][d];
            batch[i][d] = orig + h;
            let fp = hull_loss(&res, &batch, &dirs).unwrap();
            batch[i][d] = orig - h;
            let fm = hull_loss(&res, &batch, &dirs).unwrap();
            batch[i][d] = orig;
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (fd - grads[i][d]).abs() < 1e-4,
                "z[{i}][{d}]: {fd} vs {}",
                grads[i][d]
            );
        }
    }
}

#[test]
fn hull_gradient_points_inward_for_outside_point() {
    let mut res: Reservoir<f64> = Reservoir::new(0.0);
    res.update(&[vec![0.0, 0.0]]);
    let dirs = vec![vec![1.0, 0.0]];
    let batch = vec![vec![2.0, 0.0]];
    let (_, grads) = hull_loss_grad(&res, &batch, &dirs).unwrap();
    // Descent along −grad moves the point back toward the hull.
    assert!(grads[0][0] > 0.0);
}

#[test]
fn reservoir_delta_zero_inserts_all_distinct_and_infinite_inserts_none() {
    let mut res: Reservoir<f64> = Reservoir::new(0.0);
    let pts = vec![vec![0.0], vec![0.1], vec![0.2]];
    assert_eq!(res.update(&pts), 3);

    let mut res: Reservoir<f64> = Reservoir::new(f64::INFINITY);
    assert_eq!(res.update(&[vec![0.0]]), 1);
    assert_eq!(res.update(&[vec![100.0], vec![-100.0]]), 0);
    assert_eq!(res.points.len(), 1);
}

#[test]
fn reservoir_pairwise_distance_invariant_under_random_updates() {
    let delta = 0.3;
    let mut res: Reservoir<f64> = Reservoir::new(delta);
    let mut r = rng(5);
    for _ in 0..200 {
        let batch: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..2).map(|_| StandardNormal.sample(&mut r)).collect())
            .collect();
        res.update(&batch);
    }
    for i in 0..res.points.len() {
        for j in (i + 1)..res.points.len() {
            let d: f64 = res.points[i]
                .iter()
                .zip(&res.points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(d >= delta, "pair ({i},{j}) at distance {d} < {delta}");
        }
    }
}

// ---------------------------------------------------------------------------
// Persistent homology
// ---------------------------------------------------------------------------

#[test]
fn ph_two_points_is_weighted_squared_distance() {
    let d = 0.37;
    let pts = vec![vec![0.0, 0.0], vec![d, 0.0]];
    let a0 = 1.7;
    let r = 10.0;
    let loss = ph_loss(&pts, &[r], a0);
    assert!((loss - a0 * d * d).abs() < 1e-14, "{loss}");
    let pairs = rips_pairs(&pts);
    assert_eq!(pairs.h0.len(), 1);
    assert!(pairs.h1.is_empty());
}

#[test]
fn ph_coincident_points_give_zero() {
    let pts = vec![vec![1.0, 2.0]; 5];
    assert_eq!(ph_loss(&pts, &[0.1, 0.5], 1.0), 0.0);
}

#[test]
fn ph_fewer_than_two_points_give_zero() {
    assert_eq!(ph_loss::<f64>(&[], &[0.5], 1.0), 0.0);
    assert_eq!(ph_loss(&[vec![3.0]], &[0.5], 1.0), 0.0);
}

#[test]
fn ph_unit_square_has_one_loop_with_expected_lifetime() {
    let s = 0.8;
    let pts = vec![
        vec![0.0, 0.0],
        vec![s, 0.0],
        vec![s, s],
        vec![0.0, s],
    ];
    let pairs = rips_pairs(&pts);
    // MST of the square: 3 edges of length s.
    assert_eq!(pairs.h0.len(), 3);
    for p in &pairs.h0 {
        assert!((p.death - s).abs() < 1e-12);
    }
    // One loop born at the last side s, dying at the diagonal s√2.
    assert_eq!(pairs.h1.len(), 1);
    assert!((pairs.h1[0].birth - s).abs() < 1e-12);
    assert!((pairs.h1[0].death - s * 2f64.sqrt()).abs() < 1e-12);
    let r = 10.0;
    let a0 = 1.0;
    let expect = 3.0 * s * s + (s * 2f64.sqrt() - s).powi(2);
    let loss = ph_loss(&pts, &[r], a0);
    assert!((loss - expect).abs() < 1e-12, "{loss} vs {expect}");
}

/// Independent Kruskal MST oracle for the H0 term.
fn mst_edge_lengths(pts: &[Vec<f64>]) -> Vec<f64> {
    let n = pts.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = pts[i]
                .iter()
                .zip(&pts[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            edges.push((d, i, j));
        }
    }
    edges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut out = Vec::new();
    for (d, i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            out.push(d);
        }
    }
    out
}

#[test]
fn ph_h0_matches_mst_oracle_on_random_clouds() {
    let mut r = rng(23);
    for trial in 0..10 {
        let n = 5 + trial;
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| StandardNormal.sample(&mut r)).collect())
            .collect();
        let pairs = rips_pairs(&pts);
        let mut deaths: Vec<f64> = pairs.h0.iter().map(|p| p.death).collect();
        deaths.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut mst = mst_edge_lengths(&pts);
        mst.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(deaths.len(), mst.len());
        for (a, b) in deaths.iter().zip(&mst) {
            assert!((a - b).abs() < 1e-12, "trial {trial}: {a} vs {b}");
        }
        // Clamped H0 sums agree too.
        for clamp in [0.5, 2.0] {
            let h0: f64 = pairs
                .h0
                .iter()
                .map(|p| clamped_lifetime(0.0, p.death, clamp).powi(2))
                .sum();
            let oracle: f64 = mst
                .iter()
                .map(|&d| clamped_lifetime(0.0, d, clamp).powi(2))
                .sum();
            assert!((h0 - oracle).abs() < 1e-12);
        }
    }
}

/// Brute-force check that H1 pair count and lifetimes are stable for a
/// regular hexagon: one loop born at the side length, dying when
/// triangles fill it at the short-diagonal scale.
#[test]
fn ph_hexagon_loop() {
    let n = 6;
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            vec![a.cos(), a.sin()]
        })
        .collect();
    let pairs = rips_pairs(&pts);
    assert_eq!(pairs.h0.len(), 5);
    assert_eq!(pairs.h1.len(), 1);
    // Unit circumradius hexagon: side 1, first triangles appear at √3.
    assert!((pairs.h1[0].birth - 1.0).abs() < 1e-12);
    assert!((pairs.h1[0].death - 3f64.sqrt()).abs() < 1e-12);
}

#[test]
fn ph_clamping_caps_both_ends() {
    // Pair (b, d) = (1, √3); clamp at r between b and d.
    assert!((clamped_lifetime(1.0, 3f64.sqrt(), 1.2) - 0.2).abs() < 1e-15);
    assert_eq!(clamped_lifetime(1.0, 3f64.sqrt(), 0.5), 0.0);
    let big = clamped_lifetime(1.0, 3f64.sqrt(), 10.0);
    assert!((big - (3f64.sqrt() - 1.0)).abs() < 1e-15);
}

#[test]
fn ph_gradient_matches_finite_differences() {
    let mut r = rng(31);
    let mut pts: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..2).map(|_| StandardNormal.sample(&mut r)).collect())
        .collect();
    let radii = [0.8, 2.5];
    let a0 = 1.3;
    let (_, grads) = ph_loss_grad(&pts, &radii, a0);
    let h = 1e-7;
    for i in 0..pts.len() {
        for d in 0..2 {
            let orig = pts[i][d];
            pts[i][d] = orig + h;
            let fp = ph_loss(&pts, &radii, a0);
            pts[i][d] = orig - h;
            let fm = ph_loss(&pts, &radii, a0);
            pts[i][d] = orig;
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (fd - grads[i][d]).abs() < 1e-4 * (1.0 + fd.abs()),
                "pt[{i}][{d}]: {fd} vs {}",
                grads[i][d]
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Smoothness
// ---------------------------------------------------------------------------

#[test]
fn smoothness_zero_for_constant_decoder() {
    let mut r = rng(41);
    let mut params: ModelParams<f64> = ModelParams::init(tiny_arch(), &mut r);
    // Zero first decoder layer: h is constant in z, so the decoder is
    // constant and its Hessian vanishes.
    for w in params.dec_w1.data.iter_mut() {
        *w = 0.0;
    }
    let zs = vec![vec![0.3, -0.5, 0.9], vec![-1.0, 0.2, 0.0]];
    let probes = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.5]];
    let v = smoothness_loss(&params, &zs, &probes, 1e-3, None);
    assert!(v.abs() < 1e-20, "{v}");
}

#[test]
fn smoothness_matches_numeric_hessian_oracle() {
    let mut r = rng(43);
    let params: ModelParams<f64> = ModelParams::init(tiny_arch(), &mut r);
    let f = |z: &[f64]| -> f64 {
        let logits = decode_logits(&params, z);
        logits.iter().sum::<f64>() / logits.len() as f64
    };
    let z0 = vec![0.2, -0.4, 0.7];
    let dim = 3;
    // Full numeric Hessian by nested central differences.
    let h = 1e-4;
    let mut hess = vec![vec![0.0f64; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            let at = |si: f64, sj: f64| {
                let mut z = z0.clone();
                z[i] += si * h;
                z[j] += sj * h;
                f(&z)
            };
            hess[i][j] =
                (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
        }
    }
    let probes = vec![vec![0.5, -1.0, 0.25], vec![1.0, 1.0, -1.0]];
    let mut expect = 0.0;
    for v in &probes {
        let hv: Vec<f64> = (0..dim)
            .map(|i| (0..dim).map(|j| hess[i][j] * v[j]).sum())
            .collect();
        expect += hv.iter().map(|x| x * x).sum::<f64>();
    }
    expect /= probes.len() as f64;
    let got = smoothness_loss(&params, std::slice::from_ref(&z0), &probes, 1e-3, None);
    assert!(
        (got - expect).abs() < 1e-4 * (1.0 + expect),
        "{got} vs {expect}"
    );
}

#[test]
fn smoothness_parameter_gradient_matches_finite_differences() {
    let mut r = rng(47);
    let params: ModelParams<f64> = ModelParams::init(tiny_arch(), &mut r);
    let zs = vec![vec![0.3, -0.2, 0.5]];
    let probes = vec![vec![1.0, -0.5, 0.25]];
    let h_fd = 1e-6;
    let mut grads = params.zeros_like();
    let base_eval = |p: &ModelParams<f64>| smoothness_loss(p, &zs, &probes, 1e-3, None);
    let _ = smoothness_loss(&params, &zs, &probes, 1e-3, Some(&mut grads));
    // Spot-check entries across the decoder tensors.
    let checks: Vec<(&str, usize)> = vec![
        ("dec_w1", 0),
        ("dec_w1", 7),
        ("dec_b1", 2),
        ("dec_w2", 5),
        ("dec_w2", 30),
    ];
    for (tensor, idx) in checks {
        let mut pp = params.clone();
        let mut pm = params.clone();
        let (gp, gm, ga): (&mut f64, &mut f64, f64) = match tensor {
            "dec_w1" => (
                &mut pp.dec_w1.data[idx],
                &mut pm.dec_w1.data[idx],
                grads.dec_w1.data[idx],
            ),
            "dec_b1" => (&mut pp.dec_b1[idx], &mut pm.dec_b1[idx], grads.dec_b1[idx]),
            "dec_w2" => (
                &mut pp.dec_w2.data[idx],
                &mut pm.dec_w2.data[idx],
                grads.dec_w2.data[idx],
            ),
            _ => unreachable!(),
        };
        *gp += h_fd;
        *gm -= h_fd;
        let fd = (base_eval(&pp) - base_eval(&pm)) / (2.0 * h_fd);
        assert!(
            (fd - ga).abs() < 1e-5 * (1.0 + fd.abs()),
            "{tensor}[{idx}]: {fd} vs {ga}"
        );
    }
}

#[test]
fn smoothness_stable_across_probe_counts() {
    let mut r = rng(53);
    let params: ModelParams<f64> = ModelParams::init(tiny_arch(), &mut r);
    let zs = vec![vec![0.1, 0.2, -0.3]];
    let one: Vec<Vec<f64>> = (0..1)
        .map(|_| (0..3).map(|_| StandardNormal.sample(&mut r)).collect())
        .collect();
    let many: Vec<Vec<f64>> = (0..64)
        .map(|_| (0..3).map(|_| StandardNormal.sample(&mut r)).collect())
        .collect();
    let a = smoothness_loss(&params, &zs, &one, 1e-3, None);
    let b = smoothness_loss(&params, &zs, &many, 1e-3, None);
    // Same order of magnitude; both strictly positive for a tanh decoder.
    assert!(a > 0.0 && b > 0.0);
    assert!(a / b < 50.0 && b / a < 50.0, "{a} vs {b}");
}

// ---------------------------------------------------------------------------
// Model forward/backward
// ---------------------------------------------------------------------------

#[test]
fn zero_params_encode_to_origin_and_decode_deterministically() {
    let g = Grammar::reference();
    let arch = Architecture {
        c: g.rule_count(),
        l: g.max_len(),
        hidden: 8,
        latent: 4,
    };
    let mut r = rng(61);
    let params: ModelParams<f64> = ModelParams::init(arch, &mut r).zeros_like();
    let x = g.encode_onehot(&g.parse("x+t").unwrap());
    let (mu, lv) = encode(&params, &x);
    assert!(mu.iter().all(|&v| v == 0.0));
    assert!(lv.iter().all(|&v| v == 0.0));
    // Zero logits decode under the mask to the deterministic lowest-index
    // derivation, which is a valid sequence.
    let logits = decode_logits(&params, &[0.0; 4]);
    let seq = g.masked_argmax_decode(&logits).unwrap();
    assert!(g.derive(&seq).is_ok());
    let again = g.masked_argmax_decode(&logits).unwrap();
    assert_eq!(seq, again);
}

#[test]
fn reparameterize_collapses_to_mean_at_tiny_variance() {
    let mu = vec![0.4, -0.9];
    let lv: Vec<f64> = vec![-100.0, -100.0];
    let mut r = rng(67);
    let (z, _) = reparameterize(&mu, &lv, &mut r);
    for (a, b) in z.iter().zip(&mu) {
        assert!((a - b).abs() < 1e-18);
    }
    // Seeded reproducibility.
    let (z1, e1) = reparameterize(&mu, &vec![0.2, 0.2], &mut rng(99));
    let (z2, e2) = reparameterize(&mu, &vec![0.2, 0.2], &mut rng(99));
    assert_eq!(z1, z2);
    assert_eq!(e1, e2);
}

#[test]
fn reparameterize_sample_variance_matches_logvar() {
    let mu = vec![1.0];
    let lv = vec![0.6];
    let mut r = rng(71);
    let n = 100_000;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n {
        let (z, _) = reparameterize(&mu, &lv, &mut r);
        sum += z[0];
        sumsq += z[0] * z[0];
    }
    let mean = sum / n as f64;
    let var = sumsq / n as f64 - mean * mean;
    let expect = lv[0].exp();
    assert!((mean - 1.0).abs() < 0.02);
    assert!((var - expect).abs() < 0.05 * expect, "{var} vs {expect}");
}

/// End-to-end backprop check: the full per-item objective
/// CE(decode(μ + σ⊙ε)) + β·KL with frozen ε, differentiated against
/// every tensor by central differences.
#[test]
fn backward_pass_matches_finite_differences() {
    let g = Grammar::load_with_max_len(REFERENCE_GRAMMAR, 16).unwrap();
    let arch = Architecture {
        c: g.rule_count(),
        l: g.max_len(),
        hidden: 5,
        latent: 3,
    };
    let mut r = rng(73);
    let params: ModelParams<f64> = ModelParams::init(arch, &mut r);
    let seq = g.parse("sin(x)*t").unwrap();
    let x = flatten_onehot::<f64>(&g.encode_onehot(&seq));
    let eps = vec![0.3, -0.7, 1.1];
    let beta = 0.37;
    let (c, l) = (arch.c, arch.l);

    let objective = |p: &ModelParams<f64>| -> f64 {
        let ec = encode_cached(p, x.clone());
        let kl = loss_kl(&ec.mu, &ec.lv);
        let z: Vec<f64> = ec
            .mu
            .iter()
            .zip(&ec.lv)
            .zip(&eps)
            .map(|((&m, &v), &e)| m + (0.5 * v).exp() * e)
            .collect();
        let dc = decode_cached(p, z);
        loss_recon(&dc.logits, &seq, c, l) + beta * kl
    };

    // Analytic gradients via the backward helpers.
    let mut grads = params.zeros_like();
    let ec = encode_cached(&params, x.clone());
    let z: Vec<f64> = ec
        .mu
        .iter()
        .zip(&ec.lv)
        .zip(&eps)
        .map(|((&m, &v), &e)| m + (0.5 * v).exp() * e)
        .collect();
    let dc = decode_cached(&params, z);
    let (_, dlogits) = loss_recon_grad(&dc.logits, &seq, c, l);
    let dz = decoder_backward(&params, &mut grads, &dc, &dlogits);
    let (kl_dmu, kl_dlv) = loss_kl_grad(&ec.mu, &ec.lv);
    let dmu: Vec<f64> = dz.iter().zip(&kl_dmu).map(|(&d, &k)| d + beta * k).collect();
    let dlv: Vec<f64> = dz
        .iter()
        .zip(&ec.lv)
        .zip(&eps)
        .zip(&kl_dlv)
        .map(|(((&d, &v), &e), &k)| d * 0.5 * (0.5 * v).exp() * e + beta * k)
        .collect();
    encoder_backward(&params, &mut grads, &ec, &dmu, &dlv);

    let h = 1e-6;
    let flat_g = grads.tensors();
    let names = [
        "enc_w1", "enc_b1", "enc_mu", "enc_lv", "dec_w1", "dec_b1", "dec_w2", "dec_b2",
    ];
    for (t, (gslice, _)) in flat_g.iter().enumerate() {
        // A few entries per tensor.
        let len = gslice.len();
        for &idx in &[0, len / 3, (2 * len) / 3, len - 1] {
            let mut pp = params.clone();
            let mut pm = params.clone();
            pp.tensors_mut()[t].0[idx] += h;
            pm.tensors_mut()[t].0[idx] -= h;
            let fd = (objective(&pp) - objective(&pm)) / (2.0 * h);
            let an = gslice[idx];
            assert!(
                (fd - an).abs() < 1e-5 * (1.0 + fd.abs()),
                "{}[{idx}]: fd {fd} vs analytic {an}",
                names[t]
            );
        }
    }
}

use super::model::{decode_cached, decoder_backward, encode_cached, encoder_backward};

// ---------------------------------------------------------------------------
// Optimizer & schedulers
// ---------------------------------------------------------------------------

#[test]
fn adamw_minimizes_a_quadratic() {
    // Put a quadratic on a 1-parameter "model" by driving a single weight.
    let arch = Architecture {
        c: 1,
        l: 1,
        hidden: 1,
        latent: 1,
    };
    let mut r = rng(79);
    let mut params: ModelParams<f64> = ModelParams::init(arch, &mut r);
    params.enc_w1.data[0] = 5.0;
    let mut opt = AdamW::new(&params, 0.05, 0.0);
    for _ in 0..2000 {
        let mut grads = params.zeros_like();
        grads.enc_w1.data[0] = 2.0 * (params.enc_w1.data[0] - 1.5);
        opt.step(&mut params, &grads);
    }
    assert!((params.enc_w1.data[0] - 1.5).abs() < 1e-3);
}

#[test]
fn adamw_weight_decay_shrinks_weights_not_biases() {
    let arch = Architecture {
        c: 2,
        l: 2,
        hidden: 2,
        latent: 2,
    };
    let mut r = rng(83);
    let mut params: ModelParams<f64> = ModelParams::init(arch, &mut r);
    params.enc_w1.data[0] = 1.0;
    params.enc_b1[0] = 1.0;
    let mut opt = AdamW::new(&params, 1e-2, 0.1);
    let grads = params.zeros_like();
    opt.step(&mut params, &grads);
    assert!(params.enc_w1.data[0] < 1.0, "weights decay");
    assert_eq!(params.enc_b1[0], 1.0, "biases do not");
}

#[test]
fn plateau_scheduler_reduces_after_patience_and_resets() {
    let mut s = PlateauScheduler::new(0.2, 2, 1e-9);
    let mut lr = 1.0;
    lr = s.observe(1.0, lr); // baseline
    lr = s.observe(1.0, lr); // stale 1
    lr = s.observe(1.0, lr); // stale 2
    assert_eq!(lr, 1.0);
    lr = s.observe(1.0, lr); // stale 3 > patience → reduce
    assert!((lr - 0.2).abs() < 1e-15);
    // Improvement resets staleness.
    lr = s.observe(0.5, lr);
    assert!((lr - 0.2).abs() < 1e-15);
    // Baseline reset: a worse value becomes the new best.
    s.reset_baseline();
    lr = s.observe(10.0, lr);
    assert!((lr - 0.2).abs() < 1e-15);
}

#[test]
fn early_stopping_triggers_after_patience() {
    let mut e = EarlyStopping::new(3);
    assert!(!e.observe(1.0));
    assert!(!e.observe(0.9));
    assert!(!e.observe(0.95));
    assert!(!e.observe(0.95));
    assert!(e.observe(0.95));
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[test]
fn split_is_deterministic_and_disjoint() {
    let (tr, va, te) = split_dataset(200, 42);
    assert_eq!(tr.len(), 140);
    assert_eq!(va.len(), 40);
    assert_eq!(te.len(), 20);
    let mut all: Vec<usize> = tr.iter().chain(&va).chain(&te).cloned().collect();
    all.sort_unstable();
    assert_eq!(all, (0..200).collect::<Vec<_>>());
    let (tr2, va2, te2) = split_dataset(200, 42);
    assert_eq!((tr, va, te), (tr2, va2, te2));
}

/// A small corpus of structured expressions the desk-scale model can
/// actually learn: a few templates with varying digits.
fn toy_corpus(g: &Grammar) -> Vec<crate::grammar::RuleSequence> {
    let mut texts = Vec::new();
    for a in 1..=9 {
        for b in 0..=9 {
            texts.push(format!("sin({a}.{b}*x)"));
            texts.push(format!("exp(-{a}.{b}*t)"));
        }
    }
    for a in 1..=9 {
        texts.push(format!("{a}*x^2"));
        texts.push(format!("cos({a}*t)"));
    }
    texts.truncate(198);
    texts.push("tanh(x)".to_string());
    texts.push("sqrt(t)".to_string());
    texts
        .iter()
        .map(|t| g.parse(t).unwrap_or_else(|e| panic!("{t}: {e}")))
        .collect()
}

#[test]
fn training_on_toy_corpus_reaches_high_accuracy() {
    let g = Grammar::load_with_max_len(REFERENCE_GRAMMAR, 24).unwrap();
    let dataset = toy_corpus(&g);
    assert_eq!(dataset.len(), 200);
    let cfg = TrainConfig {
        hidden: 128,
        latent: 16,
        batch: 16,
        epochs: 200,
        lr: 2e-3,
        beta0: 0.005,
        warmup_steps: 200_000,
        hull_directions: 64,
        smooth_probes: 2,
        early_stop_patience: 60,
        plateau_patience: 25,
        seed: 7,
        ..TrainConfig::default()
    };
    let result = train(&g, &dataset, &cfg).expect("training runs");
    assert!(
        result.final_val_acc >= 0.8,
        "val accuracy {} after {} epochs",
        result.final_val_acc,
        result.epochs_run
    );
    // Logged β values match the schedule exactly.
    for row in &result.log {
        assert_eq!(row.beta, beta_schedule(row.step, cfg.beta0, cfg.warmup_steps));
    }
    // Smoothed reconstruction loss decreases over the first epoch.
    let steps_per_epoch = result.train_idx.len().div_ceil(cfg.batch);
    let first: Vec<f64> = result.log[..steps_per_epoch].iter().map(|r| r.ce).collect();
    let head: f64 = first[..3].iter().sum::<f64>() / 3.0;
    let tail: f64 = first[first.len() - 3..].iter().sum::<f64>() / 3.0;
    assert!(tail < head, "first-epoch CE: {head} → {tail}");
    // CSV serialization includes every step.
    let csv = log_to_csv(&result.log);
    assert_eq!(csv.lines().count(), result.log.len() + 1);
    assert!(csv.starts_with("step,ce,kl,beta,gamma,hull,ph,smooth,val_acc"));
}

#[test]
fn training_rejects_tiny_datasets() {
    let g = Grammar::load_with_max_len(REFERENCE_GRAMMAR, 16).unwrap();
    let dataset = vec![g.parse("x").unwrap(); 4];
    assert!(matches!(
        train(&g, &dataset, &TrainConfig::default()),
        Err(TrainError::DatasetTooSmall(4))
    ));
}

#[test]
fn checkpoint_round_trips_and_refuses_grammar_mismatch() {
    let g = Grammar::reference();
    let arch = Architecture {
        c: g.rule_count(),
        l: g.max_len(),
        hidden: 4,
        latent: 2,
    };
    let mut r = rng(89);
    let params: ModelParams<f64> = ModelParams::init(arch, &mut r);
    let ckpt = Checkpoint::new(&g, params.clone());
    let json = ckpt.to_json();
    let back = Checkpoint::from_json(&json, &g).unwrap();
    assert_eq!(back.params, params);
    // Tamper with the recorded hash: load must refuse.
    let bad = json.replacen(&g.hash(), "0000deadbeef", 1);
    assert!(matches!(
        Checkpoint::from_json(&bad, &g),
        Err(TrainError::GrammarMismatch { .. })
    ));
}
