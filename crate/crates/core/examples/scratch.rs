use sigs_core::atoms::{
    gen_laplacian_eigenfunction, gen_motif, gen_time_factor, AtomLibrary, Bc, BoxDomain, Family,
    MotifKind, TimeFamily,
};
use sigs_core::grammar::Grammar;
use sigs_core::tgvae::{seq_exact_accuracy, train, TrainConfig};
use std::collections::BTreeMap;

fn library(grammar: &Grammar) -> AtomLibrary {
    let mut lib = AtomLibrary::new();
    let bx = BoxDomain { lengths: vec![1.397] };
    let mut kp = BTreeMap::new();
    kp.insert("kappa".to_string(), 0.697);
    for (k, amp) in [(1u32, 3.974), (2, 1.0), (3, -3.974), (5, 3.974)] {
        let (phi, mu) = gen_laplacian_eigenfunction(&bx, Bc::Dirichlet, &[k]).unwrap();
        let text = if amp == 1.0 { phi } else { format!("{amp}*{phi}") };
        assert!(lib.insert(grammar, &text, Family::LaplacianEigen, Vec::new()).unwrap());
        let tf = gen_time_factor(TimeFamily::Heat, mu, &kp).unwrap();
        assert!(lib.insert(grammar, &tf, Family::TimeFactor, Vec::new()).unwrap());
    }
    assert!(lib
        .insert(grammar, "0.86 + 0.6*tanh(25.8*t - 30*x + 9.9)", Family::Shock, Vec::new())
        .unwrap());
    let mut p = BTreeMap::new();
    p.insert("u_l".into(), 2.0);
    p.insert("u_r".into(), 0.0);
    p.insert("s".into(), 1.0);
    p.insert("x0".into(), 0.0);
    p.insert("nu".into(), 0.05);
    let (shock, _) = gen_motif(MotifKind::Shock, &p, true).unwrap();
    assert!(lib.insert(grammar, &shock, Family::Shock, Vec::new()).unwrap());
    for (k, omega, shape) in [(2.0, 3.0, 0.0), (1.0, 0.5, 1.0)] {
        let mut p = BTreeMap::new();
        p.insert("k".into(), k);
        p.insert("omega".into(), omega);
        p.insert("shape".into(), shape);
        let (tr, _) = gen_motif(MotifKind::Transport, &p, true).unwrap();
        assert!(lib.insert(grammar, &tr, Family::Transport, Vec::new()).unwrap());
    }
    for (amp, alpha, x0, y0) in [
        (0.01, 25.0, 0.3, 0.8),
        (0.012, 20.0, 0.7, 0.2),
        (0.005, 10.0, 0.5, 0.5),
    ] {
        let mut p = BTreeMap::new();
        p.insert("alpha".into(), alpha);
        p.insert("x0".into(), x0);
        p.insert("y0".into(), y0);
        let (bump, _) = gen_motif(MotifKind::GaussianBump, &p, true).unwrap();
        assert!(lib
            .insert(grammar, &format!("{amp}*{bump}"), Family::GaussianBump, Vec::new())
            .unwrap());
    }
    lib
}

fn train_model(grammar: &Grammar, lib: &AtomLibrary, topo: bool) -> sigs_core::tgvae::TrainResult {
    let dataset: Vec<_> = lib
        .entries()
        .iter()
        .flat_map(|e| std::iter::repeat(e.rules.clone()).take(5))
        .collect();
    let cfg = TrainConfig {
        hidden: 64,
        lr: 2e-3,
        batch: 10,
        epochs: 800,
        beta0: 0.005,
        warmup_steps: 200_000,
        early_stop_patience: 1_000_000,
        plateau_patience: 1_000_000,
        w_hull: if topo { 0.8 } else { 0.0 },
        w_ph: if topo { 0.8 } else { 0.0 },
        w_smooth: if topo { 1e-4 } else { 0.0 },
        ..TrainConfig::default()
    };
    train(grammar, &dataset, &cfg).unwrap()
}

fn cached_model(
    grammar: &Grammar,
    lib: &AtomLibrary,
    topo: bool,
) -> sigs_core::tgvae::ModelParams<f64> {
    let path = format!("/tmp/sigs_scratch_{}.json", if topo { "tgvae" } else { "gvae" });
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(ckpt) = sigs_core::tgvae::Checkpoint::from_json(&text, grammar) {
            println!("loaded cached {path}");
            return ckpt.params;
        }
    }
    let t0 = std::time::Instant::now();
    let r = train_model(grammar, lib, topo);
    let all: Vec<_> = lib.entries().iter().map(|e| e.rules.clone()).collect();
    let idx: Vec<usize> = (0..all.len()).collect();
    let acc = seq_exact_accuracy(grammar, &r.params, &all, &idx);
    println!("trained topo={topo}: acc {acc} in {:?}", t0.elapsed());
    for e in lib.entries() {
        let x = grammar.encode_onehot(&e.rules);
        let (mu, _) = sigs_core::tgvae::encode(&r.params, &x);
        let logits = sigs_core::tgvae::decode_logits(&r.params, &mu);
        let dec = grammar.masked_argmax_decode(&logits).unwrap();
        if dec != e.rules {
            println!("  MISS: {} -> {}", e.canonical, grammar.derive(&dec).unwrap());
        }
    }
    assert_eq!(acc, 1.0);
    let ckpt = sigs_core::tgvae::Checkpoint::new(grammar, r.params.clone());
    std::fs::write(&path, ckpt.to_json()).unwrap();
    r.params
}

fn main() {
    use sigs_core::residual::{builtin_problem, GridSpec};
    use sigs_core::search::{run_search, Ansatz, SearchConfig};

    let which = std::env::args().nth(1).unwrap_or_else(|| "all".to_string());
    let grammar = Grammar::reference();
    let lib = library(&grammar);
    let tg = cached_model(&grammar, &lib, true);

    if which == "all" || which == "pg2" {
        let ansatz = Ansatz::parse("sin(pi*x)*sin(pi*y)*(sum2(a*g(x,y)))").unwrap();
        let mut prob = builtin_problem("pg2").unwrap();
        prob.grid = GridSpec { nx: 40, ny: Some(40), nt: None };
        let config = SearchConfig {
            draws: 100,
            t_max: 5,
            starts: 2,
            refine_steps: 4000,
            lr0: 0.02,
            lr_end: 1e-6,
            eps_tol: 1e-9,
            seed: 0,
            ..SearchConfig::default()
        };
        let t0 = std::time::Instant::now();
        match run_search(&grammar, &tg, &ansatz, &lib, &prob, &config) {
            Ok(o) => {
                let full = builtin_problem("pg2").unwrap();
                let rg = sigs_core::residual::poisson_fd_reference(&full);
                let u = sigs_core::interp::interpret(&o.expr).unwrap();
                let rel = sigs_core::residual::relative_l2(
                    &u,
                    &sigs_core::residual::Reference::Grid(rg),
                    &[],
                )
                .unwrap();
                println!(
                    "pg2: residual {:e} relL2-vs-fd {rel} in {:?}\n  expr: {}",
                    o.residual,
                    t0.elapsed(),
                    o.expr
                );
            }
            Err(e) => println!("pg2 FAILED: {e}"),
        }
    }

    if which == "all" || which == "diffusion" {
        let ansatz = Ansatz::parse("sum4(a*T(t)*phi(x))").unwrap();
        let mut prob = builtin_problem("diffusion").unwrap();
        prob.grid = GridSpec { nx: 32, ny: None, nt: Some(16) };
        let config = SearchConfig {
            k_clusters: 4,
            draws: 6000,
            t_max: 10,
            starts: 1,
            eta: 0.0,
            refine_steps: 30_000,
            lr0: 0.02,
            lr_end: 1e-11,
            eps_tol: 2e-7,
            seed: 0,
            ..SearchConfig::default()
        };
        let t0 = std::time::Instant::now();
        match run_search(&grammar, &tg, &ansatz, &lib, &prob, &config) {
            Ok(o) => println!(
                "diffusion: residual {:e} relL2 {:?} in {:?}\n  expr: {}",
                o.residual,
                o.relative_l2,
                t0.elapsed(),
                o.expr
            ),
            Err(e) => println!("diffusion FAILED: {e}"),
        }
    }

    if which == "all" || which == "race" {
        let gv = cached_model(&grammar, &lib, false);
        let mut latents = Vec::new();
        for e in lib.entries() {
            let onehot = grammar.encode_onehot(&e.rules);
            let (mu, _) = sigs_core::tgvae::encode(&tg, &onehot);
            latents.push(mu);
        }
        let domain = builtin_problem("diffusion").unwrap().domain;
        let filter = sigs_core::search::MahalanobisFilter::new(&latents, 0.5).unwrap();
        for scale in [1.0f64, 2.0, 3.0, 4.0] {
            for seed in [8u64, 9, 10] {
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
                let mut pool =
                    sigs_core::search::sample_admissible_latents(2000, Some(&filter), &mut rng);
                for z in pool.iter_mut() {
                    for v in z.iter_mut() {
                        *v *= scale;
                    }
                }
                match sigs_core::search::race_to_k_valid(
                    &grammar, &tg, &gv, &pool, 10, 10, &domain,
                ) {
                    Ok(r) => println!(
                        "race scale {scale} seed {seed}: tgvae {} gvae {}",
                        r.mean_a(),
                        r.mean_b()
                    ),
                    Err(e) => println!("race scale {scale} seed {seed} FAILED: {e}"),
                }
            }
        }
    }
}
