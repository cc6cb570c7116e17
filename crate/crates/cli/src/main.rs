//! `sigs` — command-line harness: build atom libraries, train the
//! autoencoder, run solution discovery, evaluate expressions, and execute
//! the two sampling ablations.  Every command emits machine-readable JSON
//! reports (written atomically) carrying a SHA-256 hash of the effective
//! configuration; failures exit nonzero with a structured JSON error on
//! stderr.

mod report;

use clap::{Parser, Subcommand};
use report::{canonical_json_hash, write_atomic, CliError};
use sigs_core::atoms::{build_library, AtomLibrary, LibraryConfig, ProblemClass};
use sigs_core::grammar::Grammar;
use sigs_core::interp::{canonicalize, interpret, print};
use sigs_core::residual::{
    builtin_problem, builtin_problems, load_problem_spec, poisson_fd_reference, relative_l2,
    PDEProblem, Reference, ReferenceGrid,
};
use sigs_core::search::{
    ansatz_admissibility, atoms_vs_primitives_ablation, race_to_k_valid,
    sample_admissible_latents, run_search, Ansatz, MahalanobisFilter, SearchConfig,
};
use sigs_core::tgvae::{encode, log_to_csv, train, Checkpoint, TrainConfig};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "sigs", version, about = "Grammar-guided discovery of closed-form PDE solutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Default)]
struct CommonArgs {
    /// Built-in problem name (burgers, diffusion, damping_wave, pg1..pg5).
    #[arg(long)]
    problem: Option<String>,
    /// JSON problem specification file (overrides --problem).
    #[arg(long)]
    problem_spec: Option<PathBuf>,
    /// Ansatz template, e.g. "sum4(a*T(t)*phi(x))".
    #[arg(long)]
    ansatz: Option<String>,
    /// Atom library TSV.
    #[arg(long)]
    library: Option<PathBuf>,
    /// Model checkpoint JSON.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// RNG seed (overrides the config's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// JSON configuration file for the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reference grid CSV ("x,y,value" or "x,t,value") for relative L2.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Worker count hint (default: SIGS_WORKERS or 1).  Results are
    /// reduced in deterministic candidate order regardless of the value.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an atom library from a family configuration.
    BuildLibrary {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the autoencoder on a library and write a checkpoint.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the full discovery pipeline on one problem.
    Search {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score the known exact solutions of every built-in problem.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Race two checkpoints to k valid decodes on shared latent sets.
    Race {
        #[command(flatten)]
        common: CommonArgs,
        /// Baseline checkpoint raced against --checkpoint.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Compare uniform grammar sampling against ansatz-constrained atoms.
    AblateAtoms {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate one expression against a problem.
    EvalExpr {
        #[command(flatten)]
        common: CommonArgs,
        /// Expression text, e.g. "sin(pi*x)*exp(-t)".
        #[arg(long)]
        expr: String,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BuildLibrary { common } => cmd_build_library(&common),
        Command::Train { common } => cmd_train(&common),
        Command::Search { common } => cmd_search(&common),
        Command::Bench { common } => cmd_bench(&common),
        Command::Race { common, baseline } => cmd_race(&common, baseline.as_deref()),
        Command::AblateAtoms { common } => cmd_ablate(&common),
        Command::EvalExpr { common, expr } => cmd_eval_expr(&common, &expr),
    }
}

fn out_dir(common: &CommonArgs) -> Result<PathBuf, CliError> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn workers(common: &CommonArgs) -> usize {
    common
        .workers
        .or_else(|| {
            std::env::var("SIGS_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(1)
        .max(1)
}

fn load_config<T: serde::de::DeserializeOwned + Default>(
    path: Option<&Path>,
) -> Result<(T, serde_json::Value), CliError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            Ok((serde_json::from_value(value.clone())?, value))
        }
        None => Ok((T::default(), serde_json::json!({}))),
    }
}

fn load_problem(common: &CommonArgs) -> Result<PDEProblem, CliError> {
    if let Some(spec) = &common.problem_spec {
        return Ok(load_problem_spec(spec)?);
    }
    let name = common
        .problem
        .as_deref()
        .ok_or_else(|| CliError::usage("--problem or --problem-spec is required"))?;
    builtin_problem(name)
        .ok_or_else(|| CliError::usage(&format!("unknown built-in problem `{name}`")))
}

fn load_library(grammar: &Grammar, common: &CommonArgs) -> Result<AtomLibrary, CliError> {
    let path = common
        .library
        .as_deref()
        .ok_or_else(|| CliError::usage("--library is required"))?;
    let text = std::fs::read_to_string(path)?;
    Ok(AtomLibrary::from_tsv(grammar, &text)?)
}

fn load_checkpoint(grammar: &Grammar, path: &Path) -> Result<Checkpoint, CliError> {
    let text = std::fs::read_to_string(path)?;
    Ok(Checkpoint::from_json(&text, grammar)?)
}

fn load_reference(common: &CommonArgs) -> Result<Option<Reference>, CliError> {
    match &common.reference {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let grid = ReferenceGrid::from_csv(&text, &p.display().to_string())?;
            Ok(Some(Reference::Grid(grid)))
        }
        None => Ok(None),
    }
}

fn problem_class(p: &PDEProblem) -> ProblemClass {
    match (p.domain.y.is_some(), p.domain.t.is_some()) {
        (true, true) => ProblemClass::Spatiotemporal2d,
        (true, false) => ProblemClass::Spatial,
        (false, true) => ProblemClass::Spatiotemporal1d,
        (false, false) => ProblemClass::Ode,
    }
}

fn all_points(p: &PDEProblem) -> Vec<(f64, f64, f64)> {
    p.spatial_points()
        .iter()
        .flat_map(|&(x, y)| p.t_points().into_iter().map(move |t| (x, y, t)))
        .collect()
}

/// Relative L2 of `expr` against the supplied reference grid, or the
/// problem's analytical solution when none is given.
fn measure_relative_l2(
    expr: &str,
    problem: &PDEProblem,
    reference: Option<&Reference>,
) -> Result<Option<f64>, CliError> {
    let tree = interpret(expr)?;
    if let Some(r) = reference {
        return Ok(Some(relative_l2(&tree, r, &all_points(problem))?));
    }
    match &problem.analytical {
        Some(exact) => Ok(Some(relative_l2(
            &tree,
            &Reference::Analytic(exact.clone()),
            &all_points(problem),
        )?)),
        None => Ok(None),
    }
}

/// Sampled field on the problem's reporting grid: 400x400 for steady 2D
/// fields, the discretization grid for 1+1D problems.
fn emit_grid(expr: &str, problem: &PDEProblem) -> Result<String, CliError> {
    let tree = interpret(expr)?;
    let mut coords = Vec::new();
    let mut values = Vec::new();
    let second_axis;
    if let Some((y0, y1)) = problem.domain.y {
        second_axis = "y";
        let (x0, x1) = problem.domain.x;
        let n = 400usize;
        for i in 0..n {
            let x = x0 + (x1 - x0) * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let y = y0 + (y1 - y0) * j as f64 / (n - 1) as f64;
                let (v, _) = sigs_core::interp::eval_point(&tree, x, y, 0.0);
                coords.push((x, y));
                values.push(v);
            }
        }
    } else {
        second_axis = "t";
        for &(x, _) in &problem.spatial_points() {
            for t in problem.t_points() {
                let (v, _) = sigs_core::interp::eval_point(&tree, x, 0.0, t);
                coords.push((x, t));
                values.push(v);
            }
        }
    }
    let grid = ReferenceGrid {
        coords,
        values,
        second_axis: second_axis.to_string(),
        provenance: "sigs emit_grid".to_string(),
    };
    Ok(grid.to_csv())
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_build_library(common: &CommonArgs) -> Result<(), CliError> {
    let t0 = Instant::now();
    let dir = out_dir(common)?;
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| CliError::usage("build-library requires --config"))?;
    let text = std::fs::read_to_string(path)?;
    let cfg_value: serde_json::Value = serde_json::from_str(&text)?;
    let mut cfg: LibraryConfig = serde_json::from_value(cfg_value.clone())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let library = build_library(&cfg)?;
    write_atomic(&dir.join("library.tsv"), &library.to_tsv())?;
    let report = serde_json::json!({
        "command": "build-library",
        "entries": library.len(),
        "seed": cfg.seed,
        "config_hash": canonical_json_hash(&cfg_value),
        "wall_clock_seconds": t0.elapsed().as_secs_f64(),
    });
    write_atomic(
        &dir.join("build_library_report.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(())
}

fn cmd_train(common: &CommonArgs) -> Result<(), CliError> {
    let t0 = Instant::now();
    let dir = out_dir(common)?;
    let grammar = Grammar::reference();
    let library = load_library(&grammar, common)?;
    let (mut cfg, cfg_value): (TrainConfig, _) = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let dataset: Vec<_> = library.entries().iter().map(|e| e.rules.clone()).collect();
    let result = train(&grammar, &dataset, &cfg)?;
    Checkpoint::new(&grammar, result.params).save(&dir.join("checkpoint.json"))?;
    write_atomic(&dir.join("train_log.csv"), &log_to_csv(&result.log))?;
    let report = serde_json::json!({
        "command": "train",
        "dataset": dataset.len(),
        "epochs_run": result.epochs_run,
        "final_val_acc": result.final_val_acc,
        "activation_epoch": result.activation_epoch,
        "seed": cfg.seed,
        "config_hash": canonical_json_hash(&cfg_value),
        "wall_clock_seconds": t0.elapsed().as_secs_f64(),
    });
    write_atomic(
        &dir.join("train_report.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(())
}

fn cmd_search(common: &CommonArgs) -> Result<(), CliError> {
    let t0 = Instant::now();
    let dir = out_dir(common)?;
    let grammar = Grammar::reference();
    let problem = load_problem(common)?;
    let library = load_library(&grammar, common)?;
    let ckpt_path = common
        .checkpoint
        .as_deref()
        .ok_or_else(|| CliError::usage("search requires --checkpoint"))?;
    let checkpoint = load_checkpoint(&grammar, ckpt_path)?;
    let template = common
        .ansatz
        .as_deref()
        .ok_or_else(|| CliError::usage("search requires --ansatz"))?;
    let ansatz = Ansatz::parse(template)?;
    let (mut cfg, cfg_value): (SearchConfig, _) = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let reference = load_reference(common)?;

    let outcome = run_search(
        &grammar,
        &checkpoint.params,
        &ansatz,
        &library,
        &problem,
        &cfg,
    )?;
    let canonical = canonicalize(&outcome.expr)?;
    let relative = match &reference {
        Some(r) => measure_relative_l2(&outcome.expr, &problem, Some(r))?,
        None => outcome.relative_l2,
    };

    let mut trace_csv = String::from("stage,iteration,residual,expression\n");
    for row in &outcome.trace {
        trace_csv.push_str(&format!(
            "{},{},{},\"{}\"\n",
            row.stage, row.iteration, row.residual, row.expr
        ));
    }
    write_atomic(&dir.join("search_trace.csv"), &trace_csv)?;
    write_atomic(&dir.join("solution_grid.csv"), &emit_grid(&outcome.expr, &problem)?)?;

    let report = serde_json::json!({
        "command": "search",
        "problem": problem.name,
        "ansatz": template,
        "expression": canonical,
        "expression_raw": outcome.expr,
        "residual": outcome.residual,
        "relative_l2": relative,
        "hull_penalty": outcome.hull_penalty,
        "seed": cfg.seed,
        "workers": workers(common),
        "config_hash": canonical_json_hash(&cfg_value),
        "trace": outcome.trace,
        "wall_clock_seconds": t0.elapsed().as_secs_f64(),
    });
    write_atomic(
        &dir.join("search_report.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    println!("{canonical}");
    Ok(())
}

fn cmd_bench(common: &CommonArgs) -> Result<(), CliError> {
    let t0 = Instant::now();
    let dir = out_dir(common)?;
    let mut rows = Vec::new();
    for problem in builtin_problems() {
        let Some(exact) = problem.analytical.clone() else {
            continue;
        };
        let s = Instant::now();
        let r = sigs_core::residual::residual(&exact, &problem);
        let rel = relative_l2(
            &exact,
            &Reference::Analytic(exact.clone()),
            &all_points(&problem),
        )?;
        rows.push(serde_json::json!({
            "problem": problem.name,
            "expression": print(&exact),
            "residual": r,
            "relative_l2": rel,
            "seconds": s.elapsed().as_secs_f64(),
        }));
    }
    let report = serde_json::json!({
        "command": "bench",
        "results": rows,
        "config_hash": canonical_json_hash(&serde_json::json!({})),
        "wall_clock_seconds": t0.elapsed().as_secs_f64(),
    });
    write_atomic(
        &dir.join("bench_report.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(default)]
struct RaceConfig {
    pool: usize,
    k: usize,
    splits: usize,
    tau: f64,
    seed: u64,
}

impl Default for RaceConfig {
    fn default() -> Self {
        RaceConfig {
            pool: 1500,
            k: 100,
            splits: 10,
            tau: 0.8,
            seed: 0,
        }
    }
}

fn cmd_race(common: &CommonArgs, baseline: Option<&Path>) -> Result<(), CliError> {
    use rand::SeedableRng;
    let t0 = Instant::now();
    let dir = out_dir(common)?;
    let grammar = Grammar::reference();
    let problem = load_problem(common)?;
    let library = load_library(&grammar, common)?;
    let ckpt = load_checkpoint(
        &grammar,
        common
            .checkpoint
            .as_deref()
            .ok_or_else(|| CliError::usage("race requires --checkpoint"))?,
    )?;
    let base = load_checkpoint(
        &grammar,
        baseline.ok_or_else(|| CliError::usage("race requires --baseline"))?,
    )?;
    let (mut cfg, cfg_value): (RaceConfig, _) = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }

    // Admissible pool: standard-normal latents at least τ away (in
    // Mahalanobis distance) from every training code of the primary model.
    let training: Vec<Vec<f64>> = library
        .entries()
        .iter()
        .map(|e| encode(&ckpt.params, &grammar.encode_onehot(&e.rules)).0)
        .collect();
    let filter = MahalanobisFilter::new(&training, cfg.tau)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let pool = sample_admissible_latents(cfg.pool, Some(&filter), &mut rng);
    let result = race_to_k_valid(
        &grammar,
        &ckpt.params,
        &base.params,
        &pool,
        cfg.k,
        cfg.splits,
        &problem.domain,
    )?;

    let report = serde_json::json!({
        "command": "race",
        "problem": problem.name,
        "k": result.k,
        "splits": cfg.splits,
        "pool": pool.len(),
        "attempts_primary": result.attempts_a,
        "attempts_baseline": result.attempts_b,
        "mean_primary": result.mean_a(),
        "mean_baseline": result.mean_b(),
        "seed": cfg.seed,
        "config_hash": canonical_json_hash(&cfg_value),
        "wall_clock_seconds": t0.elapsed().as_secs_f64(),
    });
    write_atomic(
        &dir.join("race_report.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(default)]
struct AblateConfig {
    samples: usize,
    seed: u64,
}

impl Default for AblateConfig {
    fn default() -> Self {
        AblateConfig {
            samples: 50_000,
            seed: 0,
        }
    }
}

fn cmd_ablate(common: &CommonArgs) -> Result<(), CliError> {
    let t0 = Instant::now();
    let dir = out_dir(common)?;
    let grammar = Grammar::reference();
    let problem = load_problem(common)?;
    let (mut cfg, cfg_value): (AblateConfig, _) = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let uniform = atoms_vs_primitives_ablation(
        &grammar,
        problem_class(&problem),
        cfg.samples,
        &problem.domain,
        cfg.seed,
    )?;
    // Treatment arm (atoms through the ansatz) when a library is supplied.
    let atoms = match (&common.ansatz, &common.library) {
        (Some(template), Some(_)) => {
            let library = load_library(&grammar, common)?;
            let ansatz = Ansatz::parse(template)?;
            Some(ansatz_admissibility(
                &ansatz,
                &library,
                cfg.samples.min(1000),
                &problem.domain,
                cfg.seed,
            )?)
        }
        _ => None,
    };
    let report = serde_json::json!({
        "command": "ablate-atoms",
        "problem": problem.name,
        "uniform": {
            "samples": uniform.samples,
            "admissible": uniform.admissible,
            "fraction": uniform.fraction(),
        },
        "atoms": atoms.as_ref().map(|a| serde_json::json!({
            "samples": a.samples,
            "admissible": a.admissible,
            "fraction": a.fraction(),
        })),
        "seed": cfg.seed,
        "config_hash": canonical_json_hash(&cfg_value),
        "wall_clock_seconds": t0.elapsed().as_secs_f64(),
    });
    write_atomic(
        &dir.join("ablate_report.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(())
}

fn cmd_eval_expr(common: &CommonArgs, expr: &str) -> Result<(), CliError> {
    let t0 = Instant::now();
    let dir = out_dir(common)?;
    let problem = load_problem(common)?;
    let tree = interpret(expr)?;
    let residual = sigs_core::residual::residual(&tree, &problem);
    let reference = load_reference(common)?;
    let relative = measure_relative_l2(expr, &problem, reference.as_ref())?;
    let report = serde_json::json!({
        "command": "eval-expr",
        "problem": problem.name,
        "expression": expr,
        "residual": residual,
        "relative_l2": relative,
        "config_hash": canonical_json_hash(&serde_json::json!({"expr": expr})),
        "wall_clock_seconds": t0.elapsed().as_secs_f64(),
    });
    let text = serde_json::to_string_pretty(&report)?;
    write_atomic(&dir.join("eval_report.json"), &text)?;
    println!("{text}");
    Ok(())
}

/// Poisson–Gauss reference generation is exposed for tests and docs: the
/// shipped grids come from the in-repo 5-point-stencil solver.
#[allow(dead_code)]
fn write_fd_reference(problem: &PDEProblem, path: &Path) -> Result<(), CliError> {
    let grid = poisson_fd_reference(problem);
    write_atomic(path, &grid.to_csv())
}
