//! Library construction: per-family generation with retry, canonical
//! dedupe, and deterministic serialization.

use super::{
    fmt_lit, gen_laplacian_eigenfunction, gen_motif, gen_time_factor, round_lit, validate_component,
    validate_with, AtomError, Bc, BoxDomain, Family, MotifKind, ProblemClass, TimeFamily,
    Validation,
};
use crate::grammar::{Grammar, RuleSequence};
use crate::interp::{canonicalize, Var};
use crate::residual::Domain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};

/// Attempts allowed per requested atom before generation fails.
pub const RETRY_BUDGET: usize = 50;

/// One validated, canonicalized library entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomEntry {
    pub canonical: String,
    pub rules: RuleSequence,
    pub family: Family,
    pub tags: BTreeSet<String>,
}

/// Deduplicated collection of atoms; immutable once built.
#[derive(Debug, Clone, Default)]
pub struct AtomLibrary {
    entries: Vec<AtomEntry>,
    index: HashSet<String>,
}

impl AtomLibrary {
    pub fn new() -> AtomLibrary {
        AtomLibrary::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[AtomEntry] {
        &self.entries
    }

    pub fn contains(&self, canonical: &str) -> bool {
        self.index.contains(canonical)
    }

    /// Entries carrying `tag`.
    pub fn with_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a AtomEntry> {
        self.entries.iter().filter(move |e| e.tags.contains(tag))
    }

    /// Canonicalize and insert; returns `false` when an entry with the
    /// same canonical form is already present.
    pub fn insert(
        &mut self,
        grammar: &Grammar,
        expr_text: &str,
        family: Family,
        tags: impl IntoIterator<Item = String>,
    ) -> Result<bool, AtomError> {
        let canonical = canonicalize(expr_text)?;
        if self.index.contains(&canonical) {
            return Ok(false);
        }
        let rules = grammar.parse(&canonical)?;
        let mut tag_set: BTreeSet<String> = tags.into_iter().collect();
        tag_set.insert(family.name().to_string());
        for v in crate::interp::interpret(&canonical)?.variables() {
            tag_set.insert(format!("var:{}", v.name()));
        }
        self.index.insert(canonical.clone());
        self.entries.push(AtomEntry {
            canonical,
            rules,
            family,
            tags: tag_set,
        });
        Ok(true)
    }

    fn sort(&mut self) {
        self.entries.sort_by(|a, b| a.canonical.cmp(&b.canonical));
    }

    /// Serialize as tab-separated records `canonical_expr \t family \t
    /// tags(csv)`, ordered by canonical form.
    pub fn to_tsv(&self) -> String {
        let mut sorted: Vec<&AtomEntry> = self.entries.iter().collect();
        sorted.sort_by(|a, b| a.canonical.cmp(&b.canonical));
        let mut out = String::new();
        for e in sorted {
            let tags: Vec<&str> = e.tags.iter().map(String::as_str).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                e.canonical,
                e.family.name(),
                tags.join(",")
            ));
        }
        out
    }

    pub fn from_tsv(grammar: &Grammar, text: &str) -> Result<AtomLibrary, AtomError> {
        let mut lib = AtomLibrary::new();
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let expr = parts
                .next()
                .ok_or_else(|| AtomError::Format(format!("line {}: missing expression", ln + 1)))?;
            let family = parts
                .next()
                .and_then(Family::from_name)
                .ok_or_else(|| AtomError::Format(format!("line {}: bad family", ln + 1)))?;
            let tags = parts
                .next()
                .unwrap_or("")
                .split(',')
                .filter(|s| !s.is_empty())
                .map(str::to_string);
            lib.insert(grammar, expr, family, tags)?;
        }
        lib.sort();
        Ok(lib)
    }
}

/// One family's generation request inside a [`LibraryConfig`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    pub count: usize,
    /// Problem class the entries are validated against; `None` validates
    /// everything except variable presence (component atoms whose variable
    /// set is fixed by their Ansatz slot, e.g. pure time factors).
    #[serde(default)]
    pub class: Option<ProblemClass>,
    #[serde(default)]
    pub bc: Bc,
    /// Time-factor family; also multiplies eigenfunctions into separable
    /// space–time atoms when set on `laplacian_eigen`.
    #[serde(default)]
    pub time_family: Option<TimeFamily>,
    /// Fixed named parameters.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Uniformly sampled named parameters (inclusive bounds).
    #[serde(default)]
    pub ranges: BTreeMap<String, (f64, f64)>,
    /// Largest eigen mode index per dimension.
    #[serde(default = "default_max_mode")]
    pub max_mode: u32,
    /// Expansion depth cap for `random_cfg`.
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    /// Validation domain; defaults to the unit box in each axis.
    #[serde(default)]
    pub domain: Option<Domain>,
    /// Literal precision budget (decimal places); defaults to 3, wave-mode
    /// families typically use 6.
    #[serde(default)]
    pub max_decimals: Option<usize>,
    #[serde(default)]
    pub tags: Vec<String>,
}

fn default_max_mode() -> u32 {
    3
}

fn default_max_depth() -> usize {
    8
}

/// Full library build request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LibraryConfig {
    #[serde(default)]
    pub seed: u64,
    pub families: Vec<FamilySpec>,
}

impl FamilySpec {
    fn domain(&self) -> Domain {
        self.domain.unwrap_or(Domain {
            x: (0.0, 1.0),
            y: Some((0.0, 1.0)),
            t: Some((0.0, 1.0)),
        })
    }

    fn decimals(&self) -> usize {
        self.max_decimals.unwrap_or(3)
    }

    fn draw(&self, name: &str, rng: &mut ChaCha8Rng) -> Option<f64> {
        if let Some(&v) = self.params.get(name) {
            return Some(v);
        }
        if let Some(&(lo, hi)) = self.ranges.get(name) {
            return Some(rng.gen_range(lo..=hi));
        }
        None
    }

    fn need(&self, name: &str, rng: &mut ChaCha8Rng) -> Result<f64, AtomError> {
        self.draw(name, rng)
            .ok_or_else(|| AtomError::MissingParam(name.to_string()))
    }

    fn vars(&self) -> Vec<Var> {
        match self.class {
            Some(c) => c.required_vars().to_vec(),
            None => vec![Var::X, Var::T],
        }
    }

    fn spatial_dims(&self) -> usize {
        self.vars().iter().filter(|v| **v != Var::T).count().max(1)
    }
}

/// Build a library from `config`: each requested atom is generated,
/// validated, canonicalized, and inserted, retrying with fresh parameter
/// draws on rejection or duplication up to [`RETRY_BUDGET`] attempts.
pub fn build_library(config: &LibraryConfig) -> Result<AtomLibrary, AtomError> {
    let grammar = Grammar::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut lib = AtomLibrary::new();
    for spec in &config.families {
        for _ in 0..spec.count {
            let mut last = String::from("no attempt made");
            let mut ok = false;
            for _ in 0..RETRY_BUDGET {
                match try_generate(spec, &mut rng) {
                    Ok(expr) => {
                        let verdict = match spec.class {
                            Some(class) => {
                                validate_with(&expr, class, &spec.domain(), spec.decimals())
                            }
                            None => validate_component(&expr, &spec.domain(), spec.decimals()),
                        };
                        match verdict {
                            Validation::Valid => {
                                match lib.insert(
                                    &grammar,
                                    &expr,
                                    spec.family,
                                    spec.tags.iter().cloned(),
                                ) {
                                    Ok(true) => {
                                        ok = true;
                                        break;
                                    }
                                    Ok(false) => last = format!("duplicate of `{expr}`"),
                                    Err(e) => last = format!("`{expr}`: {e}"),
                                }
                            }
                            Validation::Rejected(r) => last = format!("`{expr}`: {r:?}"),
                        }
                    }
                    Err(e) => last = e.to_string(),
                }
            }
            if !ok {
                return Err(AtomError::RetryBudgetExhausted {
                    family: spec.family.name().to_string(),
                    last,
                });
            }
        }
    }
    lib.sort();
    Ok(lib)
}

fn try_generate(spec: &FamilySpec, rng: &mut ChaCha8Rng) -> Result<String, AtomError> {
    match spec.family {
        Family::LaplacianEigen => {
            let dims = spec.spatial_dims();
            let mut lengths = Vec::with_capacity(dims);
            for name in ["lx", "ly"].iter().take(dims) {
                lengths.push(spec.draw(name, rng).unwrap_or(1.0));
            }
            let lo = if spec.bc == Bc::Dirichlet { 1 } else { 0 };
            let k: Vec<u32> = (0..dims).map(|_| rng.gen_range(lo..=spec.max_mode)).collect();
            let (phi, mu) = gen_laplacian_eigenfunction(&BoxDomain { lengths }, spec.bc, &k)?;
            match spec.time_family {
                Some(tf) => {
                    let t = gen_time_factor(tf, mu, &resolve_params(spec, rng))?;
                    if t == "1" {
                        Ok(phi)
                    } else if phi == "1" {
                        Ok(t)
                    } else {
                        Ok(format!("{phi}*{t}"))
                    }
                }
                None => Ok(phi),
            }
        }
        Family::TimeFactor => {
            let tf = spec
                .time_family
                .ok_or_else(|| AtomError::MissingParam("time_family".to_string()))?;
            let mu = spec.need("mu", rng)?;
            gen_time_factor(tf, mu, &resolve_params(spec, rng))
        }
        Family::Shock => motif(spec, MotifKind::Shock, rng),
        Family::Transport => motif(spec, MotifKind::Transport, rng),
        Family::HeatKernel => motif(spec, MotifKind::HeatKernel, rng),
        Family::GaussianBump => motif(spec, MotifKind::GaussianBump, rng),
        Family::Polynomial => Ok(random_polynomial(&spec.vars(), rng)),
        Family::RandomCfg => Ok(random_cfg_expr(&spec.vars(), spec.max_depth, rng)),
    }
}

fn motif(spec: &FamilySpec, kind: MotifKind, rng: &mut ChaCha8Rng) -> Result<String, AtomError> {
    let (expr, _warnings) = gen_motif(kind, &resolve_params(spec, rng), false)?;
    Ok(expr)
}

/// Fixed params plus one fresh draw per ranged param.
fn resolve_params(spec: &FamilySpec, rng: &mut ChaCha8Rng) -> BTreeMap<String, f64> {
    let mut out = spec.params.clone();
    for (name, &(lo, hi)) in &spec.ranges {
        out.entry(name.clone()).or_insert_with(|| rng.gen_range(lo..=hi));
    }
    out
}

/// Random polynomial of total degree ≤ 3 in `vars` with rounded uniform
/// coefficients.
pub fn random_polynomial<R: Rng>(vars: &[Var], rng: &mut R) -> String {
    let n_terms = rng.gen_range(1..=4);
    let mut out = String::new();
    for i in 0..n_terms {
        let coef = round_lit(rng.gen_range(-2.0..=2.0), 3);
        let coef = if coef == 0.0 { 1.0 } else { coef };
        // Random monomial of total degree 1..=3.
        let degree = rng.gen_range(1..=3);
        let mut exps = vec![0u32; vars.len()];
        for _ in 0..degree {
            let j = rng.gen_range(0..vars.len());
            exps[j] += 1;
        }
        let mut mono = String::new();
        for (v, &e) in vars.iter().zip(&exps) {
            if e == 0 {
                continue;
            }
            if !mono.is_empty() {
                mono.push('*');
            }
            mono.push_str(v.name());
            if e > 1 {
                mono.push_str(&format!("^{e}"));
            }
        }
        if i == 0 {
            out = super::coef_mul(coef, &mono, 3);
        } else {
            super::push_term(&mut out, coef, &mono, 3);
        }
    }
    out
}

/// Random expression by probabilistic grammar expansion: binary operations
/// with probability 0.6, unary functions with probability 0.3, terminals
/// with probability 0.1; terminals forced at `max_depth`.
pub fn random_cfg_expr<R: Rng>(vars: &[Var], max_depth: usize, rng: &mut R) -> String {
    fn go<R: Rng>(vars: &[Var], depth: usize, max_depth: usize, rng: &mut R) -> String {
        let roll: f64 = rng.gen();
        if depth >= max_depth || roll < 0.1 {
            // Terminal: variable, pi, or literal.
            let n = vars.len();
            let pick = rng.gen_range(0..n + 2);
            if pick < n {
                vars[pick].name().to_string()
            } else if pick == n {
                "pi".to_string()
            } else {
                fmt_lit(round_lit(rng.gen_range(0.1..=3.0), 3), 3)
            }
        } else if roll < 0.7 {
            // Binary.
            let a = go(vars, depth + 1, max_depth, rng);
            let b = go(vars, depth + 1, max_depth, rng);
            let op = ["+", "-", "*", "/"][rng.gen_range(0..4)];
            format!("({a} {op} {b})")
        } else {
            // Unary.
            let a = go(vars, depth + 1, max_depth, rng);
            match rng.gen_range(0..8) {
                0 => format!("sin({a})"),
                1 => format!("cos({a})"),
                2 => format!("exp({a})"),
                3 => format!("log({a})"),
                4 => format!("tanh({a})"),
                5 => format!("sqrt({a})"),
                6 => format!("-({a})"),
                _ => format!("({a})^2"),
            }
        }
    }
    go(vars, 0, max_depth, rng)
}
