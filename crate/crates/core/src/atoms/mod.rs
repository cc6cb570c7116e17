//! Generation, validation, canonicalization, and deduplication of the
//! library of candidate expression atoms.
//!
//! Atoms are the building blocks the solver assembles into candidate
//! solutions: Laplacian eigenfunctions on boxes, modal time factors,
//! physics motifs (viscous shocks, transport profiles, heat kernels,
//! Gaussian bumps, outgoing damped waves), random polynomials, and random
//! grammar expansions.  Every atom is plain expression text in the
//! reference grammar's language; [`build_library`] validates, canonicalizes,
//! and deduplicates generated candidates into an immutable [`AtomLibrary`].

mod eigen;
mod library;
mod motifs;
mod timefac;
mod validate;

pub use eigen::{apply_boundary_envelope, gen_laplacian_eigenfunction, BoxDomain};
pub use library::{
    build_library, random_cfg_expr, random_polynomial, AtomEntry, AtomLibrary, FamilySpec,
    LibraryConfig, RETRY_BUDGET,
};
pub use motifs::{gen_motif, sample_amplitude, MotifKind};
pub use timefac::{gen_time_factor, TimeFamily};
pub use validate::{validate, validate_component, validate_with, ProblemClass, Rejection, Validation};

use crate::grammar::GrammarError;
use crate::interp::InterpError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Atom families the generator knows how to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LaplacianEigen,
    TimeFactor,
    Shock,
    Transport,
    HeatKernel,
    GaussianBump,
    Polynomial,
    RandomCfg,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::LaplacianEigen => "laplacian_eigen",
            Family::TimeFactor => "time_factor",
            Family::Shock => "shock",
            Family::Transport => "transport",
            Family::HeatKernel => "heat_kernel",
            Family::GaussianBump => "gaussian_bump",
            Family::Polynomial => "polynomial",
            Family::RandomCfg => "random_cfg",
        }
    }

    pub fn from_name(s: &str) -> Option<Family> {
        Some(match s {
            "laplacian_eigen" => Family::LaplacianEigen,
            "time_factor" => Family::TimeFactor,
            "shock" => Family::Shock,
            "transport" => Family::Transport,
            "heat_kernel" => Family::HeatKernel,
            "gaussian_bump" => Family::GaussianBump,
            "polynomial" => Family::Polynomial,
            "random_cfg" => Family::RandomCfg,
            _ => return None,
        })
    }
}

/// Boundary condition an atom was generated for.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Bc {
    Dirichlet,
    Neumann,
    Periodic,
    #[default]
    None,
}

/// A single requested atom: family, named parameters, boundary condition,
/// and the variables the generated expression must mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub family: Family,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub bc: Bc,
    #[serde(default)]
    pub vars: Vec<String>,
}

#[derive(Debug, Error)]
pub enum AtomError {
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("mode index k_{0} = 0 is not a Dirichlet eigenfunction")]
    ZeroModeDirichlet(usize),
    #[error("mode index has {got} components, domain has {want} dimensions")]
    ModeIndexMismatch { want: usize, got: usize },
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("negative eigenvalue mu = {0}")]
    NegativeEigenvalue(f64),
    #[error("unsupported boundary condition for this operation")]
    UnsupportedBc,
    #[error("sine-only spatial modes do not satisfy Neumann conditions")]
    SineOnlyNeumann,
    #[error("parameter `{name}` = {value} outside documented range [{lo}, {hi}]")]
    ParamOutOfRange {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("retry budget exhausted for family `{family}`: {last}")]
    RetryBudgetExhausted { family: String, last: String },
    #[error("library record is malformed: {0}")]
    Format(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Round `v` to `decimals` places and format it without trailing zeros.
pub(crate) fn fmt_lit(v: f64, decimals: usize) -> String {
    let mut s = format!("{:.*}", decimals, v);
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// Round `v` to `decimals` places.
pub(crate) fn round_lit(v: f64, decimals: usize) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (v * scale).round() / scale
}

/// Append `+ v*suffix` / `- |v|*suffix` to `out` (empty suffix appends the
/// bare literal).  Zero coefficients append nothing.
pub(crate) fn push_term(out: &mut String, v: f64, suffix: &str, decimals: usize) {
    let r = round_lit(v, decimals);
    if r == 0.0 {
        return;
    }
    let sign = if r < 0.0 { " - " } else { " + " };
    out.push_str(sign);
    let mag = fmt_lit(r.abs(), decimals);
    if suffix.is_empty() {
        out.push_str(&mag);
    } else if mag == "1" {
        out.push_str(suffix);
    } else {
        out.push_str(&mag);
        out.push('*');
        out.push_str(suffix);
    }
}

/// `(var - v0)^2` with the sign folded into the text; `v0 = 0` collapses to
/// `var^2`.
pub(crate) fn shifted_square(var: &str, v0: f64, decimals: usize) -> String {
    let r = round_lit(v0, decimals);
    if r == 0.0 {
        format!("{var}^2")
    } else if r > 0.0 {
        format!("({var} - {})^2", fmt_lit(r, decimals))
    } else {
        format!("({var} + {})^2", fmt_lit(-r, decimals))
    }
}

/// `c*body`, eliding unit coefficients.
pub(crate) fn coef_mul(c: f64, body: &str, decimals: usize) -> String {
    let r = round_lit(c, decimals);
    if r == 1.0 {
        body.to_string()
    } else if r == -1.0 {
        format!("-{body}")
    } else {
        format!("{}*{body}", fmt_lit(r, decimals))
    }
}
