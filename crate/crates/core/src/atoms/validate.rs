//! Symbolic and numeric admissibility checks for candidate atoms.

use crate::interp::{eval_point, interpret, Expr, Var};
use crate::residual::Domain;
use serde::{Deserialize, Serialize};

/// Problem class an atom is validated against; fixes the variables the
/// expression must mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemClass {
    Ode,
    Spatial,
    Spatiotemporal1d,
    Spatiotemporal2d,
}

impl ProblemClass {
    pub fn required_vars(self) -> &'static [Var] {
        match self {
            ProblemClass::Ode => &[Var::X],
            ProblemClass::Spatial => &[Var::X, Var::Y],
            ProblemClass::Spatiotemporal1d => &[Var::X, Var::T],
            ProblemClass::Spatiotemporal2d => &[Var::X, Var::Y, Var::T],
        }
    }
}

/// Machine-readable rejection reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    /// Text failed to parse as an expression.
    NotInLanguage,
    /// A required variable for the problem class is absent.
    MissingVariable { var: &'static str },
    /// A `log` argument is not strictly positive on the sampled domain.
    LogDomain,
    /// A `sqrt` argument is negative on the sampled domain.
    SqrtDomain,
    /// A denominator comes within 1e−6 of zero on the sampled domain.
    DivisionNearZero,
    /// A transcendental function has a purely numeric argument.
    NumericTranscendental,
    /// An integer power exceeds degree 3.
    PowerTooHigh,
    /// Scientific-notation mantissa outside [0.001, 999].
    MantissaOutOfRange,
    /// Scientific-notation exponent outside [−4, 4].
    ExponentOutOfRange,
    /// A literal carries more decimal places than allowed.
    LiteralPrecision,
    /// Evaluation produced a non-finite value on the sampled domain.
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Validation {
    Valid,
    Rejected(Rejection),
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validation::Valid)
    }
}

/// Points sampled per axis for the numeric domain checks.
const GRID_N: usize = 9;
/// Lower bound enforced on |denominator| over the sampled domain.
const DEN_EPS: f64 = 1e-6;

/// Validate `expr_text` for `class` over `domain` with the default literal
/// precision (3 decimal places).
pub fn validate(expr_text: &str, class: ProblemClass, domain: &Domain) -> Validation {
    validate_with(expr_text, class, domain, 3)
}

/// Validate with an explicit literal-precision budget (wave modes use 6).
pub fn validate_with(
    expr_text: &str,
    class: ProblemClass,
    domain: &Domain,
    max_decimals: usize,
) -> Validation {
    if let Some(r) = scan_literals(expr_text, max_decimals) {
        return Validation::Rejected(r);
    }
    let tree = match interpret(expr_text) {
        Ok(t) => t,
        Err(_) => return Validation::Rejected(Rejection::NotInLanguage),
    };
    let present = tree.variables();
    for v in class.required_vars() {
        if !present.contains(v) {
            return Validation::Rejected(Rejection::MissingVariable { var: v.name() });
        }
    }
    structural_and_numeric(&tree, class.required_vars(), domain)
}

/// Validate a component atom whose variable set is dictated by its Ansatz
/// slot rather than a problem class (e.g. pure time factors): all checks
/// except variable presence, sampled over the variables the expression
/// actually mentions.
pub fn validate_component(expr_text: &str, domain: &Domain, max_decimals: usize) -> Validation {
    if let Some(r) = scan_literals(expr_text, max_decimals) {
        return Validation::Rejected(r);
    }
    let tree = match interpret(expr_text) {
        Ok(t) => t,
        Err(_) => return Validation::Rejected(Rejection::NotInLanguage),
    };
    let vars = tree.variables();
    structural_and_numeric(&tree, &vars, domain)
}

fn structural_and_numeric(tree: &Expr, axes: &[Var], domain: &Domain) -> Validation {
    if tree.max_pow() > 3 {
        return Validation::Rejected(Rejection::PowerTooHigh);
    }
    let mut numeric_transcendental = false;
    tree.visit(&mut |e| match e {
        Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Log(a) | Expr::Tanh(a) => {
            if a.variables().is_empty() {
                numeric_transcendental = true;
            }
        }
        _ => {}
    });
    if numeric_transcendental {
        return Validation::Rejected(Rejection::NumericTranscendental);
    }

    // Numeric checks on a tensor-product sample of the closed domain.
    let points = sample_points(axes, domain);
    let mut rejection: Option<Rejection> = None;
    tree.visit(&mut |e| {
        if rejection.is_some() {
            return;
        }
        match e {
            Expr::Log(a) => {
                for &(x, y, t) in &points {
                    let (v, _) = eval_point::<f64>(a, x, y, t);
                    if !(v > 0.0) || !v.is_finite() {
                        rejection = Some(Rejection::LogDomain);
                        return;
                    }
                }
            }
            Expr::Sqrt(a) => {
                for &(x, y, t) in &points {
                    let (v, _) = eval_point::<f64>(a, x, y, t);
                    if v < 0.0 || !v.is_finite() {
                        rejection = Some(Rejection::SqrtDomain);
                        return;
                    }
                }
            }
            Expr::Div(_, den) => {
                for &(x, y, t) in &points {
                    let (v, _) = eval_point::<f64>(den, x, y, t);
                    if !v.is_finite() || v.abs() < DEN_EPS {
                        rejection = Some(Rejection::DivisionNearZero);
                        return;
                    }
                }
            }
            _ => {}
        }
    });
    if let Some(r) = rejection {
        return Validation::Rejected(r);
    }
    for &(x, y, t) in &points {
        let (v, _) = eval_point::<f64>(tree, x, y, t);
        if !v.is_finite() {
            return Validation::Rejected(Rejection::NonFinite);
        }
    }
    Validation::Valid
}

fn axis_bounds(v: Var, domain: &Domain) -> (f64, f64) {
    match v {
        Var::X => domain.x,
        Var::Y => domain.y.unwrap_or((0.0, 1.0)),
        Var::T => domain.t.unwrap_or((0.0, 1.0)),
    }
}

fn sample_points(axes: &[Var], domain: &Domain) -> Vec<(f64, f64, f64)> {
    let grid = |v: Var| -> Vec<f64> {
        if axes.contains(&v) {
            let (a, b) = axis_bounds(v, domain);
            (0..GRID_N)
                .map(|i| a + (b - a) * i as f64 / (GRID_N - 1) as f64)
                .collect()
        } else {
            let (a, b) = axis_bounds(v, domain);
            vec![(a + b) / 2.0]
        }
    };
    let (xs, ys, ts) = (grid(Var::X), grid(Var::Y), grid(Var::T));
    let mut out = Vec::with_capacity(xs.len() * ys.len() * ts.len());
    for &x in &xs {
        for &y in &ys {
            for &t in &ts {
                out.push((x, y, t));
            }
        }
    }
    out
}

/// Scan raw text for numeric literals: decimal-precision budget, and
/// mantissa/exponent bounds on scientific-notation suffixes (`e-k`).
fn scan_literals(text: &str, max_decimals: usize) -> Option<Rejection> {
    let b = text.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i].is_ascii_digit() {
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let mut decimals = 0;
            if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
                i += 1;
                let fs = i;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                decimals = i - fs;
            }
            let mantissa: f64 = text[start..i].parse().unwrap_or(f64::NAN);
            // Optional scientific suffix `e-k`.
            if i + 2 < b.len() && b[i] == b'e' && b[i + 1] == b'-' && b[i + 2].is_ascii_digit() {
                let es = i + 2;
                i += 2;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                let exp: i64 = text[es..i].parse().unwrap_or(i64::MAX);
                if exp > 4 {
                    return Some(Rejection::ExponentOutOfRange);
                }
                if !(0.001..=999.0).contains(&mantissa) {
                    return Some(Rejection::MantissaOutOfRange);
                }
            }
            if decimals > max_decimals {
                return Some(Rejection::LiteralPrecision);
            }
        } else {
            i += 1;
        }
    }
    None
}
