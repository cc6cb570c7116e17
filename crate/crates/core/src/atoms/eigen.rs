//! Closed-form Laplacian eigenfunctions on box domains.

use super::{fmt_lit, round_lit, AtomError, Bc};
use crate::interp::{interpret, Expr, Var};
use crate::residual::Domain;
use serde::{Deserialize, Serialize};

/// Box domain `Ω = ∏_d [0, L_d]` (1 or 2 spatial dimensions; the
/// expression language has only `x` and `y`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lengths: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lengths: &[f64]) -> BoxDomain {
        BoxDomain {
            lengths: lengths.to_vec(),
        }
    }
}

const VARS: [&str; 2] = ["x", "y"];

/// Eigenfunction `φ_k` and eigenvalue `μ_k` of `−Δ` on a box with the
/// given boundary conditions.
///
/// Dirichlet: `φ = ∏ sin(k_d π x_d / L_d)`, `μ = π² Σ k_d²/L_d²`, `k_d ≥ 1`.
/// Neumann: cosines, `k_d ≥ 0` (all-zero mode is the constant `1`, `μ = 0`).
/// Periodic: real modes `∏ cos(2 k_d π x_d / L_d)`, `μ = 4π² Σ k_d²/L_d²`.
///
/// Domain lengths are embedded as literals rounded to 3 decimals; the
/// returned eigenvalue matches the rounded literals exactly.
pub fn gen_laplacian_eigenfunction(
    domain: &BoxDomain,
    bc: Bc,
    k: &[u32],
) -> Result<(String, f64), AtomError> {
    let dims = domain.lengths.len();
    if dims == 0 || dims > 2 {
        return Err(AtomError::UnsupportedGeometry(format!(
            "{dims}-dimensional box (supported: 1 or 2 dimensions)"
        )));
    }
    if domain.lengths.iter().any(|&l| !(l > 0.0)) {
        return Err(AtomError::UnsupportedGeometry(
            "box lengths must be positive".to_string(),
        ));
    }
    if k.len() != dims {
        return Err(AtomError::ModeIndexMismatch {
            want: dims,
            got: k.len(),
        });
    }
    if bc == Bc::None {
        return Err(AtomError::UnsupportedBc);
    }
    if bc == Bc::Dirichlet {
        if let Some(d) = k.iter().position(|&kd| kd == 0) {
            return Err(AtomError::ZeroModeDirichlet(d));
        }
    }

    let mut factors = Vec::new();
    let mut mu = 0.0;
    for d in 0..dims {
        let len = round_lit(domain.lengths[d], 3);
        let kd = k[d];
        let (func, mult, mu_scale) = match bc {
            Bc::Dirichlet => ("sin", kd, 1.0),
            Bc::Neumann => ("cos", kd, 1.0),
            Bc::Periodic => ("cos", 2 * kd, 4.0),
            Bc::None => unreachable!(),
        };
        mu += mu_scale * std::f64::consts::PI.powi(2) * (kd as f64).powi(2) / len.powi(2);
        if kd == 0 {
            continue;
        }
        let mut arg = String::new();
        if mult != 1 {
            arg.push_str(&format!("{mult}*"));
        }
        arg.push_str("pi*");
        arg.push_str(VARS[d]);
        if len != 1.0 {
            arg.push('/');
            arg.push_str(&fmt_lit(len, 3));
        }
        factors.push(format!("{func}({arg})"));
    }

    let expr = if factors.is_empty() {
        "1".to_string()
    } else {
        factors.join("*")
    };
    Ok((expr, mu))
}

/// One-dimensional Dirichlet envelope factor `sin(π(x − a)/L)` on `[a, b]`.
fn envelope_factor(var: &str, (a, b): (f64, f64)) -> String {
    let len = b - a;
    let shifted = if round_lit(a, 3) == 0.0 {
        var.to_string()
    } else if a > 0.0 {
        format!("(x - {})", fmt_lit(round_lit(a, 3), 3)).replace('x', var)
    } else {
        format!("(x + {})", fmt_lit(round_lit(-a, 3), 3)).replace('x', var)
    };
    if round_lit(len, 3) == 1.0 {
        format!("sin(pi*{shifted})")
    } else {
        format!("sin(pi*{shifted}/{})", fmt_lit(round_lit(len, 3), 3))
    }
}

/// Multiply a spatial component by a boundary-vanishing envelope.
///
/// Dirichlet conditions multiply by `∏ sin(π(x_d − a_d)/L_d)`, which
/// vanishes on the boundary of the box.  Neumann conditions leave cosine
/// modes untouched and reject expressions whose spatial oscillation is
/// built from sines only.  The operation is *not* idempotent: applying it
/// twice multiplies by the envelope twice.
pub fn apply_boundary_envelope(
    expr_text: &str,
    domain: &Domain,
    bc: Bc,
) -> Result<String, AtomError> {
    match bc {
        Bc::Dirichlet => {
            let mut env = envelope_factor("x", domain.x);
            if let Some(yb) = domain.y {
                env.push('*');
                env.push_str(&envelope_factor("y", yb));
            }
            Ok(format!("{env}*({expr_text})"))
        }
        Bc::Neumann => {
            let tree = interpret(expr_text)?;
            let mut spatial_sin = false;
            let mut spatial_cos = false;
            tree.visit(&mut |e| match e {
                Expr::Sin(a) => {
                    if a.contains_var(Var::X) || a.contains_var(Var::Y) {
                        spatial_sin = true;
                    }
                }
                Expr::Cos(a) => {
                    if a.contains_var(Var::X) || a.contains_var(Var::Y) {
                        spatial_cos = true;
                    }
                }
                _ => {}
            });
            if spatial_sin && !spatial_cos {
                return Err(AtomError::SineOnlyNeumann);
            }
            Ok(expr_text.to_string())
        }
        _ => Err(AtomError::UnsupportedBc),
    }
}
