//! Modal time factors `T_k(t)` for common PDE families.
//!
//! Each factor is the closed-form solution of the scalar ODE obtained by
//! projecting the PDE onto an eigenfunction with eigenvalue `μ_k`.
//! Coefficients are embedded as literals rounded to 6 decimals.

use super::{coef_mul, fmt_lit, round_lit, AtomError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const DEC: usize = 6;

/// PDE family whose modal ODE the time factor solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFamily {
    /// `T' + κμT = 0` → `e^{−κμt}`.
    Heat,
    /// `T'' + c²μT = 0`, cosine branch → `cos(c√μ t)`.
    WaveCos,
    /// `T'' + c²μT = 0`, sine branch → `sin(c√μ t)` (`t` when `μ = 0`).
    WaveSin,
    /// `T'' + 2γT' + c²μT = 0`; regime chosen by the sign of `c²μ − γ²`.
    DampedWave,
    /// `T' + κμ²T = 0` → `e^{−κμ²t}`.
    Biharmonic,
    /// `T' + (κμ − ρ)T = 0` → `e^{−(κμ−ρ)t}`.
    ReactionDiffusion,
    /// `T' + κμ^s T = 0` → `e^{−κμ^s t}`.
    Fractional,
}

fn need(params: &BTreeMap<String, f64>, name: &str) -> Result<f64, AtomError> {
    params
        .get(name)
        .copied()
        .ok_or_else(|| AtomError::MissingParam(name.to_string()))
}

fn decaying_exp(lambda: f64) -> String {
    let r = round_lit(lambda, DEC);
    if r == 0.0 {
        "1".to_string()
    } else if r > 0.0 {
        format!("exp(-{}*t)", fmt_lit(r, DEC))
    } else {
        format!("exp({}*t)", fmt_lit(-r, DEC))
    }
}

/// Closed-form time factor for `family` at eigenvalue `mu`.
///
/// `params` supplies the named constants the family needs: `kappa` (heat,
/// biharmonic, reaction–diffusion, fractional), `c` (wave families),
/// `gamma` (damped wave), `rho` (reaction–diffusion), `s` (fractional),
/// and optional mode coefficients `c1`/`c2` for the damped wave (defaults
/// 1 and 0).
pub fn gen_time_factor(
    family: TimeFamily,
    mu: f64,
    params: &BTreeMap<String, f64>,
) -> Result<String, AtomError> {
    if mu < 0.0 {
        return Err(AtomError::NegativeEigenvalue(mu));
    }
    match family {
        TimeFamily::Heat => {
            let kappa = need(params, "kappa")?;
            Ok(decaying_exp(kappa * mu))
        }
        TimeFamily::Biharmonic => {
            let kappa = need(params, "kappa")?;
            Ok(decaying_exp(kappa * mu * mu))
        }
        TimeFamily::ReactionDiffusion => {
            let kappa = need(params, "kappa")?;
            let rho = need(params, "rho")?;
            Ok(decaying_exp(kappa * mu - rho))
        }
        TimeFamily::Fractional => {
            let kappa = need(params, "kappa")?;
            let s = need(params, "s")?;
            let lambda = if mu == 0.0 { 0.0 } else { kappa * mu.powf(s) };
            Ok(decaying_exp(lambda))
        }
        TimeFamily::WaveCos => {
            let c = need(params, "c")?;
            let omega = round_lit(c * mu.sqrt(), DEC);
            if omega == 0.0 {
                Ok("1".to_string())
            } else {
                Ok(format!("cos({}*t)", fmt_lit(omega, DEC)))
            }
        }
        TimeFamily::WaveSin => {
            let c = need(params, "c")?;
            let omega = round_lit(c * mu.sqrt(), DEC);
            if omega == 0.0 {
                // Degenerate second solution of T'' = 0.
                Ok("t".to_string())
            } else {
                Ok(format!("sin({}*t)", fmt_lit(omega, DEC)))
            }
        }
        TimeFamily::DampedWave => {
            let c = need(params, "c")?;
            let gamma = need(params, "gamma")?;
            let c1 = params.get("c1").copied().unwrap_or(1.0);
            let c2 = params.get("c2").copied().unwrap_or(0.0);
            let disc = c * c * mu - gamma * gamma;
            let env = decaying_exp(gamma);
            if disc.abs() < 1e-12 {
                // Critical damping: e^{−γt}(C₁ + C₂t).
                let mut inner = String::new();
                let r1 = round_lit(c1, DEC);
                if r1 != 0.0 {
                    inner.push_str(&fmt_lit(r1, DEC));
                }
                let mut tail = String::new();
                super::push_term(&mut tail, c2, "t", DEC);
                if inner.is_empty() {
                    let trimmed = tail.trim_start();
                    if trimmed.is_empty() {
                        return Ok("0".to_string());
                    }
                    inner = trimmed.strip_prefix("+ ").unwrap_or(trimmed).to_string();
                    if let Some(rest) = inner.strip_prefix("- ") {
                        inner = format!("-{rest}");
                    }
                } else {
                    inner.push_str(&tail);
                }
                if inner == "1" {
                    Ok(env)
                } else if env == "1" {
                    Ok(inner)
                } else {
                    Ok(format!("{env}*({inner})"))
                }
            } else if disc > 0.0 {
                // Underdamped: e^{−γt}(C₁cos(ωt) + C₂sin(ωt)).
                let omega = fmt_lit(disc.sqrt(), DEC);
                let cos = format!("cos({omega}*t)");
                let sin = format!("sin({omega}*t)");
                let inner = if round_lit(c2, DEC) == 0.0 {
                    coef_mul(c1, &cos, DEC)
                } else if round_lit(c1, DEC) == 0.0 {
                    coef_mul(c2, &sin, DEC)
                } else {
                    let mut s = coef_mul(c1, &cos, DEC);
                    super::push_term(&mut s, c2, &sin, DEC);
                    format!("({s})")
                };
                if env == "1" {
                    Ok(inner)
                } else {
                    Ok(format!("{env}*{inner}"))
                }
            } else {
                // Overdamped: C₁e^{−r₁t} + C₂e^{−r₂t}.
                let root = (-disc).sqrt();
                let e1 = decaying_exp(gamma - root);
                let e2 = decaying_exp(gamma + root);
                let t1 = round_lit(c1, DEC) != 0.0;
                let t2 = round_lit(c2, DEC) != 0.0;
                match (t1, t2) {
                    (true, true) => {
                        let mut s = coef_mul(c1, &e1, DEC);
                        super::push_term(&mut s, c2, &e2, DEC);
                        Ok(s)
                    }
                    (true, false) => Ok(coef_mul(c1, &e1, DEC)),
                    (false, true) => Ok(coef_mul(c2, &e2, DEC)),
                    (false, false) => Ok("0".to_string()),
                }
            }
        }
    }
}
