//! Physics motifs: viscous shocks, transport profiles, heat kernels,
//! Gaussian bumps, outgoing damped waves; amplitude prior sampling.

use super::{coef_mul, fmt_lit, push_term, round_lit, shifted_square, AtomError};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const DEC: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotifKind {
    /// `(u_L+u_R)/2 + (u_L−u_R)/2 · tanh((u_L−u_R)(x − x₀ − st)/(4ν))`.
    Shock,
    /// Travelling profile `g(kx − ωt)` with `g` a sinusoid.
    Transport,
    /// Fundamental solution `(4πkt)^{−d/2} e^{−‖x‖²/(4kt)}`.
    HeatKernel,
    /// `e^{−α((x−x₀)² + (y−y₀)²)}`.
    GaussianBump,
    /// `cos(k√((x−x₀)²+(y−y₀)²) − ct)·e^{−at}`.
    OutgoingDampedWave,
}

fn need(params: &BTreeMap<String, f64>, name: &str) -> Result<f64, AtomError> {
    params
        .get(name)
        .copied()
        .ok_or_else(|| AtomError::MissingParam(name.to_string()))
}

fn check_range(
    name: &str,
    value: f64,
    lo: f64,
    hi: f64,
    strict: bool,
    warnings: &mut Vec<String>,
) -> Result<(), AtomError> {
    if value < lo || value > hi {
        if strict {
            return Err(AtomError::ParamOutOfRange {
                name: name.to_string(),
                value,
                lo,
                hi,
            });
        }
        warnings.push(format!("parameter `{name}` = {value} outside [{lo}, {hi}]"));
    }
    Ok(())
}

/// Generate the expression text for a physics motif.
///
/// Parameters outside their documented ranges produce warnings, or hard
/// errors when `strict` is set.  Literals are rounded to 3 decimals.
pub fn gen_motif(
    kind: MotifKind,
    params: &BTreeMap<String, f64>,
    strict: bool,
) -> Result<(String, Vec<String>), AtomError> {
    let mut warnings = Vec::new();
    let expr = match kind {
        MotifKind::Shock => {
            let u_l = need(params, "u_l")?;
            let u_r = need(params, "u_r")?;
            let s = need(params, "s")?;
            let x0 = need(params, "x0")?;
            let nu = need(params, "nu")?;
            check_range("u_l", u_l, 1.0, 3.0, strict, &mut warnings)?;
            check_range("u_r", u_r, -1.0, 1.0, strict, &mut warnings)?;
            check_range("s", s, 0.1, 2.0, strict, &mut warnings)?;
            check_range("x0", x0, -1.0, 1.0, strict, &mut warnings)?;
            check_range("nu", nu, 0.01, 1.0, strict, &mut warnings)?;
            let avg = (u_l + u_r) / 2.0;
            let amp = (u_l - u_r) / 2.0;
            let slope = (u_l - u_r) / (4.0 * nu);
            let mut inner = String::from("x");
            push_term(&mut inner, -x0, "", DEC);
            push_term(&mut inner, -s, "t", DEC);
            let shock = format!("tanh({}*({inner}))", fmt_lit(round_lit(slope, DEC), DEC));
            let mut out = fmt_lit(round_lit(avg, DEC), DEC);
            push_term(&mut out, amp, &shock, DEC);
            out
        }
        MotifKind::Transport => {
            let k = need(params, "k")?;
            let omega = need(params, "omega")?;
            let shape = params.get("shape").copied().unwrap_or(0.0) as i64;
            let func = match shape {
                1 => "cos",
                2 => "tanh",
                _ => "sin",
            };
            let mut phase = coef_mul(k, "x", DEC);
            push_term(&mut phase, -omega, "t", DEC);
            format!("{func}({phase})")
        }
        MotifKind::HeatKernel => {
            let k = need(params, "k")?;
            check_range("k", k, 0.01, 1.0, strict, &mut warnings)?;
            let dim = params.get("dim").copied().unwrap_or(1.0) as usize;
            let c4 = fmt_lit(round_lit(4.0 * k, DEC), DEC);
            match dim {
                1 => format!("exp(-x^2/({c4}*t))/sqrt({c4}*pi*t)"),
                2 => format!("exp(-(x^2 + y^2)/({c4}*t))/({c4}*pi*t)"),
                d => {
                    return Err(AtomError::UnsupportedGeometry(format!(
                        "{d}-dimensional heat kernel"
                    )))
                }
            }
        }
        MotifKind::GaussianBump => {
            let alpha = params.get("alpha").copied().unwrap_or(1.0);
            if !(alpha > 0.0) {
                return Err(AtomError::ParamOutOfRange {
                    name: "alpha".to_string(),
                    value: alpha,
                    lo: f64::MIN_POSITIVE,
                    hi: f64::INFINITY,
                });
            }
            let x0 = params.get("x0").copied().unwrap_or(0.0);
            let mut sum = shifted_square("x", x0, DEC);
            if let Some(&y0) = params.get("y0") {
                sum.push_str(" + ");
                sum.push_str(&shifted_square("y", y0, DEC));
            }
            if round_lit(alpha, DEC) == 1.0 {
                format!("exp(-({sum}))")
            } else {
                format!("exp(-{}*({sum}))", fmt_lit(round_lit(alpha, DEC), DEC))
            }
        }
        MotifKind::OutgoingDampedWave => {
            let k = need(params, "k")?;
            let c = need(params, "c")?;
            let a = need(params, "a")?;
            let x0 = params.get("x0").copied().unwrap_or(0.0);
            let y0 = params.get("y0").copied().unwrap_or(0.0);
            check_range("k", k, 0.5, 4.0, strict, &mut warnings)?;
            check_range("c", c, 0.1, 1.0, strict, &mut warnings)?;
            check_range("a", a, 0.02, 0.8, strict, &mut warnings)?;
            check_range("x0", x0, -6.0, 6.0, strict, &mut warnings)?;
            check_range("y0", y0, -6.0, 6.0, strict, &mut warnings)?;
            let r = format!(
                "sqrt({} + {})",
                shifted_square("x", x0, DEC),
                shifted_square("y", y0, DEC)
            );
            let mut phase = coef_mul(k, &r, DEC);
            push_term(&mut phase, -c, "t", DEC);
            format!(
                "cos({phase})*exp(-{}*t)",
                fmt_lit(round_lit(a, DEC), DEC)
            )
        }
    };
    Ok((expr, warnings))
}

/// Draw an amplitude from the spectrum prior `a_j ~ N(0, σ²·e^{−decay·j})`.
pub fn sample_amplitude<R: Rng>(sigma: f64, decay_rate: f64, j: u32, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let std = sigma * (-decay_rate * j as f64 / 2.0).exp();
    let z: f64 = rng.sample(StandardNormal);
    std * z
}
