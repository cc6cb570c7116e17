//! JSON problem specs for user-defined PDEs.
//!
//! The operator is a list of signed terms, each a derivative multi-index
//! (or the advection flag) with a coefficient that may be a number or a
//! constant expression like `"-0.8^2"`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::interp::{canonicalize_tree, interpret, Expr};

use super::{Domain, GridSpec, OperatorTerm, PDEProblem, ResidualError, TermKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffSpec {
    Number(f64),
    Text(String),
}

impl Default for CoeffSpec {
    fn default() -> Self {
        CoeffSpec::Number(1.0)
    }
}

fn default_coeff() -> CoeffSpec {
    CoeffSpec::default()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(default = "default_coeff")]
    pub coeff: CoeffSpec,
    #[serde(default)]
    pub dx: u8,
    #[serde(default)]
    pub dy: u8,
    #[serde(default)]
    pub dt: u8,
    #[serde(default)]
    pub advection: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub x: (f64, f64),
    #[serde(default)]
    pub y: Option<(f64, f64)>,
    #[serde(default)]
    pub t: Option<(f64, f64)>,
}

fn default_beta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: DomainSpec,
    pub grid: GridSpec,
    pub terms: Vec<TermSpec>,
    #[serde(default)]
    pub forcing: Option<String>,
    #[serde(default)]
    pub ic: Option<String>,
    /// Dirichlet boundary value expression; defaults to zero.
    #[serde(default)]
    pub bc_value: Option<String>,
    #[serde(default)]
    pub analytical: Option<String>,
    /// When set, the forcing is derived from `analytical` symbolically and
    /// any explicit `forcing` entry is rejected.
    #[serde(default)]
    pub manufacture_forcing: bool,
    #[serde(default = "default_beta")]
    pub beta1: f64,
    #[serde(default = "default_beta")]
    pub beta2: f64,
}

fn parse_expr(field: &str, text: &str) -> Result<Expr, ResidualError> {
    interpret(text).map_err(|e| ResidualError::BadSpec(format!("{field}: {e}")))
}

fn coeff_value(c: &CoeffSpec) -> Result<f64, ResidualError> {
    match c {
        CoeffSpec::Number(v) => Ok(*v),
        CoeffSpec::Text(text) => match canonicalize_tree(&parse_expr("coeff", text)?) {
            Expr::Const(v) => Ok(v),
            other => Err(ResidualError::BadSpec(format!(
                "coefficient {text:?} does not fold to a constant ({other:?})"
            ))),
        },
    }
}

impl ProblemSpec {
    pub fn into_problem(self) -> Result<PDEProblem, ResidualError> {
        if self.terms.is_empty() {
            return Err(ResidualError::BadSpec("operator has no terms".into()));
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let coeff = coeff_value(&t.coeff)?;
            let kind = if t.advection {
                if t.dx != 0 || t.dy != 0 || t.dt != 0 {
                    return Err(ResidualError::BadSpec(
                        "advection term must not carry a derivative index".into(),
                    ));
                }
                TermKind::Advection
            } else {
                TermKind::Derivative {
                    dx: t.dx,
                    dy: t.dy,
                    dt: t.dt,
                }
            };
            terms.push(OperatorTerm { coeff, kind });
        }
        if self.domain.y.is_none() {
            for t in &terms {
                if let TermKind::Derivative { dy, .. } = t.kind {
                    if dy > 0 {
                        return Err(ResidualError::BadSpec(
                            "y-derivative in a 1D problem".into(),
                        ));
                    }
                }
            }
        }
        if self.domain.t.is_none() {
            for t in &terms {
                if let TermKind::Derivative { dt, .. } = t.kind {
                    if dt > 0 {
                        return Err(ResidualError::BadSpec(
                            "t-derivative in a steady problem".into(),
                        ));
                    }
                }
            }
            if self.ic.is_some() {
                return Err(ResidualError::BadSpec(
                    "initial condition on a steady problem".into(),
                ));
            }
        }
        let analytical = self
            .analytical
            .as_deref()
            .map(|s| parse_expr("analytical", s))
            .transpose()?;
        if self.manufacture_forcing {
            if self.forcing.is_some() {
                return Err(ResidualError::BadSpec(
                    "manufacture_forcing conflicts with an explicit forcing".into(),
                ));
            }
            if analytical.is_none() {
                return Err(ResidualError::BadSpec(
                    "manufacture_forcing needs an analytical solution".into(),
                ));
            }
        }
        let forcing = self
            .forcing
            .as_deref()
            .map(|s| parse_expr("forcing", s))
            .transpose()?;
        let ic = self
            .ic
            .as_deref()
            .map(|s| parse_expr("ic", s))
            .transpose()?;
        let bc_value = match self.bc_value.as_deref() {
            Some(s) => parse_expr("bc_value", s)?,
            None => Expr::Const(0.0),
        };
        let mut prob = PDEProblem {
            name: self.name,
            terms,
            forcing,
            domain: Domain {
                x: self.domain.x,
                y: self.domain.y,
                t: self.domain.t,
            },
            grid: self.grid,
            ic,
            bc_value,
            beta1: self.beta1,
            beta2: self.beta2,
            analytical,
        };
        if self.manufacture_forcing {
            prob.manufacture_forcing();
        }
        Ok(prob)
    }
}

/// Build a problem from JSON spec text.
pub fn problem_from_spec_str(json: &str) -> Result<PDEProblem, ResidualError> {
    let spec: ProblemSpec =
        serde_json::from_str(json).map_err(|e| ResidualError::BadSpec(e.to_string()))?;
    spec.into_problem()
}

/// Build a problem from a JSON spec file.
pub fn load_problem_spec(path: &Path) -> Result<PDEProblem, ResidualError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ResidualError::BadSpec(format!("cannot read {path:?}: {e}")))?;
    problem_from_spec_str(&text)
}
