//! The built-in benchmark problem catalog.
//!
//! Manufactured problems carry their exact solution; when that solution
//! does not solve the homogeneous equation, the forcing `f = S[u_true]`
//! is built symbolically once at construction.  Poisson–Gauss problems
//! have no analytical solution; they are scored against a finite
//! difference reference instead.

use crate::interp::{interpret, Expr};

use super::{ic_from_truth, Domain, GridSpec, OperatorTerm, PDEProblem};

fn parse(text: &str) -> Expr {
    interpret(text).expect("builtin expression parses")
}

/// Gaussian-bump source centers per problem size.
pub(crate) fn pg_centers(n: usize) -> Vec<(f64, f64)> {
    let all = [(0.3, 0.8), (0.7, 0.2), (0.5, 0.2), (0.4, 0.6)];
    all[..n].to_vec()
}

fn pg_source(n: usize) -> String {
    // σ = 0.1 so 2σ² = 0.02.
    pg_centers(n)
        .iter()
        .map(|(cx, cy)| format!("exp(-((x-{cx})^2+(y-{cy})^2)/0.02)"))
        .collect::<Vec<_>>()
        .join("+")
}

fn manufactured(
    name: &str,
    terms: Vec<OperatorTerm>,
    truth_text: &str,
    domain: Domain,
    grid: GridSpec,
    needs_forcing: bool,
) -> PDEProblem {
    let truth = parse(truth_text);
    let ic = domain
        .t
        .map(|(t0, _)| ic_from_truth(&truth, t0));
    let mut prob = PDEProblem {
        name: name.to_string(),
        terms,
        forcing: None,
        domain,
        grid,
        ic,
        bc_value: truth.clone(),
        beta1: 1.0,
        beta2: 1.0,
        analytical: Some(truth),
    };
    if needs_forcing {
        prob.manufacture_forcing();
    }
    prob
}

fn poisson_gauss(n: usize) -> PDEProblem {
    PDEProblem {
        name: format!("pg{n}"),
        terms: vec![
            OperatorTerm::derivative(-1.0, 2, 0, 0),
            OperatorTerm::derivative(-1.0, 0, 2, 0),
        ],
        forcing: Some(parse(&pg_source(n))),
        domain: Domain {
            x: (0.0, 1.0),
            y: Some((0.0, 1.0)),
            t: None,
        },
        grid: GridSpec {
            nx: 100,
            ny: Some(100),
            nt: None,
        },
        ic: None,
        bc_value: Expr::Const(0.0),
        beta1: 1.0,
        beta2: 1.0,
        analytical: None,
    }
}

/// The full benchmark catalog.
pub fn builtin_problems() -> Vec<PDEProblem> {
    vec![
        // u_t + u u_x − ν u_xx = 0, ν = 0.01; the traveling-wave truth
        // solves the homogeneous equation exactly.
        manufactured(
            "burgers",
            vec![
                OperatorTerm::derivative(1.0, 0, 0, 1),
                OperatorTerm::advection(1.0),
                OperatorTerm::derivative(-0.01, 2, 0, 0),
            ],
            "0.86+0.6*tanh(25.8*t-30*x+9.9)",
            Domain {
                x: (-5.0, 5.0),
                y: None,
                t: Some((0.0, 2.0)),
            },
            GridSpec {
                nx: 128,
                ny: None,
                nt: Some(128),
            },
            false,
        ),
        // u_t − κ u_xx = 0, κ = 0.697; three exact eigenmodes.
        manufactured(
            "diffusion",
            vec![
                OperatorTerm::derivative(1.0, 0, 0, 1),
                OperatorTerm::derivative(-0.697, 2, 0, 0),
            ],
            "3.974*(sin(pi*x/1.397)*exp(-pi^2*0.697/1.397^2*t)\
             -sin(3*pi*x/1.397)*exp(-9*pi^2*0.697/1.397^2*t)\
             +sin(5*pi*x/1.397)*exp(-25*pi^2*0.697/1.397^2*t))",
            Domain {
                x: (0.0, 1.397),
                y: None,
                t: Some((0.0, 1.0)),
            },
            GridSpec {
                nx: 128,
                ny: None,
                nt: Some(128),
            },
            false,
        ),
        // u_tt + u_t − c²(u_xx + u_yy), c = 0.8; the radial decaying wave
        // does not solve the homogeneous equation, so the forcing is
        // manufactured.
        manufactured(
            "damping_wave",
            vec![
                OperatorTerm::derivative(1.0, 0, 0, 2),
                OperatorTerm::derivative(1.0, 0, 0, 1),
                OperatorTerm::derivative(-0.64, 2, 0, 0),
                OperatorTerm::derivative(-0.64, 0, 2, 0),
            ],
            "exp(-0.45*t)*cos(0.4*t-2.5*sqrt((0.2*x+1)^2+(0.2*y-1)^2))",
            Domain {
                x: (-8.0, 8.0),
                y: Some((-8.0, 8.0)),
                t: Some((0.0, 4.0)),
            },
            GridSpec {
                nx: 64,
                ny: Some(64),
                nt: Some(64),
            },
            true,
        ),
        poisson_gauss(2),
        poisson_gauss(3),
        poisson_gauss(4),
        // u_xx + u_yy = f with u = sin(πx)sin(πy); manufactured forcing.
        manufactured(
            "poisson1",
            vec![
                OperatorTerm::derivative(1.0, 2, 0, 0),
                OperatorTerm::derivative(1.0, 0, 2, 0),
            ],
            "sin(pi*x)*sin(pi*y)",
            Domain {
                x: (0.0, 1.0),
                y: Some((0.0, 1.0)),
                t: None,
            },
            GridSpec {
                nx: 64,
                ny: Some(64),
                nt: None,
            },
            true,
        ),
        // u_t + u_x + u_y = 0; the two traveling sines solve it exactly.
        manufactured(
            "advection3",
            vec![
                OperatorTerm::derivative(1.0, 0, 0, 1),
                OperatorTerm::derivative(1.0, 1, 0, 0),
                OperatorTerm::derivative(1.0, 0, 1, 0),
            ],
            "sin(x-t)+sin(y-t)",
            Domain {
                x: (0.0, 1.0),
                y: Some((0.0, 1.0)),
                t: Some((0.0, 2.0)),
            },
            GridSpec {
                nx: 64,
                ny: Some(64),
                nt: Some(64),
            },
            false,
        ),
        // u_tt − (u_xx + u_yy) = f; manufactured forcing.
        manufactured(
            "wave2d",
            vec![
                OperatorTerm::derivative(1.0, 0, 0, 2),
                OperatorTerm::derivative(-1.0, 2, 0, 0),
                OperatorTerm::derivative(-1.0, 0, 2, 0),
            ],
            "exp(x^2)*sin(y)*exp(-0.5*t)",
            Domain {
                x: (-1.0, 1.0),
                y: Some((-1.0, 1.0)),
                t: Some((0.0, 1.0)),
            },
            GridSpec {
                nx: 8,
                ny: Some(8),
                nt: Some(8),
            },
            true,
        ),
    ]
}

/// Look up a catalog problem by name (case-insensitive; `-`/`_` and the
/// damped/damping spelling both accepted).
pub fn builtin_problem(name: &str) -> Option<PDEProblem> {
    let norm: String = name
        .to_ascii_lowercase()
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect();
    let norm = match norm.as_str() {
        "dampedwave" | "dampingwave" => "dampingwave".to_string(),
        other => other.to_string(),
    };
    builtin_problems().into_iter().find(|p| {
        let pn: String = p
            .name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        pn == norm
    })
}
