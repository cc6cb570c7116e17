//! PDE problem definitions and the discretized augmented residual.
//!
//! A problem is the operator `S[u] = Σ coeff · term(u) − f`, a box domain
//! with uniform tensor-product grids (endpoints included), Dirichlet
//! boundary data, and an optional initial condition.  The score of a
//! candidate `u` is
//!
//! ```text
//! R(u) = mean over M×T of S[u]²
//!      + β₁ · mean over M_IC of (u(·,0) − u₀)²
//!      + β₂ · mean over M_BC×T of (u − g)²
//! ```
//!
//! with an infinite sentinel if any evaluation point is domain-flagged, so
//! candidate ranking stays total.  Derivatives are symbolic, which is what
//! makes manufactured solutions score exact zeros.

mod fd;
mod problems;
mod spec;

pub use fd::poisson_fd_reference;
pub use problems::{builtin_problem, builtin_problems};
pub use spec::{load_problem_spec, problem_from_spec_str, ProblemSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::{differentiate, eval_point, substitute, Expr, Value, Var};
use crate::scalar::Scalar;
use crate::Real;

#[derive(Debug, Error)]
pub enum ResidualError {
    #[error("reference has (near-)zero norm")]
    ZeroReference,
    #[error("reference grid is malformed: {0}")]
    MalformedReference(String),
    #[error("problem spec error: {0}")]
    BadSpec(String),
}

/// One signed operator term: `coeff · ∂^dx_x ∂^dy_y ∂^dt_t u`, or the
/// Burgers advection `coeff · u·∂x u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TermKind {
    Derivative { dx: u8, dy: u8, dt: u8 },
    Advection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorTerm {
    pub coeff: f64,
    pub kind: TermKind,
}

impl OperatorTerm {
    pub fn derivative(coeff: f64, dx: u8, dy: u8, dt: u8) -> Self {
        OperatorTerm {
            coeff,
            kind: TermKind::Derivative { dx, dy, dt },
        }
    }

    pub fn advection(coeff: f64) -> Self {
        OperatorTerm {
            coeff,
            kind: TermKind::Advection,
        }
    }

    /// Apply the term symbolically to `u`.
    pub fn apply(&self, u: &Expr) -> Expr {
        let inner = match self.kind {
            TermKind::Derivative { dx, dy, dt } => {
                let mut d = u.clone();
                for _ in 0..dx {
                    d = differentiate(&d, Var::X);
                }
                for _ in 0..dy {
                    d = differentiate(&d, Var::Y);
                }
                for _ in 0..dt {
                    d = differentiate(&d, Var::T);
                }
                d
            }
            TermKind::Advection => Expr::Mul(
                Box::new(u.clone()),
                Box::new(differentiate(u, Var::X)),
            ),
        };
        if self.coeff == 1.0 {
            inner
        } else {
            Expr::Mul(Box::new(Expr::Const(self.coeff)), Box::new(inner))
        }
    }
}

/// Uniform tensor-product grid sizes (points per axis, endpoints
/// included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: Option<usize>,
    pub nt: Option<usize>,
}

/// Box domain; `y` and `t` are absent for lower-dimensional or steady
/// problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x: (f64, f64),
    pub y: Option<(f64, f64)>,
    pub t: Option<(f64, f64)>,
}

/// A PDE problem: operator, forcing, domain, conditions, grids.
/// Immutable after construction; scoring is pure.
#[derive(Debug, Clone)]
pub struct PDEProblem {
    pub name: String,
    pub terms: Vec<OperatorTerm>,
    /// Cached forcing `f`; `None` means zero.  For manufactured problems
    /// this is `S[u_true]` built symbolically once.
    pub forcing: Option<Expr>,
    pub domain: Domain,
    pub grid: GridSpec,
    /// Initial condition `u₀` over the spatial variables; absent for
    /// steady problems.
    pub ic: Option<Expr>,
    /// Dirichlet boundary value `g(x, y, t)`.
    pub bc_value: Expr,
    pub beta1: f64,
    pub beta2: f64,
    /// Known exact solution, if the problem was manufactured.
    pub analytical: Option<Expr>,
}

impl PDEProblem {
    pub fn is_steady(&self) -> bool {
        self.domain.t.is_none()
    }

    pub fn is_2d(&self) -> bool {
        self.domain.y.is_some()
    }

    /// Variables a candidate may mention.
    pub fn variables(&self) -> Vec<Var> {
        let mut v = vec![Var::X];
        if self.is_2d() {
            v.push(Var::Y);
        }
        if !self.is_steady() {
            v.push(Var::T);
        }
        v
    }

    /// Symbolic `S[u]` including the cached forcing.
    pub fn operator_applied(&self, u: &Expr) -> Expr {
        let mut acc: Option<Expr> = None;
        for term in &self.terms {
            let t = term.apply(u);
            acc = Some(match acc {
                None => t,
                Some(a) => Expr::Add(Box::new(a), Box::new(t)),
            });
        }
        let applied = acc.unwrap_or(Expr::Const(0.0));
        match &self.forcing {
            None => applied,
            Some(f) => Expr::Sub(Box::new(applied), Box::new(f.clone())),
        }
    }

    /// Derive the cached forcing from a manufactured truth:
    /// `f = S_terms[u_true]` so that `u_true` scores an exact zero.
    pub fn manufacture_forcing(&mut self) {
        let truth = self
            .analytical
            .clone()
            .expect("manufactured forcing needs an analytical solution");
        self.forcing = None;
        let f = self.operator_applied(&truth);
        self.forcing = Some(f);
    }

    pub fn x_points(&self) -> Vec<f64> {
        linspace(self.domain.x.0, self.domain.x.1, self.grid.nx)
    }

    pub fn y_points(&self) -> Vec<f64> {
        match self.domain.y {
            Some((a, b)) => linspace(a, b, self.grid.ny.unwrap_or(self.grid.nx)),
            None => vec![0.0],
        }
    }

    pub fn t_points(&self) -> Vec<f64> {
        match self.domain.t {
            Some((a, b)) => linspace(a, b, self.grid.nt.unwrap_or(self.grid.nx)),
            None => vec![0.0],
        }
    }

    /// Spatial grid (x, y) in row-major order, y fixed to 0 in 1D.
    pub fn spatial_points(&self) -> Vec<(f64, f64)> {
        let xs = self.x_points();
        let ys = self.y_points();
        let mut pts = Vec::with_capacity(xs.len() * ys.len());
        for &x in &xs {
            for &y in &ys {
                pts.push((x, y));
            }
        }
        pts
    }

    /// Spatial boundary points: all faces of the box.
    pub fn boundary_points(&self) -> Vec<(f64, f64)> {
        let (xa, xb) = self.domain.x;
        match self.domain.y {
            None => vec![(xa, 0.0), (xb, 0.0)],
            Some((ya, yb)) => {
                let mut pts = Vec::new();
                for &(x, y) in &self.spatial_points() {
                    if x == xa || x == xb || y == ya || y == yb {
                        pts.push((x, y));
                    }
                }
                pts
            }
        }
    }

    /// All (x, y, t) evaluation points of the interior term, row-major.
    pub fn collocation_points(&self) -> Vec<(f64, f64, f64)> {
        let ts = self.t_points();
        let mut pts = Vec::new();
        for &(x, y) in &self.spatial_points() {
            for &t in &ts {
                pts.push((x, y, t));
            }
        }
        pts
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "grids include both endpoints");
    (0..n)
        .map(|i| a + (b - a) * (i as f64) / ((n - 1) as f64))
        .collect()
}

/// The discretized augmented residual `R(u)`; `+∞` when any evaluation
/// point is domain-flagged.
pub fn residual(u: &Expr, prob: &PDEProblem) -> f64 {
    residual_in::<Real>(u, prob)
}

/// Generic-scalar residual kernel.
pub fn residual_in<S: Scalar + Value>(u: &Expr, prob: &PDEProblem) -> f64 {
    let s_tree = prob.operator_applied(u);
    let mut flagged = false;

    // Interior PDE term: mean over M × T.
    let mut pde_sum = S::zero();
    let mut pde_count = 0usize;
    let ts = prob.t_points();
    for &(x, y) in &prob.spatial_points() {
        for &t in &ts {
            let (v, f) = eval_point(&s_tree, S::of_f64(x), S::of_f64(y), S::of_f64(t));
            flagged |= f;
            pde_sum = pde_sum + v * v;
            pde_count += 1;
        }
    }
    let mut total = pde_sum.to_f64_lossy() / pde_count as f64;

    // Initial-condition misfit.
    if let Some(ic) = &prob.ic {
        let t0 = prob.domain.t.map(|(a, _)| a).unwrap_or(0.0);
        let mut sum = S::zero();
        let mut count = 0usize;
        for &(x, y) in &prob.spatial_points() {
            let (uv, fu) = eval_point(u, S::of_f64(x), S::of_f64(y), S::of_f64(t0));
            let (iv, fi) = eval_point(ic, S::of_f64(x), S::of_f64(y), S::of_f64(t0));
            flagged |= fu | fi;
            let d = uv - iv;
            sum = sum + d * d;
            count += 1;
        }
        total += prob.beta1 * sum.to_f64_lossy() / count as f64;
    }

    // Boundary misfit over M_BC × T.
    let boundary = prob.boundary_points();
    if !boundary.is_empty() {
        let mut sum = S::zero();
        let mut count = 0usize;
        for &(x, y) in &boundary {
            for &t in &ts {
                let (uv, fu) = eval_point(u, S::of_f64(x), S::of_f64(y), S::of_f64(t));
                let (gv, fg) =
                    eval_point(&prob.bc_value, S::of_f64(x), S::of_f64(y), S::of_f64(t));
                flagged |= fu | fg;
                let d = uv - gv;
                sum = sum + d * d;
                count += 1;
            }
        }
        total += prob.beta2 * sum.to_f64_lossy() / count as f64;
    }

    if flagged || !total.is_finite() {
        f64::INFINITY
    } else {
        total
    }
}

/// A file-based reference solution on scattered or gridded points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceGrid {
    /// Column layout: `x,y,value` for steady 2D fields, `x,t,value` for
    /// 1+1D space-time fields.
    pub coords: Vec<(f64, f64)>,
    pub values: Vec<f64>,
    /// Second coordinate meaning: `"y"` or `"t"`.
    pub second_axis: String,
    pub provenance: String,
}

impl ReferenceGrid {
    pub fn to_csv(&self) -> String {
        let mut out = format!("x,{},value\n", self.second_axis);
        for (i, &(a, b)) in self.coords.iter().enumerate() {
            out.push_str(&format!("{a},{b},{}\n", self.values[i]));
        }
        out
    }

    pub fn from_csv(text: &str, provenance: &str) -> Result<ReferenceGrid, ResidualError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| ResidualError::MalformedReference("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
        if cols.len() != 3 || cols[0] != "x" || cols[2] != "value" || !(cols[1] == "y" || cols[1] == "t") {
            return Err(ResidualError::MalformedReference(format!(
                "bad header: {header}"
            )));
        }
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(ResidualError::MalformedReference(format!(
                    "line {}: expected 3 fields",
                    lineno + 2
                )));
            }
            let parse = |s: &str| -> Result<f64, ResidualError> {
                let v: f64 = s.trim().parse().map_err(|_| {
                    ResidualError::MalformedReference(format!("line {}: {s}", lineno + 2))
                })?;
                if !v.is_finite() {
                    return Err(ResidualError::MalformedReference(format!(
                        "line {}: non-finite value",
                        lineno + 2
                    )));
                }
                Ok(v)
            };
            coords.push((parse(parts[0])?, parse(parts[1])?));
            values.push(parse(parts[2])?);
        }
        Ok(ReferenceGrid {
            coords,
            values,
            second_axis: cols[1].to_string(),
            provenance: provenance.to_string(),
        })
    }
}

/// What a candidate is compared against.
#[derive(Debug, Clone)]
pub enum Reference {
    Analytic(Expr),
    Grid(ReferenceGrid),
}

/// Discrete relative L2 error `‖u − ref‖₂ / ‖ref‖₂`.
///
/// For an analytic reference the norm runs over `points`; for a file
/// reference it runs over the file's own coordinates (the second column
/// binding `y` or `t` as declared in its header).
pub fn relative_l2(
    u: &Expr,
    reference: &Reference,
    points: &[(f64, f64, f64)],
) -> Result<f64, ResidualError> {
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    match reference {
        Reference::Analytic(r) => {
            for &(x, y, t) in points {
                let (uv, _) = eval_point(u, x, y, t);
                let (rv, _) = eval_point(r, x, y, t);
                num += (uv - rv) * (uv - rv);
                den += rv * rv;
            }
        }
        Reference::Grid(g) => {
            if g.coords.len() != g.values.len() {
                return Err(ResidualError::MalformedReference(
                    "coordinate/value shape mismatch".into(),
                ));
            }
            let time_axis = g.second_axis == "t";
            for (i, &(a, b)) in g.coords.iter().enumerate() {
                let (y, t) = if time_axis { (0.0, b) } else { (b, 0.0) };
                let (uv, _) = eval_point(u, a, y, t);
                let rv = g.values[i];
                num += (uv - rv) * (uv - rv);
                den += rv * rv;
            }
        }
    }
    if den <= f64::MIN_POSITIVE {
        return Err(ResidualError::ZeroReference);
    }
    Ok((num / den).sqrt())
}

/// Initial condition extracted from a space-time truth: `u_true` at the
/// initial time.
pub fn ic_from_truth(truth: &Expr, t0: f64) -> Expr {
    substitute(truth, Var::T, &Expr::Const(t0))
}
