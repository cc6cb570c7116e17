//! Stage II: multi-start refinement of the incumbent's numeric constants.

use super::{SearchConfig, SearchError};
use crate::interp::{
    bind_constants, extract_constants, grad_constants, interpret, print, EvalEnv, ParamObjective,
    ParamTemplate, Value,
};
use crate::residual::PDEProblem;
use crate::Real;
use rand::Rng;
use rand_distr::StandardNormal;

/// The discretized residual as a differentiable function of the parameter
/// vector of a [`ParamTemplate`]: the same interior/IC/BC quadrature as
/// the scoring residual, evaluated in any [`Value`] type.
pub struct ResidualObjective<'a> {
    prob: &'a PDEProblem,
    /// `S[u]` with parameter slots preserved (forcing folded in).
    s_tree: crate::interp::Expr,
    /// `u` itself with parameter slots.
    u_tree: crate::interp::Expr,
}

impl<'a> ResidualObjective<'a> {
    pub fn new(template: &ParamTemplate, prob: &'a PDEProblem) -> Self {
        ResidualObjective {
            prob,
            s_tree: prob.operator_applied(&template.tree),
            u_tree: template.tree.clone(),
        }
    }
}

impl ParamObjective for ResidualObjective<'_> {
    fn value<V: Value>(&self, params: &[V]) -> V {
        let prob = self.prob;
        let mut flag = false;
        let env_at = |x: f64, y: f64, t: f64, params: &[V]| EvalEnv {
            x: V::lift(x),
            y: V::lift(y),
            t: V::lift(t),
            params: params.to_vec(),
        };

        let ts = prob.t_points();
        let spatial = prob.spatial_points();

        let mut pde = V::lift(0.0);
        for &(x, y) in &spatial {
            for &t in &ts {
                let v = crate::interp::eval(&self.s_tree, &env_at(x, y, t, params), &mut flag);
                pde = pde.add(v.mul(v));
            }
        }
        let mut total = pde.mul(V::lift(1.0 / (spatial.len() * ts.len()) as f64));

        if let Some(ic) = &prob.ic {
            let t0 = prob.domain.t.map(|(a, _)| a).unwrap_or(0.0);
            let mut sum = V::lift(0.0);
            for &(x, y) in &spatial {
                let env = env_at(x, y, t0, params);
                let u = crate::interp::eval(&self.u_tree, &env, &mut flag);
                let i = crate::interp::eval(ic, &env, &mut flag);
                let d = u.sub(i);
                sum = sum.add(d.mul(d));
            }
            total = total.add(sum.mul(V::lift(prob.beta1 / spatial.len() as f64)));
        }

        let boundary = prob.boundary_points();
        if !boundary.is_empty() {
            let mut sum = V::lift(0.0);
            for &(x, y) in &boundary {
                for &t in &ts {
                    let env = env_at(x, y, t, params);
                    let u = crate::interp::eval(&self.u_tree, &env, &mut flag);
                    let g = crate::interp::eval(&prob.bc_value, &env, &mut flag);
                    let d = u.sub(g);
                    sum = sum.add(d.mul(d));
                }
            }
            total = total.add(sum.mul(V::lift(prob.beta2 / (boundary.len() * ts.len()) as f64)));
        }

        if flag {
            V::lift(f64::INFINITY)
        } else {
            total
        }
    }
}

/// Result of Stage II refinement.
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    /// Incumbent with the best constants bound back in.
    pub expr: String,
    pub params: Vec<f64>,
    /// Residual `R` at the returned constants.
    pub residual: f64,
    /// Winning start index.
    pub start: usize,
    /// Steps taken by the winning start.
    pub steps: usize,
    /// Frozen-incumbent hull penalty (recorded, not optimized).
    pub hull_penalty: Option<f64>,
}

/// Multi-start Adam on the numeric constants of `expr_text` against the
/// residual of `problem`.  Starts are drawn from
/// `N(p̄, diag((η|p̄|)²))`; each runs first-order moment-based steps with
/// exponential learning-rate decay and stops early once `√R < ε_tol`.
/// A start that produces a non-finite residual is discarded.
pub fn stage2_refine<R: Rng>(
    expr_text: &str,
    problem: &PDEProblem,
    config: &SearchConfig,
    rng: &mut R,
    hull_penalty: Option<f64>,
) -> Result<RefineOutcome, SearchError> {
    let tree = interpret(expr_text)?;
    let template = extract_constants(&tree);
    if template.is_empty() {
        let r = crate::residual::residual(&tree, problem);
        return Ok(RefineOutcome {
            expr: expr_text.to_string(),
            params: Vec::new(),
            residual: r,
            start: 0,
            steps: 0,
            hull_penalty,
        });
    }

    let obj = ResidualObjective::new(&template, problem);
    let p_bar = template.init.clone();

    // Already below tolerance at the extracted constants: done.
    let r0 = obj.value::<Real>(&p_bar);
    if r0.is_finite() && r0.sqrt() < config.eps_tol {
        return Ok(RefineOutcome {
            expr: print(&bind_constants(&template, &p_bar)?),
            params: p_bar,
            residual: r0,
            start: 0,
            steps: 0,
            hull_penalty,
        });
    }

    let decay = if config.refine_steps > 1 {
        (config.lr_end / config.lr0).powf(1.0 / (config.refine_steps - 1) as f64)
    } else {
        1.0
    };

    let mut best: Option<(f64, Vec<f64>, usize, usize)> = None;
    for s in 0..config.starts {
        let mut p: Vec<f64> = p_bar
            .iter()
            .map(|&v| {
                let noise: f64 = rng.sample(StandardNormal);
                v + config.eta * v.abs() * noise
            })
            .collect();
        // Adam state.
        let mut m = vec![0.0; p.len()];
        let mut v2 = vec![0.0; p.len()];
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let mut lr = config.lr0;
        let mut start_best: Option<(f64, Vec<f64>, usize)> = None;
        let mut diverged = false;
        for step in 0..config.refine_steps {
            let (r, grad) = grad_constants(&obj, &p);
            if !r.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                diverged = true;
                break;
            }
            if start_best.as_ref().is_none_or(|(rb, _, _)| r < *rb) {
                start_best = Some((r, p.clone(), step));
            }
            if r.sqrt() < config.eps_tol {
                break;
            }
            let t = (step + 1) as f64;
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                v2[i] = b2 * v2[i] + (1.0 - b2) * grad[i] * grad[i];
                let mh = m[i] / (1.0 - b1.powf(t));
                let vh = v2[i] / (1.0 - b2.powf(t));
                p[i] -= lr * mh / (vh.sqrt() + eps);
            }
            lr *= decay;
        }
        if diverged {
            continue;
        }
        // Score the final iterate too.
        let r_final = obj.value::<Real>(&p);
        if r_final.is_finite()
            && start_best.as_ref().is_none_or(|(rb, _, _)| r_final < *rb)
        {
            start_best = Some((r_final, p.clone(), config.refine_steps));
        }
        if let Some((r, pb, steps)) = start_best {
            if best.as_ref().is_none_or(|(rb, _, _, _)| r < *rb) {
                best = Some((r, pb, s, steps));
            }
        }
    }

    let (residual, params, start, steps) = best.ok_or(SearchError::RefinementFailed)?;
    let expr = print(&bind_constants(&template, &params)?);
    Ok(RefineOutcome {
        expr,
        params,
        residual,
        start,
        steps,
        hull_penalty,
    })
}
