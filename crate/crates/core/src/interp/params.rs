//! Constant extraction and rebinding for the refinement stage.
//!
//! Every float literal in a tree becomes a parameter slot (leftmost
//! first); `pi` and integer power exponents are structural and stay
//! fixed.  Gradients come from one forward-mode dual pass per slot.

use super::eval::{Dual, Value};
use super::{Expr, InterpError};

/// An expression with its constants lifted into parameter slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTemplate {
    /// Tree whose `Const` leaves were replaced by `Param(i)`.
    pub tree: Expr,
    /// Initial values, indexed by slot, in leftmost order of appearance.
    pub init: Vec<f64>,
}

impl ParamTemplate {
    pub fn len(&self) -> usize {
        self.init.len()
    }

    pub fn is_empty(&self) -> bool {
        self.init.is_empty()
    }
}

/// Lift every float literal into a parameter slot, leftmost first.
pub fn extract_constants(e: &Expr) -> ParamTemplate {
    let mut init = Vec::new();
    let tree = lift(e, &mut init);
    ParamTemplate { tree, init }
}

fn lift(e: &Expr, init: &mut Vec<f64>) -> Expr {
    use Expr::*;
    match e {
        Const(v) => {
            let i = init.len();
            init.push(*v);
            Param(i)
        }
        Pi | Var(_) | Param(_) => e.clone(),
        Add(a, b) => Add(Box::new(lift(a, init)), Box::new(lift(b, init))),
        Sub(a, b) => Sub(Box::new(lift(a, init)), Box::new(lift(b, init))),
        Mul(a, b) => Mul(Box::new(lift(a, init)), Box::new(lift(b, init))),
        Div(a, b) => Div(Box::new(lift(a, init)), Box::new(lift(b, init))),
        Neg(a) => Neg(Box::new(lift(a, init))),
        PowInt(a, n) => PowInt(Box::new(lift(a, init)), *n),
        Sin(a) => Sin(Box::new(lift(a, init))),
        Cos(a) => Cos(Box::new(lift(a, init))),
        Exp(a) => Exp(Box::new(lift(a, init))),
        Log(a) => Log(Box::new(lift(a, init))),
        Tanh(a) => Tanh(Box::new(lift(a, init))),
        Sqrt(a) => Sqrt(Box::new(lift(a, init))),
    }
}

/// Substitute concrete values back into a template's parameter slots.
pub fn bind_constants(template: &ParamTemplate, values: &[f64]) -> Result<Expr, InterpError> {
    if values.len() != template.len() {
        return Err(InterpError::DimensionMismatch {
            want: template.len(),
            got: values.len(),
        });
    }
    Ok(bind(&template.tree, values))
}

fn bind(e: &Expr, values: &[f64]) -> Expr {
    use Expr::*;
    match e {
        Param(i) => Const(values[*i]),
        Const(_) | Pi | Var(_) => e.clone(),
        Add(a, b) => Add(Box::new(bind(a, values)), Box::new(bind(b, values))),
        Sub(a, b) => Sub(Box::new(bind(a, values)), Box::new(bind(b, values))),
        Mul(a, b) => Mul(Box::new(bind(a, values)), Box::new(bind(b, values))),
        Div(a, b) => Div(Box::new(bind(a, values)), Box::new(bind(b, values))),
        Neg(a) => Neg(Box::new(bind(a, values))),
        PowInt(a, n) => PowInt(Box::new(bind(a, values)), *n),
        Sin(a) => Sin(Box::new(bind(a, values))),
        Cos(a) => Cos(Box::new(bind(a, values))),
        Exp(a) => Exp(Box::new(bind(a, values))),
        Log(a) => Log(Box::new(bind(a, values))),
        Tanh(a) => Tanh(Box::new(bind(a, values))),
        Sqrt(a) => Sqrt(Box::new(bind(a, values))),
    }
}

/// A scalar objective of the parameter vector that can be evaluated in any
/// [`Value`] type, so it can be differentiated with dual numbers.
pub trait ParamObjective {
    fn value<V: Value>(&self, params: &[V]) -> V;
}

/// Objective value and full gradient at `p`, one dual pass per slot.
pub fn grad_constants<O: ParamObjective>(obj: &O, p: &[f64]) -> (f64, Vec<f64>) {
    let value = obj.value::<f64>(p);
    let mut grad = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let duals: Vec<Dual<f64>> = p
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if j == i {
                    Dual::seed(v)
                } else {
                    Dual::constant(v)
                }
            })
            .collect();
        grad.push(obj.value::<Dual<f64>>(&duals).d);
    }
    (value, grad)
}
