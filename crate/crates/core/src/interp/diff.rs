//! Symbolic differentiation of expression trees.
//!
//! Smart constructors fold additive and multiplicative identities so that
//! repeated differentiation (for second-order operators) keeps trees
//! compact.  `pi` and `Param` nodes are treated as constants.

use super::{Expr, Var};

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Const(v) if *v == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Const(v) if *v == 1.0)
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        b
    } else if is_zero(&b) {
        a
    } else {
        Expr::Add(Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_zero(&b) {
        a
    } else if is_zero(&a) {
        neg(b)
    } else {
        Expr::Sub(Box::new(a), Box::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        Expr::Const(0.0)
    } else if is_one(&a) {
        b
    } else if is_one(&b) {
        a
    } else {
        Expr::Mul(Box::new(a), Box::new(b))
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        Expr::Const(0.0)
    } else if is_one(&b) {
        a
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

fn neg(a: Expr) -> Expr {
    if is_zero(&a) {
        Expr::Const(0.0)
    } else {
        Expr::Neg(Box::new(a))
    }
}

fn powi(a: Expr, n: i32) -> Expr {
    match n {
        0 => Expr::Const(1.0),
        1 => a,
        _ => Expr::PowInt(Box::new(a), n),
    }
}

/// First partial derivative with respect to `var`.
pub fn differentiate(e: &Expr, var: Var) -> Expr {
    use Expr::*;
    match e {
        Const(_) | Pi | Param(_) => Const(0.0),
        Var(v) => Const(if *v == var { 1.0 } else { 0.0 }),
        Add(a, b) => add(differentiate(a, var), differentiate(b, var)),
        Sub(a, b) => sub(differentiate(a, var), differentiate(b, var)),
        Mul(a, b) => add(
            mul(differentiate(a, var), (**b).clone()),
            mul((**a).clone(), differentiate(b, var)),
        ),
        Div(a, b) => {
            // (a'b - ab') / b^2
            let num = sub(
                mul(differentiate(a, var), (**b).clone()),
                mul((**a).clone(), differentiate(b, var)),
            );
            div(num, powi((**b).clone(), 2))
        }
        Neg(a) => neg(differentiate(a, var)),
        PowInt(a, n) => mul(
            mul(Const(*n as f64), powi((**a).clone(), n - 1)),
            differentiate(a, var),
        ),
        Sin(a) => mul(Cos(a.clone()), differentiate(a, var)),
        Cos(a) => neg(mul(Sin(a.clone()), differentiate(a, var))),
        Exp(a) => mul(Exp(a.clone()), differentiate(a, var)),
        Log(a) => div(differentiate(a, var), (**a).clone()),
        Tanh(a) => mul(
            sub(Const(1.0), powi(Tanh(a.clone()), 2)),
            differentiate(a, var),
        ),
        Sqrt(a) => div(
            differentiate(a, var),
            mul(Const(2.0), Sqrt(a.clone())),
        ),
    }
}
