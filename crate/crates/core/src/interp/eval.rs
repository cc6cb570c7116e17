//! Tree evaluation, generic over the scalar, plus forward-mode dual
//! numbers for parameter gradients.
//!
//! Domain violations (non-positive log argument, negative sqrt argument,
//! near-zero divisor, non-finite result) are flagged rather than raised:
//! grid evaluation returns a per-point flag so the residual can assign its
//! infinite-penalty sentinel.

use crate::scalar::Scalar;

use super::{Expr, Var};

/// Divisor magnitudes below this flag a domain violation.
pub const DIV_EPS: f64 = 1e-12;

/// Numeric type a tree can be evaluated in: plain scalars or dual numbers.
pub trait Value: Copy {
    fn lift(v: f64) -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn div(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    /// Primal (value) part as `f64`, for domain checks.
    fn primal(self) -> f64;
}

macro_rules! impl_value_for_float {
    ($t:ty) => {
        impl Value for $t {
            fn lift(v: f64) -> Self {
                v as $t
            }
            fn add(self, o: Self) -> Self {
                self + o
            }
            fn sub(self, o: Self) -> Self {
                self - o
            }
            fn mul(self, o: Self) -> Self {
                self * o
            }
            fn div(self, o: Self) -> Self {
                self / o
            }
            fn neg(self) -> Self {
                -self
            }
            fn powi(self, n: i32) -> Self {
                <$t>::powi(self, n)
            }
            fn sin(self) -> Self {
                <$t>::sin(self)
            }
            fn cos(self) -> Self {
                <$t>::cos(self)
            }
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            fn ln(self) -> Self {
                <$t>::ln(self)
            }
            fn tanh(self) -> Self {
                <$t>::tanh(self)
            }
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            fn primal(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_value_for_float!(f32);
impl_value_for_float!(f64);

use num_traits::Float;

/// Forward-mode dual number with a single tangent component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<S> {
    pub v: S,
    pub d: S,
}

impl<S: Scalar> Dual<S> {
    pub fn constant(v: S) -> Self {
        Dual { v, d: S::zero() }
    }

    pub fn seed(v: S) -> Self {
        Dual { v, d: S::one() }
    }
}

impl<S: Scalar> Value for Dual<S> {
    fn lift(v: f64) -> Self {
        Dual::constant(S::of_f64(v))
    }
    fn add(self, o: Self) -> Self {
        Dual {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
    fn sub(self, o: Self) -> Self {
        Dual {
            v: self.v - o.v,
            d: self.d - o.d,
        }
    }
    fn mul(self, o: Self) -> Self {
        Dual {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
    fn div(self, o: Self) -> Self {
        Dual {
            v: self.v / o.v,
            d: (self.d * o.v - self.v * o.d) / (o.v * o.v),
        }
    }
    fn neg(self) -> Self {
        Dual {
            v: -self.v,
            d: -self.d,
        }
    }
    fn powi(self, n: i32) -> Self {
        Dual {
            v: Float::powi(self.v, n),
            d: S::of_f64(n as f64) * Float::powi(self.v, n - 1) * self.d,
        }
    }
    fn sin(self) -> Self {
        Dual {
            v: Float::sin(self.v),
            d: Float::cos(self.v) * self.d,
        }
    }
    fn cos(self) -> Self {
        Dual {
            v: Float::cos(self.v),
            d: -Float::sin(self.v) * self.d,
        }
    }
    fn exp(self) -> Self {
        let e = Float::exp(self.v);
        Dual { v: e, d: e * self.d }
    }
    fn ln(self) -> Self {
        Dual {
            v: Float::ln(self.v),
            d: self.d / self.v,
        }
    }
    fn tanh(self) -> Self {
        let t = Float::tanh(self.v);
        Dual {
            v: t,
            d: (S::one() - t * t) * self.d,
        }
    }
    fn sqrt(self) -> Self {
        let r = Float::sqrt(self.v);
        Dual {
            v: r,
            d: self.d / (S::of_f64(2.0) * r),
        }
    }
    fn primal(self) -> f64 {
        self.v.to_f64_lossy()
    }
}

/// Variable bindings (and parameter slots) for one evaluation.
#[derive(Debug, Clone)]
pub struct EvalEnv<V> {
    pub x: V,
    pub y: V,
    pub t: V,
    pub params: Vec<V>,
}

impl<V: Value> EvalEnv<V> {
    pub fn point(x: f64, y: f64, t: f64) -> Self {
        EvalEnv {
            x: V::lift(x),
            y: V::lift(y),
            t: V::lift(t),
            params: Vec::new(),
        }
    }

    fn var(&self, v: Var) -> V {
        match v {
            Var::X => self.x,
            Var::Y => self.y,
            Var::T => self.t,
        }
    }
}

/// Evaluate the tree in `env`; sets `flag` on any domain violation.
pub fn eval<V: Value>(e: &Expr, env: &EvalEnv<V>, flag: &mut bool) -> V {
    let out = match e {
        Expr::Const(c) => V::lift(*c),
        Expr::Pi => V::lift(std::f64::consts::PI),
        Expr::Var(v) => env.var(*v),
        Expr::Param(i) => {
            debug_assert!(*i < env.params.len(), "unbound parameter slot {i}");
            env.params[*i]
        }
        Expr::Add(a, b) => eval(a, env, flag).add(eval(b, env, flag)),
        Expr::Sub(a, b) => eval(a, env, flag).sub(eval(b, env, flag)),
        Expr::Mul(a, b) => eval(a, env, flag).mul(eval(b, env, flag)),
        Expr::Div(a, b) => {
            let num = eval(a, env, flag);
            let den = eval(b, env, flag);
            if den.primal().abs() < DIV_EPS {
                *flag = true;
            }
            num.div(den)
        }
        Expr::Neg(a) => eval(a, env, flag).neg(),
        Expr::PowInt(a, n) => {
            let base = eval(a, env, flag);
            if *n < 0 && base.primal().abs() < DIV_EPS {
                *flag = true;
            }
            base.powi(*n)
        }
        Expr::Sin(a) => eval(a, env, flag).sin(),
        Expr::Cos(a) => eval(a, env, flag).cos(),
        Expr::Exp(a) => eval(a, env, flag).exp(),
        Expr::Log(a) => {
            let arg = eval(a, env, flag);
            if arg.primal() <= 0.0 {
                *flag = true;
            }
            arg.ln()
        }
        Expr::Tanh(a) => eval(a, env, flag).tanh(),
        Expr::Sqrt(a) => {
            let arg = eval(a, env, flag);
            if arg.primal() < 0.0 {
                *flag = true;
            }
            arg.sqrt()
        }
    };
    if !out.primal().is_finite() {
        *flag = true;
    }
    out
}

/// Evaluate at a single (x, y, t) point with no parameters.
pub fn eval_point<S: Scalar + Value>(e: &Expr, x: S, y: S, t: S) -> (S, bool) {
    let env = EvalEnv {
        x,
        y,
        t,
        params: Vec::new(),
    };
    let mut flag = false;
    let v = eval(e, &env, &mut flag);
    (v, flag)
}

/// Evaluate over a list of points; returns values and per-point domain
/// flags.
pub fn eval_grid<S: Scalar + Value>(e: &Expr, points: &[(S, S, S)]) -> (Vec<S>, Vec<bool>) {
    let mut vals = Vec::with_capacity(points.len());
    let mut flags = Vec::with_capacity(points.len());
    for &(x, y, t) in points {
        let (v, f) = eval_point(e, x, y, t);
        vals.push(v);
        flags.push(f);
    }
    (vals, flags)
}
