//! The interpretation map: expression text -> evaluable, differentiable
//! expression tree.
//!
//! Trees are immutable; evaluation, differentiation, and constant
//! extraction are pure functions.  `pi` is a protected symbolic node and
//! is never folded into a float literal.

mod diff;
mod eval;
mod params;

pub use diff::differentiate;
pub use eval::{eval, eval_grid, eval_point, Dual, EvalEnv, Value};
pub use params::{bind_constants, extract_constants, grad_constants, ParamObjective, ParamTemplate};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("text is not in the expression language: {0}")]
    NotInLanguage(String),
    #[error("parameter vector has length {got}, template has {want} slots")]
    DimensionMismatch { want: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Var {
    X,
    Y,
    T,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::T => "t",
        }
    }

    pub fn from_name(s: &str) -> Option<Var> {
        match s {
            "x" => Some(Var::X),
            "y" => Some(Var::Y),
            "t" => Some(Var::T),
            _ => None,
        }
    }
}

/// Parsed symbolic expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Pi,
    Var(Var),
    /// Trainable parameter slot; produced by constant extraction, never by
    /// text parsing.
    Param(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    PowInt(Box<Expr>, i32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Tanh(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    /// Variables present in the tree, in {x, y, t} order.
    pub fn variables(&self) -> Vec<Var> {
        let mut present = [false; 3];
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                present[*v as usize] = true;
            }
        });
        [Var::X, Var::Y, Var::T]
            .into_iter()
            .filter(|v| present[*v as usize])
            .collect()
    }

    pub fn contains_var(&self, var: Var) -> bool {
        self.variables().contains(&var)
    }

    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Pi | Expr::Var(_) | Expr::Param(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Neg(a)
            | Expr::PowInt(a, _)
            | Expr::Sin(a)
            | Expr::Cos(a)
            | Expr::Exp(a)
            | Expr::Log(a)
            | Expr::Tanh(a)
            | Expr::Sqrt(a) => a.visit(f),
        }
    }

    /// Maximum absolute integer power exponent in the tree.
    pub fn max_pow(&self) -> i32 {
        let mut m = 0;
        self.visit(&mut |e| {
            if let Expr::PowInt(_, n) = e {
                m = m.max(n.abs());
            }
        });
        m
    }
}

// ---------------------------------------------------------------------------
// Lexing and parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    /// Raw integer literal (digits only), kept distinct so exponents stay
    /// integers.
    Int(i64),
    Pi,
    Var(Var),
    Func(&'static str),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<Tok>, InterpError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let err = |i: usize| InterpError::NotInLanguage(format!("{text} (at byte {i})"));
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut is_int = true;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                is_int = false;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text_num: String = chars[start..i].iter().collect();
            // Optional scientific-notation suffix e-1 .. e-4.
            if let Some(k) = sci_suffix(&chars, i) {
                let base: f64 = text_num.parse().map_err(|_| err(start))?;
                toks.push(Tok::Num(base * 10f64.powi(-(k as i32))));
                i += 3;
            } else if is_int {
                toks.push(Tok::Int(text_num.parse().map_err(|_| err(start))?));
            } else {
                toks.push(Tok::Num(text_num.parse().map_err(|_| err(start))?));
            }
            continue;
        }
        if c.is_ascii_alphabetic() {
            if let Some(k) = sci_suffix(&chars, i) {
                toks.push(Tok::Num(10f64.powi(-(k as i32))));
                i += 3;
                continue;
            }
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphabetic() {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            match word.as_str() {
                "pi" => toks.push(Tok::Pi),
                "x" | "y" | "t" => toks.push(Tok::Var(Var::from_name(&word).unwrap())),
                "sin" => toks.push(Tok::Func("sin")),
                "cos" => toks.push(Tok::Func("cos")),
                "exp" => toks.push(Tok::Func("exp")),
                "log" => toks.push(Tok::Func("log")),
                "tanh" => toks.push(Tok::Func("tanh")),
                "sqrt" => toks.push(Tok::Func("sqrt")),
                _ => return Err(err(start)),
            }
            continue;
        }
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ => return Err(err(i)),
        };
        toks.push(tok);
        i += 1;
    }
    Ok(toks)
}

fn sci_suffix(chars: &[char], i: usize) -> Option<u32> {
    if i + 2 < chars.len() && chars[i] == 'e' && chars[i + 1] == '-' {
        let d = chars[i + 2].to_digit(10)?;
        // Only e-1..e-4 are in the alphabet; and it must not be the start
        // of a longer word like "e-1abc".
        if (1..=4).contains(&d) && chars.get(i + 3).map_or(true, |c| !c.is_ascii_alphanumeric()) {
            return Some(d);
        }
    }
    None
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn err(&self) -> InterpError {
        InterpError::NotInLanguage(format!("{} (token {})", self.text, self.pos))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: &Tok) -> Result<(), InterpError> {
        if self.peek() == Some(tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err())
        }
    }

    fn expr(&mut self) -> Result<Expr, InterpError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, InterpError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, InterpError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, InterpError> {
        let mut base = self.primary()?;
        while self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            base = self.apply_power(base)?;
        }
        Ok(base)
    }

    fn apply_power(&mut self, base: Expr) -> Result<Expr, InterpError> {
        match self.bump().cloned() {
            Some(Tok::Int(n)) => {
                let n = i32::try_from(n).map_err(|_| self.err())?;
                Ok(Expr::PowInt(Box::new(base), n))
            }
            Some(Tok::LParen) => {
                // Parenthesized constant exponent: must fold to an integer,
                // 1/2 (sqrt), or -1 (reciprocal).
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                let folded = canonicalize_tree(&e);
                let v = match folded {
                    Expr::Const(v) => v,
                    Expr::Div(a, b) => match (*a, *b) {
                        (Expr::Const(a), Expr::Const(b)) if b != 0.0 => a / b,
                        _ => return Err(self.err()),
                    },
                    _ => return Err(self.err()),
                };
                if (v - 0.5).abs() < 1e-12 {
                    Ok(Expr::Sqrt(Box::new(base)))
                } else if (v - v.round()).abs() < 1e-12 {
                    Ok(Expr::PowInt(Box::new(base), v.round() as i32))
                } else {
                    Err(self.err())
                }
            }
            Some(Tok::Minus) => match self.bump().cloned() {
                Some(Tok::Int(n)) => {
                    let n = i32::try_from(n).map_err(|_| self.err())?;
                    Ok(Expr::PowInt(Box::new(base), -n))
                }
                _ => Err(self.err()),
            },
            _ => Err(self.err()),
        }
    }

    fn primary(&mut self) -> Result<Expr, InterpError> {
        match self.bump().cloned() {
            Some(Tok::Num(v)) => Ok(Expr::Const(v)),
            Some(Tok::Int(n)) => Ok(Expr::Const(n as f64)),
            Some(Tok::Pi) => Ok(Expr::Pi),
            Some(Tok::Var(v)) => Ok(Expr::Var(v)),
            Some(Tok::Func(name)) => {
                self.expect(&Tok::LParen)?;
                let arg = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(match name {
                    "sin" => Expr::Sin(Box::new(arg)),
                    "cos" => Expr::Cos(Box::new(arg)),
                    "exp" => Expr::Exp(Box::new(arg)),
                    "log" => Expr::Log(Box::new(arg)),
                    "tanh" => Expr::Tanh(Box::new(arg)),
                    "sqrt" => Expr::Sqrt(Box::new(arg)),
                    _ => unreachable!(),
                })
            }
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            _ => Err(self.err()),
        }
    }
}

/// Parse expression text into a tree.
pub fn interpret(text: &str) -> Result<Expr, InterpError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        text,
    };
    let e = p.expr()?;
    if p.pos != toks.len() {
        return Err(p.err());
    }
    Ok(e)
}

/// Whether any transcendental function in the text has a purely numeric
/// argument (no variables).  Unparseable text reports `false` and is left
/// to the caller's parser.
pub fn has_numeric_transcendental_arg(text: &str) -> bool {
    let Ok(tree) = interpret(text) else {
        return false;
    };
    let mut bad = false;
    tree.visit(&mut |e| match e {
        Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Log(a) | Expr::Tanh(a) => {
            if a.variables().is_empty() {
                bad = true;
            }
        }
        _ => {}
    });
    bad
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Neg(..) => 2,
        Expr::Mul(..) | Expr::Div(..) => 3,
        Expr::PowInt(..) => 4,
        Expr::Const(v) if *v < 0.0 => 2,
        _ => 5,
    }
}

fn print_at(e: &Expr, min_prec: u8, out: &mut String) {
    let p = prec(e);
    let need_paren = p < min_prec;
    if need_paren {
        out.push('(');
    }
    match e {
        Expr::Const(v) => {
            out.push_str(&format_const(*v));
        }
        Expr::Pi => out.push_str("pi"),
        Expr::Var(v) => out.push_str(v.name()),
        Expr::Param(i) => {
            out.push_str("{p");
            out.push_str(&i.to_string());
            out.push('}');
        }
        Expr::Add(a, b) => {
            print_at(a, 1, out);
            out.push('+');
            print_at(b, 2, out);
        }
        Expr::Sub(a, b) => {
            print_at(a, 1, out);
            out.push('-');
            print_at(b, 2, out);
        }
        Expr::Neg(a) => {
            out.push('-');
            print_at(a, 3, out);
        }
        Expr::Mul(a, b) => {
            print_at(a, 3, out);
            out.push('*');
            print_at(b, 4, out);
        }
        Expr::Div(a, b) => {
            print_at(a, 3, out);
            out.push('/');
            print_at(b, 4, out);
        }
        Expr::PowInt(a, n) => {
            print_at(a, 5, out);
            out.push('^');
            if *n < 0 {
                out.push('(');
                out.push_str(&n.to_string());
                out.push(')');
            } else {
                out.push_str(&n.to_string());
            }
        }
        Expr::Sin(a) => print_fn("sin", a, out),
        Expr::Cos(a) => print_fn("cos", a, out),
        Expr::Exp(a) => print_fn("exp", a, out),
        Expr::Log(a) => print_fn("log", a, out),
        Expr::Tanh(a) => print_fn("tanh", a, out),
        Expr::Sqrt(a) => print_fn("sqrt", a, out),
    }
    if need_paren {
        out.push(')');
    }
}

fn print_fn(name: &str, a: &Expr, out: &mut String) {
    out.push_str(name);
    out.push('(');
    print_at(a, 0, out);
    out.push(')');
}

fn format_const(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v}");
        // f64 Display may fall back to exponent form for extreme values;
        // the grammar's alphabet has no such tokens, so expand them.
        if s.contains('e') || s.contains('E') {
            format!("{v:.12}")
        } else {
            s
        }
    }
}

/// Print a tree back to canonical expression text.
pub fn print(e: &Expr) -> String {
    let mut out = String::new();
    print_at(e, 0, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Canonicalization
// ---------------------------------------------------------------------------

/// Canonical tree transforms: numeric constant folding, `^(1/2)` to
/// `sqrt`, `^(-1)` to a reciprocal, double-negation removal.  `pi` is
/// never folded.  Idempotent.
pub fn canonicalize_tree(e: &Expr) -> Expr {
    use Expr::*;
    let fold2 = |ctor: fn(Box<Expr>, Box<Expr>) -> Expr,
                 op: fn(f64, f64) -> f64,
                 a: Expr,
                 b: Expr| match (&a, &b) {
        (Const(x), Const(y)) => {
            let v = op(*x, *y);
            if v.is_finite() {
                Const(v)
            } else {
                ctor(Box::new(a), Box::new(b))
            }
        }
        _ => ctor(Box::new(a), Box::new(b)),
    };
    match e {
        Const(_) | Pi | Var(_) | Param(_) => e.clone(),
        Add(a, b) => fold2(Add, |x, y| x + y, canonicalize_tree(a), canonicalize_tree(b)),
        Sub(a, b) => fold2(Sub, |x, y| x - y, canonicalize_tree(a), canonicalize_tree(b)),
        Mul(a, b) => fold2(Mul, |x, y| x * y, canonicalize_tree(a), canonicalize_tree(b)),
        Div(a, b) => {
            let (a, b) = (canonicalize_tree(a), canonicalize_tree(b));
            if let (Const(x), Const(y)) = (&a, &b) {
                if *y != 0.0 {
                    let v = x / y;
                    if v.is_finite() {
                        return Const(v);
                    }
                }
            }
            Div(Box::new(a), Box::new(b))
        }
        Neg(a) => {
            let a = canonicalize_tree(a);
            match a {
                Const(v) => Const(-v),
                Neg(inner) => *inner,
                other => Neg(Box::new(other)),
            }
        }
        PowInt(a, n) => {
            let a = canonicalize_tree(a);
            match n {
                0 => Const(1.0),
                1 => a,
                -1 => Div(Box::new(Const(1.0)), Box::new(a)),
                _ => {
                    if let Const(v) = a {
                        let folded = v.powi(*n);
                        if folded.is_finite() {
                            return Const(folded);
                        }
                    }
                    PowInt(Box::new(a), *n)
                }
            }
        }
        Sin(a) => Sin(Box::new(canonicalize_tree(a))),
        Cos(a) => Cos(Box::new(canonicalize_tree(a))),
        Exp(a) => Exp(Box::new(canonicalize_tree(a))),
        Log(a) => Log(Box::new(canonicalize_tree(a))),
        Tanh(a) => Tanh(Box::new(canonicalize_tree(a))),
        Sqrt(a) => Sqrt(Box::new(canonicalize_tree(a))),
    }
}

/// Replace every occurrence of `var` with `replacement`.
pub fn substitute(e: &Expr, var: Var, replacement: &Expr) -> Expr {
    use Expr::*;
    let go = |a: &Expr| Box::new(substitute(a, var, replacement));
    match e {
        Var(v) if *v == var => replacement.clone(),
        Const(_) | Pi | Var(_) | Param(_) => e.clone(),
        Add(a, b) => Add(go(a), go(b)),
        Sub(a, b) => Sub(go(a), go(b)),
        Mul(a, b) => Mul(go(a), go(b)),
        Div(a, b) => Div(go(a), go(b)),
        Neg(a) => Neg(go(a)),
        PowInt(a, n) => PowInt(go(a), *n),
        Sin(a) => Sin(go(a)),
        Cos(a) => Cos(go(a)),
        Exp(a) => Exp(go(a)),
        Log(a) => Log(go(a)),
        Tanh(a) => Tanh(go(a)),
        Sqrt(a) => Sqrt(go(a)),
    }
}

/// Text-level canonicalization: parse, transform, print.
pub fn canonicalize(text: &str) -> Result<String, InterpError> {
    Ok(print(&canonicalize_tree(&interpret(text)?)))
}
