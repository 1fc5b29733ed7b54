//! Symbolic analytic functions of one variable `s`.
//!
//! Expressions are parsed from text, evaluated at complex points as their
//! holomorphic extension, differentiated symbolically, and printed back in
//! a form the parser reads to the same tree.

mod parser;

pub use parser::ParseError;

use num_complex::Complex64 as C64;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Exp,
    Sqrt,
    Ln,
}

impl Func {
    pub const ALL: [Func; 8] = [Func::Sin, Func::Cos, Func::Tan, Func::Sinh, Func::Cosh, Func::Exp, Func::Sqrt, Func::Ln];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, z: C64) -> Result<C64, EvalError> {
        let on_cut = z.im == 0.0 && z.re < 0.0;
        let v = match self {
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Tan => {
                let c = z.cos();
                if c == C64::new(0.0, 0.0) {
                    return Err(EvalError::DivisionByZero);
                }
                z.sin() / c
            }
            Func::Sinh => z.sinh(),
            Func::Cosh => z.cosh(),
            Func::Exp => z.exp(),
            Func::Sqrt => {
                if on_cut {
                    return Err(EvalError::BranchCut { func: "sqrt", at: z });
                }
                z.sqrt()
            }
            Func::Ln => {
                if on_cut || z == C64::new(0.0, 0.0) {
                    return Err(EvalError::BranchCut { func: "ln", at: z });
                }
                z.ln()
            }
        };
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Node {
    Const(C64),
    Var,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} evaluated on its branch cut at {at}")]
    BranchCut { func: &'static str, at: C64 },
    #[error("non-finite value")]
    NonFinite,
    #[error("value {value} is not real")]
    NotReal { value: C64 },
}

fn as_int(c: C64) -> Option<i32> {
    if c.im == 0.0 && c.re.fract() == 0.0 && c.re.abs() < 1e9 {
        Some(c.re as i32)
    } else {
        None
    }
}

fn powi(z: C64, n: i32) -> Result<C64, EvalError> {
    if n < 0 {
        if z == C64::new(0.0, 0.0) {
            return Err(EvalError::DivisionByZero);
        }
        Ok(C64::new(1.0, 0.0) / z.powi(-n))
    } else {
        Ok(z.powi(n))
    }
}

impl Node {
    fn eval(&self, z: C64) -> Result<C64, EvalError> {
        let v = match self {
            Node::Const(c) => *c,
            Node::Var => z,
            Node::Neg(a) => -a.eval(z)?,
            Node::Add(a, b) => a.eval(z)? + b.eval(z)?,
            Node::Sub(a, b) => a.eval(z)? - b.eval(z)?,
            Node::Mul(a, b) => a.eval(z)? * b.eval(z)?,
            Node::Div(a, b) => {
                let d = b.eval(z)?;
                if d == C64::new(0.0, 0.0) {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval(z)? / d
            }
            Node::Pow(a, b) => {
                let base = a.eval(z)?;
                if let Node::Const(e) = **b {
                    if let Some(n) = as_int(e) {
                        return check(powi(base, n)?);
                    }
                }
                let e = b.eval(z)?;
                if let Some(n) = as_int(e) {
                    powi(base, n)?
                } else if base == C64::new(0.0, 0.0) {
                    if e.re > 0.0 {
                        C64::new(0.0, 0.0)
                    } else {
                        return Err(EvalError::DivisionByZero);
                    }
                } else if base.im == 0.0 && base.re < 0.0 {
                    return Err(EvalError::BranchCut { func: "^", at: base });
                } else {
                    (e * base.ln()).exp()
                }
            }
            Node::Call(f, a) => f.apply(a.eval(z)?)?,
        };
        check(v)
    }

    fn is_const(&self) -> Option<C64> {
        match self {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        self.is_const() == Some(C64::new(0.0, 0.0))
    }

    fn is_one(&self) -> bool {
        self.is_const() == Some(C64::new(1.0, 0.0))
    }

    fn depends_on_var(&self) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var => true,
            Node::Neg(a) | Node::Call(_, a) => a.depends_on_var(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.depends_on_var() || b.depends_on_var()
            }
        }
    }

    fn size(&self) -> usize {
        match self {
            Node::Const(_) | Node::Var => 1,
            Node::Neg(a) | Node::Call(_, a) => 1 + a.size(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }
}

fn check(v: C64) -> Result<C64, EvalError> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

// Constructors with constant folding and identity elimination.

pub(crate) fn mk_const(c: C64) -> Node {
    Node::Const(C64::new(c.re + 0.0, c.im + 0.0))
}

pub(crate) fn mk_neg(a: Node) -> Node {
    match a {
        Node::Const(c) => mk_const(-c),
        Node::Neg(x) => *x,
        a => Node::Neg(Box::new(a)),
    }
}

pub(crate) fn mk_add(a: Node, b: Node) -> Node {
    match (a.is_const(), b.is_const()) {
        (Some(x), Some(y)) => mk_const(x + y),
        _ if a.is_zero() => b,
        _ if b.is_zero() => a,
        _ => Node::Add(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mk_sub(a: Node, b: Node) -> Node {
    match (a.is_const(), b.is_const()) {
        (Some(x), Some(y)) => mk_const(x - y),
        _ if b.is_zero() => a,
        _ if a.is_zero() => mk_neg(b),
        _ => Node::Sub(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mk_mul(a: Node, b: Node) -> Node {
    match (a.is_const(), b.is_const()) {
        (Some(x), Some(y)) => mk_const(x * y),
        _ if a.is_zero() || b.is_zero() => mk_const(C64::new(0.0, 0.0)),
        _ if a.is_one() => b,
        _ if b.is_one() => a,
        (Some(x), None) if x == C64::new(-1.0, 0.0) => mk_neg(b),
        (None, Some(y)) if y == C64::new(-1.0, 0.0) => mk_neg(a),
        _ => Node::Mul(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mk_div(a: Node, b: Node) -> Node {
    match (a.is_const(), b.is_const()) {
        (Some(x), Some(y)) if y != C64::new(0.0, 0.0) => mk_const(x / y),
        _ if b.is_one() => a,
        _ if a.is_zero() && !b.is_zero() => mk_const(C64::new(0.0, 0.0)),
        _ => Node::Div(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mk_pow(a: Node, b: Node) -> Node {
    if b.is_zero() {
        return Node::Const(C64::new(1.0, 0.0));
    }
    if b.is_one() {
        return a;
    }
    if let (Some(x), Some(y)) = (a.is_const(), b.is_const()) {
        if let Some(n) = as_int(y) {
            if let Ok(v) = powi(x, n) {
                if check(v).is_ok() {
                    return mk_const(v);
                }
            }
        }
    }
    Node::Pow(Box::new(a), Box::new(b))
}

pub(crate) fn mk_call(f: Func, a: Node) -> Node {
    if let Some(c) = a.is_const() {
        if let Ok(v) = f.apply(c).and_then(check) {
            if c.im == 0.0 && v.im == 0.0 {
                return mk_const(v);
            }
        }
    }
    Node::Call(f, Box::new(a))
}

fn c(re: f64) -> Node {
    Node::Const(C64::new(re, 0.0))
}

fn derive(n: &Node) -> Node {
    match n {
        Node::Const(_) => c(0.0),
        Node::Var => c(1.0),
        Node::Neg(a) => mk_neg(derive(a)),
        Node::Add(a, b) => mk_add(derive(a), derive(b)),
        Node::Sub(a, b) => mk_sub(derive(a), derive(b)),
        Node::Mul(a, b) => mk_add(mk_mul(derive(a), (**b).clone()), mk_mul((**a).clone(), derive(b))),
        Node::Div(a, b) => {
            let num = mk_sub(mk_mul(derive(a), (**b).clone()), mk_mul((**a).clone(), derive(b)));
            mk_div(num, mk_pow((**b).clone(), c(2.0)))
        }
        Node::Pow(a, b) => {
            if !b.depends_on_var() {
                let e = (**b).clone();
                let reduced = mk_pow((**a).clone(), mk_sub(e.clone(), c(1.0)));
                mk_mul(mk_mul(e, reduced), derive(a))
            } else {
                let ln_a = mk_call(Func::Ln, (**a).clone());
                let inner = mk_add(
                    mk_mul(derive(b), ln_a),
                    mk_div(mk_mul((**b).clone(), derive(a)), (**a).clone()),
                );
                mk_mul(n.clone(), inner)
            }
        }
        Node::Call(f, a) => {
            let u = (**a).clone();
            let outer = match f {
                Func::Sin => mk_call(Func::Cos, u),
                Func::Cos => mk_neg(mk_call(Func::Sin, u)),
                Func::Tan => mk_add(c(1.0), mk_pow(mk_call(Func::Tan, u), c(2.0))),
                Func::Sinh => mk_call(Func::Cosh, u),
                Func::Cosh => mk_call(Func::Sinh, u),
                Func::Exp => mk_call(Func::Exp, u),
                Func::Sqrt => mk_div(c(0.5), mk_call(Func::Sqrt, u)),
                Func::Ln => mk_div(c(1.0), u),
            };
            mk_mul(outer, derive(a))
        }
    }
}

/// An analytic function of `s` with a cached symbolic derivative.
#[derive(Clone)]
pub struct AnalyticFn {
    node: Arc<Node>,
    deriv: Arc<OnceLock<AnalyticFn>>,
}

impl fmt::Debug for AnalyticFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AnalyticFn({self})")
    }
}

impl PartialEq for AnalyticFn {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl AnalyticFn {
    pub(crate) fn from_node(node: Node) -> Self {
        Self { node: Arc::new(node), deriv: Arc::new(OnceLock::new()) }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parser::parse(text).map(Self::from_node)
    }

    pub fn constant(v: f64) -> Self {
        Self::from_node(c(v))
    }

    pub fn complex_constant(v: C64) -> Self {
        Self::from_node(mk_const(v))
    }

    pub fn var() -> Self {
        Self::from_node(Node::Var)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn eval(&self, z: C64) -> Result<C64, EvalError> {
        self.node.eval(z)
    }

    /// Value at a real point; imaginary parts above `1e-12` relative are rejected.
    pub fn eval_real(&self, x: f64) -> Result<f64, EvalError> {
        let v = self.eval(C64::new(x, 0.0))?;
        if v.im.abs() > 1e-12 * (1.0 + v.re.abs()) {
            return Err(EvalError::NotReal { value: v });
        }
        Ok(v.re)
    }

    pub fn derivative(&self) -> AnalyticFn {
        self.deriv.get_or_init(|| AnalyticFn::from_node(derive(&self.node))).clone()
    }

    /// `k`-th derivative.
    pub fn nth_derivative(&self, k: usize) -> AnalyticFn {
        let mut d = self.clone();
        for _ in 0..k {
            d = d.derivative();
        }
        d
    }

    pub fn as_constant(&self) -> Option<C64> {
        self.node.is_const()
    }

    pub fn is_zero(&self) -> bool {
        self.node.is_zero()
    }

    /// Node count of the expression tree.
    pub fn size(&self) -> usize {
        self.node.size()
    }

    pub fn call(&self, f: Func) -> Self {
        Self::from_node(mk_call(f, (*self.node).clone()))
    }

    pub fn sin(&self) -> Self {
        self.call(Func::Sin)
    }

    pub fn cos(&self) -> Self {
        self.call(Func::Cos)
    }

    pub fn sqrt(&self) -> Self {
        self.call(Func::Sqrt)
    }

    pub fn powi(&self, n: i32) -> Self {
        Self::from_node(mk_pow((*self.node).clone(), c(n as f64)))
    }

    pub fn pow(&self, e: &AnalyticFn) -> Self {
        Self::from_node(mk_pow((*self.node).clone(), (*e.node).clone()))
    }
}

impl From<f64> for AnalyticFn {
    fn from(v: f64) -> Self {
        AnalyticFn::constant(v)
    }
}

impl From<C64> for AnalyticFn {
    fn from(v: C64) -> Self {
        AnalyticFn::complex_constant(v)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $mk:ident) => {
        impl $tr<&AnalyticFn> for &AnalyticFn {
            type Output = AnalyticFn;
            fn $m(self, rhs: &AnalyticFn) -> AnalyticFn {
                AnalyticFn::from_node($mk((*self.node).clone(), (*rhs.node).clone()))
            }
        }
        impl $tr<AnalyticFn> for AnalyticFn {
            type Output = AnalyticFn;
            fn $m(self, rhs: AnalyticFn) -> AnalyticFn {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&AnalyticFn> for AnalyticFn {
            type Output = AnalyticFn;
            fn $m(self, rhs: &AnalyticFn) -> AnalyticFn {
                (&self).$m(rhs)
            }
        }
        impl $tr<AnalyticFn> for &AnalyticFn {
            type Output = AnalyticFn;
            fn $m(self, rhs: AnalyticFn) -> AnalyticFn {
                self.$m(&rhs)
            }
        }
        impl $tr<f64> for &AnalyticFn {
            type Output = AnalyticFn;
            fn $m(self, rhs: f64) -> AnalyticFn {
                self.$m(&AnalyticFn::constant(rhs))
            }
        }
        impl $tr<f64> for AnalyticFn {
            type Output = AnalyticFn;
            fn $m(self, rhs: f64) -> AnalyticFn {
                (&self).$m(&AnalyticFn::constant(rhs))
            }
        }
        impl $tr<&AnalyticFn> for f64 {
            type Output = AnalyticFn;
            fn $m(self, rhs: &AnalyticFn) -> AnalyticFn {
                (&AnalyticFn::constant(self)).$m(rhs)
            }
        }
        impl $tr<AnalyticFn> for f64 {
            type Output = AnalyticFn;
            fn $m(self, rhs: AnalyticFn) -> AnalyticFn {
                (&AnalyticFn::constant(self)).$m(&rhs)
            }
        }
    };
}

binop!(Add, add, mk_add);
binop!(Sub, sub, mk_sub);
binop!(Mul, mul, mk_mul);
binop!(Div, div, mk_div);

impl Neg for &AnalyticFn {
    type Output = AnalyticFn;
    fn neg(self) -> AnalyticFn {
        AnalyticFn::from_node(mk_neg((*self.node).clone()))
    }
}

impl Neg for AnalyticFn {
    type Output = AnalyticFn;
    fn neg(self) -> AnalyticFn {
        -&self
    }
}

fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_const(v: C64) -> (String, u8) {
    if v.im == 0.0 {
        if v.re < 0.0 || (v.re == 0.0 && v.re.is_sign_negative()) {
            (format!("(-{})", fmt_real(-v.re)), 5)
        } else {
            (fmt_real(v.re), 5)
        }
    } else if v.re == 0.0 && !v.re.is_sign_negative() {
        if v.im == 1.0 {
            ("i".to_string(), 5)
        } else if v.im < 0.0 {
            (format!("(-{}*i)", fmt_real(-v.im)), 5)
        } else {
            (format!("({}*i)", fmt_real(v.im)), 5)
        }
    } else {
        let (re, _) = fmt_const(C64::new(v.re, 0.0));
        let sign = if v.im < 0.0 { "-" } else { "+" };
        (format!("({re}{sign}{}*i)", fmt_real(v.im.abs())), 5)
    }
}

/// Renders `n` and returns it with its precedence level.
fn render(n: &Node) -> (String, u8) {
    let wrap = |s: (String, u8), min: u8| if s.1 >= min { s.0 } else { format!("({})", s.0) };
    match n {
        Node::Const(v) => fmt_const(*v),
        Node::Var => ("s".to_string(), 5),
        Node::Neg(a) => (format!("-{}", wrap(render(a), 4)), 3),
        Node::Add(a, b) => (format!("{} + {}", wrap(render(a), 1), wrap(render(b), 2)), 1),
        Node::Sub(a, b) => (format!("{} - {}", wrap(render(a), 1), wrap(render(b), 2)), 1),
        Node::Mul(a, b) => (format!("{}*{}", wrap(render(a), 2), wrap(render(b), 4)), 2),
        Node::Div(a, b) => (format!("{}/{}", wrap(render(a), 2), wrap(render(b), 4)), 2),
        Node::Pow(a, b) => (format!("{}^{}", wrap(render(a), 5), wrap(render(b), 5)), 4),
        Node::Call(f, a) => (format!("{}({})", f.name(), render(a).0), 5),
    }
}

impl fmt::Display for AnalyticFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(&self.node).0)
    }
}
