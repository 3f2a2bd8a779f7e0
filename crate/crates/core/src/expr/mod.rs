//! Scalar math expressions over named variables.
//!
//! Every piece of geometric data (metric entries, force and constraint
//! components, frame maps) enters the engine as an [`Expr`]. Expressions are
//! evaluated in `f64` or in dual numbers; the latter yields exact partial
//! derivatives without finite differences.
//!
//! Velocities of a coordinate `x` are ordinary variables named `x_dot`.

mod parse;
pub mod scalar;

use std::collections::BTreeSet;
use std::fmt;

pub use scalar::{Dual, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown function `{name}` at offset {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Atan2,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "atan2" => Func::Atan2,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan2 => "atan2",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Atan2 => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Source of variable values during evaluation.
pub trait Bindings {
    fn lookup(&self, name: &str) -> Option<f64>;
}

impl<B: Bindings + ?Sized> Bindings for &B {
    fn lookup(&self, name: &str) -> Option<f64> {
        (**self).lookup(name)
    }
}

/// Ordered variable assignment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VarEnv {
    vars: Vec<(String, f64)>,
}

impl VarEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        match self.vars.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = value,
            None => self.vars.push((name.to_string(), value)),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.vars.iter().map(|(n, v)| (n.as_str(), *v))
    }
}

impl Bindings for VarEnv {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

pub fn parse(source: &str) -> Result<Expr, ExprError> {
    parse::parse(source)
}

impl std::str::FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse::parse(s)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ExprError> {
        parse::parse(source)
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    /// Literal constant value, if this is a bare number (possibly negated).
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(e) => e.as_constant().map(|v| -v),
            _ => None,
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Replace variables by expressions; names for which `map` returns
    /// `None` are kept.
    pub fn substitute(&self, map: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var(n) => map(n).unwrap_or_else(|| Expr::Var(n.clone())),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(map))),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.substitute(map)), Box::new(b.substitute(map))),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.substitute(map)).collect()),
        }
    }

    /// Evaluate over any [`Scalar`]; `lookup` supplies variable values.
    pub fn eval_generic<S: Scalar>(&self, lookup: &dyn Fn(&str) -> Option<S>) -> Result<S, ExprError> {
        let v = self.eval_node(lookup)?;
        if !v.is_finite() {
            return Err(ExprError::Domain(format!("non-finite result of `{self}`")));
        }
        Ok(v)
    }

    fn eval_node<S: Scalar>(&self, lookup: &dyn Fn(&str) -> Option<S>) -> Result<S, ExprError> {
        match self {
            Expr::Num(v) => Ok(S::constant(*v)),
            Expr::Var(n) => lookup(n).ok_or_else(|| ExprError::UnboundVariable(n.clone())),
            Expr::Neg(e) => Ok(-e.eval_node(lookup)?),
            Expr::Binary(op, a, b) => {
                let x = a.eval_node(lookup)?;
                let y = b.eval_node(lookup)?;
                match op {
                    BinOp::Add => Ok(x + y),
                    BinOp::Sub => Ok(x - y),
                    BinOp::Mul => Ok(x * y),
                    BinOp::Div => {
                        if y.value() == 0.0 {
                            return Err(ExprError::DivisionByZero);
                        }
                        Ok(x / y)
                    }
                    BinOp::Pow => pow(x, y),
                }
            }
            Expr::Call(f, args) => {
                let x = args[0].eval_node(lookup)?;
                match f {
                    Func::Sin => Ok(x.sin()),
                    Func::Cos => Ok(x.cos()),
                    Func::Tan => Ok(x.tan()),
                    Func::Exp => Ok(x.exp()),
                    Func::Log => {
                        if x.value() <= 0.0 {
                            return Err(ExprError::Domain(format!("log of non-positive value {}", x.value())));
                        }
                        Ok(x.ln())
                    }
                    Func::Sqrt => {
                        if x.value() < 0.0 {
                            return Err(ExprError::Domain(format!("sqrt of negative value {}", x.value())));
                        }
                        Ok(x.sqrt())
                    }
                    Func::Atan2 => {
                        let xx = args[1].eval_node(lookup)?;
                        Ok(x.atan2(&xx))
                    }
                }
            }
        }
    }

    pub fn eval(&self, env: &impl Bindings) -> Result<f64, ExprError> {
        self.eval_generic::<f64>(&|n| env.lookup(n))
    }

    /// Exact partial derivative with respect to `var`.
    pub fn diff(&self, var: &str, env: &impl Bindings) -> Result<f64, ExprError> {
        let d = self.eval_generic::<Dual<f64>>(&|n| {
            env.lookup(n).map(|v| Dual::new(v, if n == var { 1.0 } else { 0.0 }))
        })?;
        Ok(d.eps)
    }

    /// Value and exact partials with respect to each of `vars`.
    pub fn value_and_gradient(&self, vars: &[&str], env: &impl Bindings) -> Result<(f64, Vec<f64>), ExprError> {
        let value = self.eval(env)?;
        let grad = vars.iter().map(|v| self.diff(v, env)).collect::<Result<Vec<_>, _>>()?;
        Ok((value, grad))
    }

    /// Exact mixed second partial ∂²e/∂a∂b (nested dual numbers).
    pub fn diff2(&self, a: &str, b: &str, env: &impl Bindings) -> Result<f64, ExprError> {
        let d = self.eval_generic::<Dual<Dual<f64>>>(&|n| {
            env.lookup(n).map(|v| {
                let inner = Dual::new(v, if n == b { 1.0 } else { 0.0 });
                let outer = Dual::new(if n == a { 1.0 } else { 0.0 }, 0.0);
                Dual::new(inner, outer)
            })
        })?;
        Ok(d.eps.eps)
    }

    /// Symmetric Hessian over `vars`.
    pub fn hessian(&self, vars: &[&str], env: &impl Bindings) -> Result<Vec<Vec<f64>>, ExprError> {
        let n = vars.len();
        let mut h = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = self.diff2(vars[i], vars[j], env)?;
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        Ok(h)
    }
}

fn pow<S: Scalar>(x: S, y: S) -> Result<S, ExprError> {
    if y.is_constant() {
        let b = y.value();
        if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
            if b < 0.0 && x.value() == 0.0 {
                return Err(ExprError::DivisionByZero);
            }
            return Ok(x.powi(b as i32));
        }
        if x.value() < 0.0 {
            return Err(ExprError::Domain(format!("{} raised to non-integer power {b}", x.value())));
        }
        return Ok(x.powf_const(b));
    }
    if x.value() <= 0.0 {
        return Err(ExprError::Domain(format!(
            "non-positive base {} with variable exponent",
            x.value()
        )));
    }
    Ok((y * x.ln()).exp())
}

fn write_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        write!(f, "(-{:?})", -v)
    } else {
        write!(f, "{v:?}")
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized; parses back to an expression that evaluates
    /// identically.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write_num(f, *v),
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, env: &VarEnv) -> f64 {
        parse(src).unwrap().eval(env).unwrap()
    }

    #[test]
    fn parse_constant() {
        assert_eq!(parse("0").unwrap(), Expr::Num(0.0));
    }

    #[test]
    fn arithmetic_examples() {
        let env = VarEnv::new().with("x", 1.0).with("y", 2.0);
        assert_eq!(ev("x^2 + y^2", &env), 5.0);
        // dt² coefficient of the rotation pullback metric at (x, y) = (1, 2)
        assert_eq!(ev("1 + x^2 + y^2", &env), 6.0);
    }

    #[test]
    fn eval_examples() {
        assert_eq!(ev("sin(0)", &VarEnv::new()), 0.0);
        assert_eq!(ev("exp(2*t)", &VarEnv::new().with("t", 0.0)), 1.0);
        let env = VarEnv::new().with("t", 0.0).with("x", 3.0).with("y", 4.0);
        assert_eq!(ev("exp(2*t)*(x^2+y^2)", &env), 25.0);
    }

    #[test]
    fn precedence() {
        let env = VarEnv::new().with("x", 3.0);
        assert_eq!(ev("-x^2", &env), -9.0);
        assert_eq!(ev("2^3^2", &env), 512.0);
        assert_eq!(ev("2*3+4", &env), 10.0);
        assert_eq!(ev("2-3-4", &env), -5.0);
        assert_eq!(ev("8/4/2", &env), 1.0);
        assert_eq!(ev("2^-1", &env), 0.5);
        assert_eq!(ev("-(1+2)*2", &env), -6.0);
        assert_eq!(ev("1.5e2 + 1E-1", &env), 150.1);
        assert_eq!(ev("atan2(1, 1)*4", &env), std::f64::consts::PI);
    }

    #[test]
    fn diff_examples() {
        let x3 = VarEnv::new().with("x", 3.0);
        assert_eq!(parse("x^2").unwrap().diff("x", &x3).unwrap(), 6.0);
        assert_eq!(parse("7.5").unwrap().diff("x", &x3).unwrap(), 0.0);
        // ∂g_θθ/∂r of the polar metric at r = 2
        let r2 = VarEnv::new().with("r", 2.0);
        let e = parse("r^2").unwrap();
        let d = e.diff("r", &r2).unwrap();
        assert_eq!(d, 4.0);
        let h = 1e-6;
        let fd = (e.eval(&VarEnv::new().with("r", 2.0 + h)).unwrap()
            - e.eval(&VarEnv::new().with("r", 2.0 - h)).unwrap())
            / (2.0 * h);
        assert!((d - fd).abs() < 1e-8);
    }

    #[test]
    fn second_derivatives() {
        let env = VarEnv::new().with("x", 2.0).with("y", 3.0);
        let e = parse("x^2*y + sin(x*y)").unwrap();
        let want = 2.0 * 2.0 + (6.0f64).cos() - 6.0 * (6.0f64).sin();
        assert!((e.diff2("x", "y", &env).unwrap() - want).abs() < 1e-12);
        assert!((e.diff2("y", "x", &env).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse("1 +"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("foo(x)"), Err(ExprError::UnknownFunction { pos: 0, .. })));
        assert!(matches!(parse("(x"), Err(ExprError::Syntax { pos: 2, .. })));
        assert!(matches!(parse("x $ y"), Err(ExprError::Syntax { pos: 2, .. })));
        assert!(matches!(parse("atan2(x)"), Err(ExprError::Syntax { .. })));
        let e = parse("x + y").unwrap();
        assert_eq!(e.eval(&VarEnv::new().with("x", 1.0)), Err(ExprError::UnboundVariable("y".into())));
        let env = VarEnv::new().with("x", -1.0);
        assert!(matches!(parse("log(x)").unwrap().eval(&env), Err(ExprError::Domain(_))));
        assert!(matches!(parse("sqrt(x)").unwrap().eval(&env), Err(ExprError::Domain(_))));
        assert!(matches!(parse("1/(x+1)").unwrap().eval(&env), Err(ExprError::DivisionByZero)));
        assert!(matches!(parse("x^0.5").unwrap().eval(&env), Err(ExprError::Domain(_))));
    }

    #[test]
    fn print_round_trip() {
        let env = VarEnv::new().with("x", 0.7).with("y", -1.3);
        for src in ["-x^2 + 3*y", "atan2(y, x) - 1e-7", "2^-x / (1 - y)", "-(-2.5)*x", "sqrt(x^2+y^2)^3"] {
            let e = parse(src).unwrap();
            let back = parse(&e.to_string()).unwrap();
            assert_eq!(e.eval(&env).unwrap().to_bits(), back.eval(&env).unwrap().to_bits(), "{src}");
        }
    }

    #[test]
    fn substitution() {
        let e = parse("x^2 + y").unwrap();
        let s = e.substitute(&|n| if n == "x" { Some(parse("2*u").unwrap()) } else { None });
        let env = VarEnv::new().with("u", 1.5).with("y", 1.0);
        assert_eq!(s.eval(&env).unwrap(), 10.0);
        assert_eq!(s.variables().into_iter().collect::<Vec<_>>(), vec!["u".to_string(), "y".to_string()]);
    }
}
