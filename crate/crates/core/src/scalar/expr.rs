use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Built-in univariate functions of the expression grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Exp,
        Func::Log,
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    /// Applies the function, reporting values outside its domain.
    pub fn apply(self, x: f64) -> std::result::Result<f64, &'static str> {
        let y = match self {
            Func::Exp => x.exp(),
            Func::Log => {
                if x <= 0.0 {
                    return Err("log of non-positive value");
                }
                x.ln()
            }
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => {
                if x.cos() == 0.0 {
                    return Err("tan at a pole");
                }
                x.tan()
            }
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Sqrt => {
                if x < 0.0 {
                    return Err("sqrt of negative value");
                }
                x.sqrt()
            }
            Func::Abs => x.abs(),
        };
        if y.is_finite() {
            Ok(y)
        } else {
            Err("non-finite result")
        }
    }
}

#[derive(Debug)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    /// Power with a constant exponent.
    Pow(Expr, f64),
    Func(Func, Expr),
}

/// Immutable scalar expression over chart coordinates.
///
/// Nodes are shared through `Arc`, so derived expressions (derivatives,
/// substitutions) form a DAG rather than copying subtrees. Constructors fold
/// constants and apply the 0/1 identities; nothing else is simplified.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

pub(crate) fn pow_apply(x: f64, p: f64) -> std::result::Result<f64, &'static str> {
    let integral = p.fract() == 0.0;
    if x == 0.0 && p < 0.0 {
        return Err("division by zero");
    }
    if x < 0.0 && !integral {
        return Err("fractional power of negative value");
    }
    let y = if integral && p.abs() <= i32::MAX as f64 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    };
    if y.is_finite() {
        Ok(y)
    } else {
        Err("non-finite result")
    }
}

pub(crate) fn div_apply(a: f64, b: f64) -> std::result::Result<f64, &'static str> {
    if b == 0.0 {
        return Err("division by zero");
    }
    let y = a / b;
    if y.is_finite() {
        Ok(y)
    } else {
        Err("non-finite result")
    }
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn ptr_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn constant(c: f64) -> Expr {
        Expr(Arc::new(Node::Const(c)))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(i: usize) -> Expr {
        Expr(Arc::new(Node::Var(i)))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn neg(a: Expr) -> Expr {
        match *a.0 {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(ref inner) => inner.clone(),
            _ => Expr(Arc::new(Node::Neg(a))),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x + y),
            (Some(0.0), _) => b,
            (_, Some(0.0)) => a,
            _ => Expr(Arc::new(Node::Add(a, b))),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x - y),
            (Some(0.0), _) => Expr::neg(b),
            (_, Some(0.0)) => a,
            _ => Expr(Arc::new(Node::Sub(a, b))),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x * y),
            (Some(0.0), _) => Expr::zero(),
            (_, Some(0.0)) => Expr::zero(),
            (Some(1.0), _) => b,
            (_, Some(1.0)) => a,
            (Some(-1.0), _) => Expr::neg(b),
            (_, Some(-1.0)) => Expr::neg(a),
            _ => Expr(Arc::new(Node::Mul(a, b))),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::constant(x / y),
            (Some(0.0), _) => Expr::zero(),
            (_, Some(1.0)) => a,
            _ => Expr(Arc::new(Node::Div(a, b))),
        }
    }

    pub fn pow(a: Expr, p: f64) -> Expr {
        if p == 0.0 {
            return Expr::one();
        }
        if p == 1.0 {
            return a;
        }
        if let Some(x) = a.as_const() {
            if let Ok(y) = pow_apply(x, p) {
                return Expr::constant(y);
            }
        }
        Expr(Arc::new(Node::Pow(a, p)))
    }

    pub fn func(f: Func, a: Expr) -> Expr {
        if let Some(x) = a.as_const() {
            if let Ok(y) = f.apply(x) {
                return Expr::constant(y);
            }
        }
        Expr(Arc::new(Node::Func(f, a)))
    }

    pub fn exp(self) -> Expr {
        Expr::func(Func::Exp, self)
    }
    pub fn ln(self) -> Expr {
        Expr::func(Func::Log, self)
    }
    pub fn sin(self) -> Expr {
        Expr::func(Func::Sin, self)
    }
    pub fn cos(self) -> Expr {
        Expr::func(Func::Cos, self)
    }
    pub fn sqrt(self) -> Expr {
        Expr::func(Func::Sqrt, self)
    }
    pub fn powf(self, p: f64) -> Expr {
        Expr::pow(self, p)
    }
    pub fn recip(self) -> Expr {
        Expr::div(Expr::one(), self)
    }

    /// Sum of an iterator of expressions (zero when empty).
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms.into_iter().fold(Expr::zero(), Expr::add)
    }

    /// Number of nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        1 + match &*self.0 {
            Node::Const(_) | Node::Var(_) => 0,
            Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => a.depth(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => a.depth().max(b.depth()),
        }
    }

    /// Coordinate indices referenced anywhere in the expression.
    pub fn vars(&self) -> BTreeSet<usize> {
        fn walk(e: &Expr, seen: &mut HashMap<usize, ()>, out: &mut BTreeSet<usize>) {
            if seen.insert(e.ptr_id(), ()).is_some() {
                return;
            }
            match e.node() {
                Node::Const(_) => {}
                Node::Var(i) => {
                    out.insert(*i);
                }
                Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => walk(a, seen, out),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    walk(a, seen, out);
                    walk(b, seen, out);
                }
            }
        }
        let mut out = BTreeSet::new();
        walk(self, &mut HashMap::new(), &mut out);
        out
    }

    pub fn max_var(&self) -> Option<usize> {
        self.vars().into_iter().next_back()
    }

    /// Direct recursive evaluation. Large derived expressions should go
    /// through [`crate::scalar::Tape`] instead, which shares common subterms.
    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        let domain = |reason: &'static str, e: &Expr| Error::Domain {
            reason,
            subexpr: e.to_string(),
        };
        match &*self.0 {
            Node::Const(c) => Ok(*c),
            Node::Var(i) => p
                .get(*i)
                .copied()
                .ok_or_else(|| Error::Dimension(format!("variable x{i} but point has {} coordinates", p.len()))),
            Node::Neg(a) => Ok(-a.eval(p)?),
            Node::Add(a, b) => Ok(a.eval(p)? + b.eval(p)?),
            Node::Sub(a, b) => Ok(a.eval(p)? - b.eval(p)?),
            Node::Mul(a, b) => Ok(a.eval(p)? * b.eval(p)?),
            Node::Div(a, b) => div_apply(a.eval(p)?, b.eval(p)?).map_err(|r| domain(r, self)),
            Node::Pow(a, e) => pow_apply(a.eval(p)?, *e).map_err(|r| domain(r, self)),
            Node::Func(f, a) => f.apply(a.eval(p)?).map_err(|r| domain(r, self)),
        }
    }

    /// Exact symbolic partial derivative with respect to coordinate `i`.
    pub fn diff(&self, i: usize) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(i, &mut memo)
    }

    fn diff_memo(&self, i: usize, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(d) = memo.get(&self.ptr_id()) {
            return d.clone();
        }
        let d = match &*self.0 {
            Node::Const(_) => Expr::zero(),
            Node::Var(j) => {
                if *j == i {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => Expr::neg(a.diff_memo(i, memo)),
            Node::Add(a, b) => Expr::add(a.diff_memo(i, memo), b.diff_memo(i, memo)),
            Node::Sub(a, b) => Expr::sub(a.diff_memo(i, memo), b.diff_memo(i, memo)),
            Node::Mul(a, b) => {
                let da = a.diff_memo(i, memo);
                let db = b.diff_memo(i, memo);
                Expr::add(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db))
            }
            Node::Div(a, b) => {
                let da = a.diff_memo(i, memo);
                let db = b.diff_memo(i, memo);
                if db.is_zero() {
                    Expr::div(da, b.clone())
                } else {
                    // (a/b)' = a'/b - (a/b) b'/b
                    Expr::sub(
                        Expr::div(da, b.clone()),
                        Expr::div(Expr::mul(self.clone(), db), b.clone()),
                    )
                }
            }
            Node::Pow(a, e) => {
                let da = a.diff_memo(i, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    let outer = Expr::mul(Expr::constant(*e), Expr::pow(a.clone(), e - 1.0));
                    Expr::mul(outer, da)
                }
            }
            Node::Func(f, a) => {
                let da = a.diff_memo(i, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    let outer = match f {
                        Func::Exp => self.clone(),
                        Func::Log => Expr::div(Expr::one(), a.clone()),
                        Func::Sin => a.clone().cos(),
                        Func::Cos => Expr::neg(a.clone().sin()),
                        Func::Tan => Expr::pow(a.clone().cos(), -2.0),
                        Func::Sinh => Expr::func(Func::Cosh, a.clone()),
                        Func::Cosh => Expr::func(Func::Sinh, a.clone()),
                        Func::Sqrt => Expr::div(Expr::constant(0.5), self.clone()),
                        Func::Abs => Expr::div(a.clone(), self.clone()),
                    };
                    Expr::mul(outer, da)
                }
            }
        };
        memo.insert(self.ptr_id(), d.clone());
        d
    }

    /// Replaces every variable `x_i` by `map(i)`.
    pub fn substitute(&self, map: &dyn Fn(usize) -> Expr) -> Expr {
        fn walk(e: &Expr, map: &dyn Fn(usize) -> Expr, memo: &mut HashMap<usize, Expr>) -> Expr {
            if let Some(s) = memo.get(&e.ptr_id()) {
                return s.clone();
            }
            let s = match e.node() {
                Node::Const(_) => e.clone(),
                Node::Var(i) => map(*i),
                Node::Neg(a) => Expr::neg(walk(a, map, memo)),
                Node::Add(a, b) => Expr::add(walk(a, map, memo), walk(b, map, memo)),
                Node::Sub(a, b) => Expr::sub(walk(a, map, memo), walk(b, map, memo)),
                Node::Mul(a, b) => Expr::mul(walk(a, map, memo), walk(b, map, memo)),
                Node::Div(a, b) => Expr::div(walk(a, map, memo), walk(b, map, memo)),
                Node::Pow(a, p) => Expr::pow(walk(a, map, memo), *p),
                Node::Func(f, a) => Expr::func(*f, walk(a, map, memo)),
            };
            memo.insert(e.ptr_id(), s.clone());
            s
        }
        walk(self, map, &mut HashMap::new())
    }

    /// Renders with the given coordinate names (falls back to `x{i}`).
    pub fn display<'a>(&'a self, names: &'a [String]) -> Display<'a> {
        Display { expr: self, names }
    }
}

pub struct Display<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

fn write_expr(e: &Expr, names: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e.node() {
        Node::Const(c) => {
            if *c < 0.0 {
                write!(f, "(-{})", -c)
            } else {
                write!(f, "{c}")
            }
        }
        Node::Var(i) => match names.get(*i) {
            Some(n) => write!(f, "{n}"),
            None => write!(f, "x{i}"),
        },
        Node::Neg(a) => {
            write!(f, "(-")?;
            write_expr(a, names, f)?;
            write!(f, ")")
        }
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            let op = match e.node() {
                Node::Add(..) => "+",
                Node::Sub(..) => "-",
                Node::Mul(..) => "*",
                _ => "/",
            };
            write!(f, "(")?;
            write_expr(a, names, f)?;
            write!(f, " {op} ")?;
            write_expr(b, names, f)?;
            write!(f, ")")
        }
        Node::Pow(a, p) => {
            write!(f, "(")?;
            write_expr(a, names, f)?;
            if *p < 0.0 {
                write!(f, "^-{})", -p)
            } else {
                write!(f, "^{p})")
            }
        }
        Node::Func(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(a, names, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self.expr, self.names, f)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, &[], f)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $ctor:ident) => {
        impl ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$ctor(self, rhs)
            }
        }
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$ctor(self.clone(), rhs.clone())
            }
        }
        impl ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$ctor(self, rhs.clone())
            }
        }
        impl ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$ctor(self.clone(), rhs)
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$ctor(self, Expr::constant(rhs))
            }
        }
        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$ctor(Expr::constant(self), rhs)
            }
        }
        impl ops::$trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$ctor(self.clone(), Expr::constant(rhs))
            }
        }
        impl ops::$trait<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$ctor(Expr::constant(self), rhs.clone())
            }
        }
    };
}

impl_binop!(Add, add, add);
impl_binop!(Sub, sub, sub);
impl_binop!(Mul, mul, mul);
impl_binop!(Div, div, div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::var(i)
    }

    #[test]
    fn constructors_fold_identities() {
        assert!((x(0) * 0.0).is_zero());
        assert_eq!((x(0) * 1.0).to_string(), "x0");
        assert_eq!((Expr::zero() + x(1)).to_string(), "x1");
        assert_eq!((Expr::constant(2.0) * Expr::constant(3.0)).as_const(), Some(6.0));
        assert_eq!(Expr::pow(x(0), 1.0).to_string(), "x0");
        assert!(Expr::pow(x(0), 0.0).is_one());
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        for i in 0..3 {
            assert!(Expr::constant(4.2).diff(i).is_zero());
        }
    }

    #[test]
    fn mixed_partial_of_product() {
        let e = x(0) * x(1);
        let d = e.diff(0).diff(1);
        for p in [[0.3, -2.0], [5.0, 1.0]] {
            assert_eq!(d.eval(&p).unwrap(), 1.0);
        }
    }

    #[test]
    fn derivative_of_square_times_sine() {
        let e = Expr::pow(x(0), 2.0) * x(1).sin();
        let d = e.diff(0);
        let v = d.eval(&[2.0, std::f64::consts::FRAC_PI_2]).unwrap();
        assert!((v - 4.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let e = x(0).ln();
        match e.eval(&[0.0]) {
            Err(Error::Domain { subexpr, .. }) => assert_eq!(subexpr, "log(x0)"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!((Expr::one() / x(0)).eval(&[0.0]), Err(Error::Domain { .. })));
        assert!(matches!(x(0).sqrt().eval(&[-1.0]), Err(Error::Domain { .. })));
        assert!(matches!(Expr::pow(x(0), 0.5).eval(&[-1.0]), Err(Error::Domain { .. })));
        assert_eq!(Expr::pow(x(0), 3.0).eval(&[-2.0]).unwrap(), -8.0);
    }

    #[test]
    fn diff_shares_subterms() {
        // d/dx of a deep product chain stays linear in size thanks to memoization.
        let mut e = x(0);
        for _ in 0..40 {
            e = &e * &e.clone().sin();
        }
        let d = e.diff(0);
        let t = crate::scalar::Tape::compile(&[d]);
        assert!(t.len() < 2000, "{}", t.len());
        assert!(t.eval(&[0.1]).unwrap()[0].is_finite());
    }

    #[test]
    fn substitution_composes() {
        let h = Expr::pow(x(0), 2.0) + 1.0;
        let composed = h.substitute(&|_| x(1).sin());
        let v = composed.eval(&[0.0, 0.5]).unwrap();
        assert!((v - (0.5f64.sin().powi(2) + 1.0)).abs() < 1e-15);
    }
}
