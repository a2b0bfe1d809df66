//! Immutable symbolic expressions and the calculus built on them.
//!
//! An [`Expr`] is a reference-counted unary/binary tree. Sums and products are
//! always binary; helpers that take several operands fold them to the left.

mod dag;
mod diff;
mod eval;
mod prefix;
mod random;
pub mod registry;
mod simplify;
pub mod special;

use std::fmt;
use std::ops;
use std::sync::Arc;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use thiserror::Error;

pub use dag::{dag_stats, DagStats};
pub use diff::{differentiate, differentiate_with};
pub use eval::{eval_numeric, Env};
pub use prefix::{
    from_prefix, from_prefix_with, head_token, parse_prefix, parse_prefix_with, tier_int,
    tiered_prefix, to_prefix, to_prefix_string,
};
pub use random::{random_expr, GenConfig, UnaryChoice};
pub use registry::{instantiate, FnClass, FunctionRegistry, FunctionSpec};
pub use simplify::{canonical_key, canonical_order, compare_exprs, simplify_basic};

/// Interned-ish symbol name for variables, constants and functions.
pub type Symbol = Arc<str>;

/// The integration variable used throughout the pipeline.
pub const X: &str = "x";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("no derivative rule for `{0}`")]
    UnknownDerivative(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("no numeric kernel for `{0}`")]
    NoNumericKernel(String),
    #[error("prefix term ended early")]
    TruncatedTerm,
    #[error("{0} trailing token(s) after a complete term")]
    TrailingTokens(usize),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("`{name}` expects {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("registry: {0}")]
    Registry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub const ALL: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow];

    pub fn token(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    pub fn from_token(tok: &str) -> Option<BinOp> {
        Some(match tok {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "^" => BinOp::Pow,
            _ => return None,
        })
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Mul)
    }
}

/// One node of an expression tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Int(BigInt),
    /// Always in lowest terms with denominator > 1.
    Rational(BigRational),
    Var(Symbol),
    /// Named numeric constant such as `pi`.
    Const(Symbol),
    Binary(BinOp, [Expr; 2]),
    Apply(Symbol, Vec<Expr>),
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Node>);

/// Named constants with a numeric value.
pub fn constant_value(name: &str) -> Option<f64> {
    match name {
        "pi" => Some(std::f64::consts::PI),
        _ => None,
    }
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn int(n: impl Into<BigInt>) -> Expr {
        Expr(Arc::new(Node::Int(n.into())))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    /// Builds a number, collapsing to an integer when the denominator is 1.
    pub fn number(q: BigRational) -> Expr {
        if q.is_integer() {
            Expr::int(q.to_integer())
        } else {
            Expr(Arc::new(Node::Rational(q)))
        }
    }

    /// Panics on a zero denominator.
    pub fn rational(num: i64, den: i64) -> Expr {
        assert!(den != 0, "zero denominator");
        Expr::number(BigRational::new(num.into(), den.into()))
    }

    pub fn var(name: &str) -> Expr {
        Expr(Arc::new(Node::Var(name.into())))
    }

    pub fn x() -> Expr {
        Expr::var(X)
    }

    pub fn constant(name: &str) -> Expr {
        Expr(Arc::new(Node::Const(name.into())))
    }

    pub fn pi() -> Expr {
        Expr::constant("pi")
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr(Arc::new(Node::Binary(op, [a, b])))
    }

    pub fn pow(self, e: Expr) -> Expr {
        Expr::binary(BinOp::Pow, self, e)
    }

    pub fn powi(self, k: i64) -> Expr {
        self.pow(Expr::int(k))
    }

    /// Function application without a registry arity check.
    pub fn apply(name: &str, args: Vec<Expr>) -> Expr {
        Expr(Arc::new(Node::Apply(name.into(), args)))
    }

    pub fn call(name: &str, arg: Expr) -> Expr {
        Expr::apply(name, vec![arg])
    }

    pub fn call2(name: &str, a: Expr, b: Expr) -> Expr {
        Expr::apply(name, vec![a, b])
    }

    /// Left-folded sum; the empty sum is 0.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms
            .into_iter()
            .reduce(|a, b| Expr::binary(BinOp::Add, a, b))
            .unwrap_or_else(Expr::zero)
    }

    /// Left-folded product; the empty product is 1.
    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        factors
            .into_iter()
            .reduce(|a, b| Expr::binary(BinOp::Mul, a, b))
            .unwrap_or_else(Expr::one)
    }

    pub fn children(&self) -> &[Expr] {
        match self.node() {
            Node::Binary(_, kids) => kids,
            Node::Apply(_, args) => args,
            _ => &[],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(
            self.node(),
            Node::Int(_) | Node::Rational(_) | Node::Var(_) | Node::Const(_)
        )
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self.node() {
            Node::Int(n) => Some(n),
            _ => None,
        }
    }

    /// Numeric literal value, if this is an integer or rational leaf.
    pub fn as_number(&self) -> Option<BigRational> {
        match self.node() {
            Node::Int(n) => Some(BigRational::from_integer(n.clone())),
            Node::Rational(q) => Some(q.clone()),
            _ => None,
        }
    }

    pub fn is_number(&self) -> bool {
        matches!(self.node(), Node::Int(_) | Node::Rational(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Int(n) if n.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Int(n) if n.is_one())
    }

    pub fn is_negative_number(&self) -> bool {
        match self.node() {
            Node::Int(n) => n.is_negative(),
            Node::Rational(q) => q.is_negative(),
            _ => false,
        }
    }

    /// True when `v` occurs anywhere in the tree.
    pub fn contains_var(&self, v: &str) -> bool {
        match self.node() {
            Node::Var(s) => &**s == v,
            _ => self.children().iter().any(|c| c.contains_var(v)),
        }
    }

    /// True when some function application in the tree satisfies `pred`.
    pub fn any_apply(&self, pred: &mut dyn FnMut(&str) -> bool) -> bool {
        if let Node::Apply(name, _) = self.node() {
            if pred(name) {
                return true;
            }
        }
        self.children().iter().any(|c| c.any_apply(pred))
    }

    /// Names of all applied functions, in pre-order, with repetitions.
    pub fn function_names(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Node::Apply(name, _) = e.node() {
                out.push(name.clone());
            }
        });
        out
    }

    /// Free variables other than `except`, sorted and deduplicated.
    pub fn free_symbols_except(&self, except: &str) -> Vec<Symbol> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Node::Var(s) = e.node() {
                if &**s != except {
                    out.push(s.clone());
                }
            }
        });
        out.sort();
        out.dedup();
        out
    }

    /// Pre-order visit of every node.
    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    /// Rebuilds this node with new children (same kind).
    pub fn with_children(&self, kids: Vec<Expr>) -> Expr {
        match self.node() {
            Node::Binary(op, _) => {
                let mut it = kids.into_iter();
                let a = it.next().expect("binary node needs two children");
                let b = it.next().expect("binary node needs two children");
                Expr::binary(*op, a, b)
            }
            Node::Apply(name, _) => Expr(Arc::new(Node::Apply(name.clone(), kids))),
            _ => self.clone(),
        }
    }

    /// Replaces every occurrence of variable `v` by `r`. No simplification.
    pub fn substitute(&self, v: &str, r: &Expr) -> Expr {
        match self.node() {
            Node::Var(s) if &**s == v => r.clone(),
            _ if self.is_leaf() => self.clone(),
            _ => self.with_children(self.children().iter().map(|c| c.substitute(v, r)).collect()),
        }
    }

    /// Replaces every subtree structurally equal to `target` by `r`.
    pub fn replace_subexpr(&self, target: &Expr, r: &Expr) -> Expr {
        if self == target {
            return r.clone();
        }
        if self.is_leaf() {
            return self.clone();
        }
        self.with_children(
            self.children()
                .iter()
                .map(|c| c.replace_subexpr(target, r))
                .collect(),
        )
    }

    pub fn tree_size(&self) -> usize {
        1 + self.children().iter().map(Expr::tree_size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        self.children()
            .iter()
            .map(|c| 1 + c.depth())
            .max()
            .unwrap_or(0)
    }
}

/// `e(x)` with `x` replaced by `g`; shorthand used by the generators.
pub fn substitute(e: &Expr, v: &str, r: &Expr) -> Expr {
    e.substitute(v, r)
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Binary(BinOp::Add | BinOp::Sub, _) => 1,
        Node::Binary(BinOp::Mul | BinOp::Div, _) => 2,
        Node::Binary(BinOp::Pow, _) => 3,
        Node::Int(n) if n.is_negative() => 1,
        Node::Rational(_) => 2,
        _ => 4,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Int(n) => write!(f, "{n}"),
            Node::Rational(q) => write!(f, "{}/{}", q.numer(), q.denom()),
            Node::Var(s) | Node::Const(s) => write!(f, "{s}"),
            Node::Apply(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Node::Binary(op, [a, b]) => {
                let p = precedence(self);
                let (lp, rp) = match op {
                    BinOp::Pow => (p + 1, p),
                    BinOp::Sub | BinOp::Div => (p, p + 1),
                    _ => (p, p),
                };
                let sym = match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                paren(f, a, precedence(a) < lp)?;
                write!(f, "{sym}")?;
                paren(f, b, precedence(b) < rp)
            }
        }
    }
}

fn paren(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

macro_rules! bin_impl {
    ($tr:ident, $m:ident, $op:expr) => {
        impl ops::$tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::binary($op, self, rhs)
            }
        }
        impl ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                Expr::binary($op, self.clone(), rhs.clone())
            }
        }
        impl ops::$tr<i64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: i64) -> Expr {
                Expr::binary($op, self, Expr::int(rhs))
            }
        }
    };
}

bin_impl!(Add, add, BinOp::Add);
bin_impl!(Sub, sub, BinOp::Sub);
bin_impl!(Mul, mul, BinOp::Mul);
bin_impl!(Div, div, BinOp::Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::int(-1) * self
    }
}
