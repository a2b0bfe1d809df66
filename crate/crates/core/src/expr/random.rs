//! Uniform-shape sampling of random unary-binary trees.
//!
//! Operator positions are drawn with a counting scheme:
//! `D(e, n)` counts the trees with `n` operators that can fill `e` empty slots,
//! which makes every tree shape with a given operator count equally likely
//! (modulo operator weights).

use rand::Rng;

use super::registry::FunctionRegistry;
use super::{BinOp, Expr, ExprError};

/// What a unary slot turns into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnaryChoice {
    /// A registered unary function.
    Func(String),
    /// `u^k` for a fixed integer exponent.
    Pow(i64),
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub min_ops: usize,
    pub max_ops: usize,
    pub binary: Vec<(BinOp, f64)>,
    pub unary: Vec<(UnaryChoice, f64)>,
    /// Probability that a leaf is the variable `x` rather than an integer.
    pub var_prob: f64,
    /// Inclusive integer leaf range; zero is skipped unless it is the only value.
    pub int_range: (i64, i64),
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig::elementary(5)
    }
}

impl GenConfig {
    /// Elementary functions with the usual arithmetic.
    pub fn elementary(max_ops: usize) -> GenConfig {
        let f = |n: &str, w: f64| (UnaryChoice::Func(n.to_string()), w);
        GenConfig {
            min_ops: 1,
            max_ops,
            binary: vec![
                (BinOp::Add, 3.0),
                (BinOp::Sub, 1.0),
                (BinOp::Mul, 3.0),
                (BinOp::Div, 1.0),
            ],
            unary: vec![
                f("sin", 1.0),
                f("cos", 1.0),
                f("tan", 0.3),
                f("exp", 1.0),
                f("ln", 1.0),
                f("sqrt", 0.5),
                f("arctan", 0.3),
                f("sinh", 0.2),
                f("cosh", 0.2),
                f("tanh", 0.2),
                (UnaryChoice::Pow(2), 1.0),
                (UnaryChoice::Pow(3), 0.5),
                (UnaryChoice::Pow(-1), 0.3),
            ],
            var_prob: 0.6,
            int_range: (-5, 5),
        }
    }

    /// Only `+`, `-`, `*` and small powers: polynomials in `x`.
    pub fn polynomial(max_ops: usize) -> GenConfig {
        GenConfig {
            binary: vec![(BinOp::Add, 2.0), (BinOp::Sub, 1.0), (BinOp::Mul, 2.0)],
            unary: vec![(UnaryChoice::Pow(2), 1.0), (UnaryChoice::Pow(3), 0.5)],
            ..GenConfig::elementary(max_ops)
        }
    }

    pub fn validate(&self, reg: &FunctionRegistry) -> Result<(), ExprError> {
        let bad = |m: &str| Err(ExprError::InvalidConfig(m.to_string()));
        if self.max_ops < 1 || self.min_ops > self.max_ops {
            return bad("need 1 <= max_ops and min_ops <= max_ops");
        }
        let weights = self.binary.iter().map(|w| w.1).chain(self.unary.iter().map(|w| w.1));
        let mut total = 0.0;
        for w in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return bad("weights must be finite and non-negative");
            }
            total += w;
        }
        if total <= 0.0 {
            return bad("operator weights sum to zero");
        }
        if self.int_range.0 > self.int_range.1 {
            return bad("empty integer range");
        }
        if !(0.0..=1.0).contains(&self.var_prob) {
            return bad("var_prob outside [0, 1]");
        }
        for (u, _) in &self.unary {
            if let UnaryChoice::Func(name) = u {
                if reg.arity(name) != Some(1) {
                    return bad(&format!("`{name}` is not a registered unary function"));
                }
            }
        }
        Ok(())
    }
}

/// Counts `D(e, n)` for `e <= max_e`, `n <= max_n` as floats.
fn count_table(max_n: usize, p1: f64, p2: f64) -> Vec<Vec<f64>> {
    let max_e = max_n + 2;
    // d[n][e]
    let mut d = vec![vec![0.0; max_e + 2]; max_n + 1];
    for e in 1..=max_e + 1 {
        d[0][e] = 1.0;
    }
    for n in 1..=max_n {
        for e in 1..=max_e {
            d[n][e] = d[n][e - 1] + p1 * d[n - 1][e] + p2 * d[n - 1][e + 1];
        }
    }
    d
}

fn pick<'a, T, R: Rng + ?Sized>(items: &'a [(T, f64)], rng: &mut R) -> &'a T {
    let total: f64 = items.iter().map(|w| w.1).sum();
    let mut r = rng.gen::<f64>() * total;
    for (item, w) in items {
        if r < *w {
            return item;
        }
        r -= w;
    }
    &items.iter().rfind(|w| w.1 > 0.0).expect("positive weight").0
}

enum Slot {
    Leaf,
    Unary,
    Binary,
}

/// Samples a random expression; reproducible for a given config and RNG state.
pub fn random_expr<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<Expr, ExprError> {
    let reg = FunctionRegistry::standard();
    cfg.validate(reg)?;
    let p1: f64 = cfg.unary.iter().map(|w| w.1).sum();
    let p2: f64 = cfg.binary.iter().map(|w| w.1).sum();
    let n_ops = rng.gen_range(cfg.min_ops..=cfg.max_ops);
    let d = count_table(n_ops, p1, p2);

    // Shape in prefix order.
    let mut shape = Vec::with_capacity(2 * n_ops + 1);
    let mut e = 1usize;
    let mut n = n_ops;
    while n > 0 {
        let total = d[n][e];
        let mut r = rng.gen::<f64>() * total;
        let mut chosen = None;
        'outer: for k in 0..e {
            for (arity, weight) in [(1usize, p1), (2, p2)] {
                let w = weight * d[n - 1][e - k - 1 + arity];
                if w <= 0.0 {
                    continue;
                }
                if r < w {
                    chosen = Some((k, arity));
                    break 'outer;
                }
                r -= w;
            }
        }
        let (k, arity) = chosen.unwrap_or_else(|| {
            // Float round-off past the end: take the last admissible choice.
            let arity = if p2 > 0.0 { 2 } else { 1 };
            (e - 1, arity)
        });
        shape.extend((0..k).map(|_| Slot::Leaf));
        shape.push(if arity == 1 { Slot::Unary } else { Slot::Binary });
        e = e - k - 1 + arity;
        n -= 1;
    }
    shape.extend((0..e).map(|_| Slot::Leaf));

    let mut pos = 0;
    Ok(build(&shape, &mut pos, cfg, rng))
}

fn build<R: Rng + ?Sized>(shape: &[Slot], pos: &mut usize, cfg: &GenConfig, rng: &mut R) -> Expr {
    let slot = &shape[*pos];
    *pos += 1;
    match slot {
        Slot::Leaf => leaf(cfg, rng),
        Slot::Unary => {
            let choice = pick(&cfg.unary, rng).clone();
            let arg = build(shape, pos, cfg, rng);
            match choice {
                UnaryChoice::Func(name) => Expr::call(&name, arg),
                UnaryChoice::Pow(k) => arg.powi(k),
            }
        }
        Slot::Binary => {
            let op = *pick(&cfg.binary, rng);
            let a = build(shape, pos, cfg, rng);
            let b = build(shape, pos, cfg, rng);
            Expr::binary(op, a, b)
        }
    }
}

fn leaf<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Expr {
    if rng.gen::<f64>() < cfg.var_prob {
        return Expr::x();
    }
    let (lo, hi) = cfg.int_range;
    if lo == 0 && hi == 0 {
        return Expr::zero();
    }
    loop {
        let v = rng.gen_range(lo..=hi);
        if v != 0 {
            return Expr::int(v);
        }
    }
}
