use std::collections::HashMap;

use num::rational::BigRational;
use num::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::integrate::integrate_table;
use super::{DataPair, DatagenError, Generator, MAX_RETRIES};
use crate::expr::registry::instantiate;
use crate::expr::{
    canonical_key, differentiate, random_expr, simplify_basic, BinOp, Expr, FunctionRegistry,
    GenConfig, Node, X,
};

/// Known (integrand, integral) pairs, searchable by integrand up to a
/// numeric factor.
#[derive(Debug, Clone, Default)]
pub struct Pool {
    pairs: Vec<(Expr, Expr)>,
    index: HashMap<String, (BigRational, usize)>,
}

/// Splits `e = c * rest` with `c` a numeric leading factor.
fn split_coefficient(e: &Expr) -> (BigRational, Expr) {
    if let Node::Binary(BinOp::Mul, [a, b]) = e.node() {
        if let Some(c) = a.as_number() {
            return (c, b.clone());
        }
        // Left-folded products keep their numeric factor innermost-left.
        let (c, inner) = split_coefficient(a);
        if !c.is_one() {
            return (c, simplify_basic(&(inner * b.clone())));
        }
    }
    if let Some(c) = e.as_number() {
        return (c, Expr::one());
    }
    (BigRational::one(), e.clone())
}

impl Pool {
    pub fn new() -> Pool {
        Pool::default()
    }

    /// Table antiderivatives of the registry plus a few monomials.
    pub fn seeded() -> Pool {
        let mut pool = Pool::new();
        let x = Expr::x();
        for k in 1..=4 {
            pool.push(
                x.clone().powi(k),
                x.clone().powi(k + 1) / Expr::int(k + 1),
            );
        }
        pool.push(Expr::one() / x.clone(), Expr::call("ln", x.clone()));
        for spec in FunctionRegistry::standard().specs() {
            if let Some(anti) = &spec.antiderivative {
                pool.push(
                    Expr::call(&spec.name, x.clone()),
                    instantiate(anti, &[x.clone()]),
                );
            }
        }
        pool
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(Expr, Expr)] {
        &self.pairs
    }

    /// Adds a pair; both sides are simplified first. Later duplicates are ignored
    /// by [`Pool::lookup`].
    pub fn push(&mut self, integrand: Expr, integral: Expr) {
        let f = simplify_basic(&integrand);
        let g = simplify_basic(&integral);
        let (c, rest) = split_coefficient(&f);
        if c.is_zero() {
            return;
        }
        self.index
            .entry(canonical_key(&rest))
            .or_insert((c, self.pairs.len()));
        self.pairs.push((f, g));
    }

    /// An antiderivative of `e` from the pool, up to a numeric factor.
    pub fn lookup(&self, e: &Expr) -> Option<Expr> {
        let (c, rest) = split_coefficient(&simplify_basic(e));
        let (c0, idx) = self.index.get(&canonical_key(&rest))?;
        let factor = c / c0;
        Some(simplify_basic(&(Expr::number(factor) * self.pairs[*idx].1.clone())))
    }

    /// Pool lookup first, then the rule table.
    pub fn integrate(&self, e: &Expr) -> Option<Expr> {
        self.lookup(e).or_else(|| integrate_table(e))
    }

    fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&(Expr, Expr)> {
        self.pairs.choose(rng)
    }
}

fn nonzero_int<R: Rng + ?Sized>(rng: &mut R, lo: i64, hi: i64) -> i64 {
    loop {
        let v = rng.gen_range(lo..=hi);
        if v != 0 {
            return v;
        }
    }
}

/// `a x + b` with `a != 0`.
fn random_linear<R: Rng + ?Sized>(rng: &mut R) -> (i64, Expr) {
    let a = nonzero_int(rng, -5, 5);
    let b = rng.gen_range(-5..=5);
    (a, simplify_basic(&(Expr::int(a) * Expr::x() + Expr::int(b))))
}

fn finish(integrand: Expr, integral: Expr, generator: Generator, seed: u64) -> Result<DataPair, DatagenError> {
    let integrand = simplify_basic(&integrand);
    let integral = simplify_basic(&integral);
    if integrand.is_zero() || !integral.contains_var(X) {
        return Err(DatagenError::DegeneratePair);
    }
    Ok(DataPair::verified_new(integrand, integral, generator, seed))
}

/// Differentiates `integral` into a pair.
pub fn backward_pair(integral: &Expr, generator: Generator, seed: u64) -> Result<DataPair, DatagenError> {
    let integral = simplify_basic(integral);
    let integrand = differentiate(&integral, X)?;
    finish(integrand, integral, generator, seed)
}

/// BWD: differentiate a random expression.
pub fn gen_bwd(cfg: &GenConfig, seed: u64) -> Result<DataPair, DatagenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_expr(cfg, &mut rng)?;
    backward_pair(&f, Generator::Bwd, seed)
}

/// Integrates `integrand` with the rule table into a pair.
pub fn forward_pair(integrand: &Expr, seed: u64) -> Result<DataPair, DatagenError> {
    let f = simplify_basic(integrand);
    let big_f = integrate_table(&f).ok_or(DatagenError::NotIntegrableByTable)?;
    finish(f, big_f, Generator::Fwd, seed)
}

/// FWD: integrate a random expression with the rule table.
pub fn gen_fwd(cfg: &GenConfig, seed: u64) -> Result<DataPair, DatagenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_expr(cfg, &mut rng)?;
    forward_pair(&f, seed)
}

/// Integration by parts with explicit `F` and `G`:
/// `int F G' = F G - int F' G`, where `int F' G` comes from `pool`.
pub fn ibp_pair(pool: &Pool, f: &Expr, g: &Expr, seed: u64) -> Result<DataPair, DatagenError> {
    let df = differentiate(f, X)?;
    let dg = differentiate(g, X)?;
    let inner = simplify_basic(&(df * g.clone()));
    let known = if inner.is_zero() {
        Expr::zero()
    } else {
        pool.integrate(&inner).ok_or(DatagenError::NoApplicablePair)?
    };
    finish(f.clone() * dg, f.clone() * g.clone() - known, Generator::Ibp, seed)
}

/// IBP: `F` linear and `G` a pool integrand or a table-integrable expression,
/// or both random with `int F' G` found in the pool.
pub fn gen_ibp(pool: &Pool, cfg: &GenConfig, seed: u64) -> Result<DataPair, DatagenError> {
    if pool.is_empty() {
        return Err(DatagenError::NoApplicablePair);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let small = GenConfig {
        max_ops: cfg.max_ops.clamp(1, 3),
        min_ops: 1,
        ..cfg.clone()
    };
    for _ in 0..MAX_RETRIES {
        let mode: f64 = rng.gen();
        let (f, g) = if mode < 0.5 {
            let (_, f) = random_linear(&mut rng);
            (f, pool.choose(&mut rng).unwrap().0.clone())
        } else if mode < 0.8 {
            let (_, f) = random_linear(&mut rng);
            (f, simplify_basic(&random_expr(&small, &mut rng)?))
        } else {
            (
                simplify_basic(&random_expr(&small, &mut rng)?),
                simplify_basic(&random_expr(&small, &mut rng)?),
            )
        };
        if !g.contains_var(X) || !f.contains_var(X) {
            continue;
        }
        match ibp_pair(pool, &f, &g, seed) {
            Ok(p) => return Ok(p),
            Err(DatagenError::NoApplicablePair | DatagenError::DegeneratePair) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(DatagenError::NoApplicablePair)
}

/// Substitution rule with an explicit inner function:
/// `(f(g) g', F(g))` from a known `(f, F)`.
pub fn sub_pair(f: &Expr, big_f: &Expr, g: &Expr, seed: u64) -> Result<DataPair, DatagenError> {
    let dg = differentiate(g, X)?;
    let integrand = f.substitute(X, g) * dg;
    finish(integrand, big_f.substitute(X, g), Generator::Sub, seed)
}

/// SUB: a pool pair composed with a random inner function.
pub fn gen_sub(pool: &Pool, cfg: &GenConfig, seed: u64) -> Result<DataPair, DatagenError> {
    if pool.is_empty() {
        return Err(DatagenError::NoApplicablePair);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let small = GenConfig {
        max_ops: cfg.max_ops.clamp(1, 2),
        min_ops: 1,
        ..cfg.clone()
    };
    for _ in 0..MAX_RETRIES {
        let (f, big_f) = pool.choose(&mut rng).unwrap().clone();
        let g = if rng.gen_bool(0.4) {
            random_linear(&mut rng).1
        } else {
            simplify_basic(&random_expr(&small, &mut rng)?)
        };
        if !g.contains_var(X) || g == Expr::x() {
            continue;
        }
        match sub_pair(&f, &big_f, &g, seed) {
            Ok(p) => return Ok(p),
            Err(DatagenError::DegeneratePair) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(DatagenError::NoApplicablePair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_prefix, to_prefix_string};

    fn e(t: &str) -> Expr {
        parse_prefix(t).unwrap()
    }

    #[test]
    fn bwd_examples() {
        let p = backward_pair(&e("^ x 2"), Generator::Bwd, 0).unwrap();
        assert_eq!(to_prefix_string(&p.integrand), "* 2 x");
        assert!(p.verified);
        let p = backward_pair(&e("sin ^ x 2"), Generator::Bwd, 0).unwrap();
        assert!(p.verified);
        assert_eq!(backward_pair(&e("5"), Generator::Bwd, 0), Err(DatagenError::DegeneratePair));
    }

    #[test]
    fn fwd_examples() {
        let p = forward_pair(&e("* 3 ^ x 2"), 0).unwrap();
        assert_eq!(to_prefix_string(&p.integral), "^ x 3");
        assert!(p.verified);
        assert!(forward_pair(&e("cos + * 2 x 1"), 0).unwrap().verified);
        assert_eq!(forward_pair(&e("sin ^ x 2"), 0), Err(DatagenError::NotIntegrableByTable));
    }

    #[test]
    fn ibp_examples() {
        let pool = Pool::seeded();
        let p = ibp_pair(&pool, &e("x"), &e("* -1 cos x"), 0).unwrap();
        assert_eq!(p.integrand, simplify_basic(&e("* x sin x")));
        assert!(p.verified);
        let p = ibp_pair(&pool, &Expr::one(), &Expr::x(), 0).unwrap();
        assert_eq!((p.integrand.clone(), p.integral.clone()), (Expr::one(), Expr::x()));
    }

    #[test]
    fn sub_examples() {
        let p = sub_pair(&e("cos x"), &e("sin x"), &e("^ x 2"), 0).unwrap();
        assert!(p.verified);
        assert_eq!(to_prefix_string(&p.integral), "sin ^ x 2");
        let p = sub_pair(&e("cos x"), &e("sin x"), &Expr::x(), 0).unwrap();
        assert_eq!((to_prefix_string(&p.integrand), to_prefix_string(&p.integral)),
                   ("cos x".to_string(), "sin x".to_string()));
        let p = sub_pair(&e("/ 1 x"), &e("ln x"), &e("+ x 1"), 0).unwrap();
        assert_eq!(to_prefix_string(&p.integrand), "/ 1 + x 1");
        assert!(p.verified);
    }

    #[test]
    fn pool_lookup_scales() {
        let pool = Pool::seeded();
        let got = pool.lookup(&e("* 3 cos x")).unwrap();
        assert_eq!(to_prefix_string(&got), "* 3 sin x");
    }
}
