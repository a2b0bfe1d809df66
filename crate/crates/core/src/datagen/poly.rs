//! Dense univariate polynomials over exact rationals, square-free
//! factorization and partial fractions.

use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Signed, ToPrimitive, Zero};

use super::DatagenError;
use crate::expr::{simplify_basic, BinOp, Expr, Node};

/// `coeffs[k]` multiplies `t^k`. The last coefficient is never zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Polynomial {
    coeffs: Vec<BigRational>,
}

fn q(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<BigRational>) -> Polynomial {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Polynomial {
        Polynomial::new(coeffs.iter().map(|&c| q(c)).collect())
    }

    pub fn zero() -> Polynomial {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: BigRational) -> Polynomial {
        Polynomial::new(vec![c])
    }

    pub fn one() -> Polynomial {
        Polynomial::constant(BigRational::one())
    }

    /// The main symbol `t` itself.
    pub fn t() -> Polynomial {
        Polynomial::from_ints(&[0, 1])
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial has none.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn lead(&self) -> BigRational {
        self.coeffs.last().cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn coeff(&self, k: usize) -> BigRational {
        self.coeffs.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn scale(&self, c: &BigRational) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn add(&self, o: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(o.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }

    pub fn sub(&self, o: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(o.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }

    pub fn mul(&self, o: &Polynomial) -> Polynomial {
        if self.is_zero() || o.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    pub fn pow(&self, k: usize) -> Polynomial {
        let mut acc = Polynomial::one();
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * q(k as i64))
                .collect(),
        )
    }

    /// Euclidean division. Panics when dividing by zero.
    pub fn div_rem(&self, d: &Polynomial) -> (Polynomial, Polynomial) {
        let dd = d.degree().expect("division by the zero polynomial");
        let lead = d.lead();
        let mut rem = self.coeffs.clone();
        let mut quo = vec![BigRational::zero(); self.coeffs.len().saturating_sub(dd)];
        while rem.len() > dd && !rem.is_empty() {
            let k = rem.len() - 1 - dd;
            let c = rem.last().unwrap() / &lead;
            for (i, dc) in d.coeffs.iter().enumerate() {
                rem[k + i] -= &c * dc;
            }
            quo[k] = c;
            rem.pop();
            while rem.last().is_some_and(|c| c.is_zero()) {
                rem.pop();
            }
        }
        (Polynomial::new(quo), Polynomial::new(rem))
    }

    /// Exact quotient; panics if the division leaves a remainder.
    pub fn exact_div(&self, d: &Polynomial) -> Polynomial {
        let (quo, rem) = self.div_rem(d);
        assert!(rem.is_zero(), "inexact polynomial division");
        quo
    }

    pub fn monic(&self) -> Polynomial {
        if self.is_zero() {
            return Polynomial::zero();
        }
        self.scale(&self.lead().recip())
    }

    /// Monic greatest common divisor (zero only when both inputs are zero).
    pub fn gcd(&self, o: &Polynomial) -> Polynomial {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Returns `(g, s, t)` with `s*self + t*o = g`, `g` monic.
    pub fn ext_gcd(&self, o: &Polynomial) -> (Polynomial, Polynomial, Polynomial) {
        let (mut r0, mut r1) = (self.clone(), o.clone());
        let (mut s0, mut s1) = (Polynomial::one(), Polynomial::zero());
        let (mut t0, mut t1) = (Polynomial::zero(), Polynomial::one());
        while !r1.is_zero() {
            let (quo, r) = r0.div_rem(&r1);
            let s = s0.sub(&quo.mul(&s1));
            let t = t0.sub(&quo.mul(&t1));
            r0 = std::mem::replace(&mut r1, r);
            s0 = std::mem::replace(&mut s1, s);
            t0 = std::mem::replace(&mut t1, t);
        }
        if r0.is_zero() {
            return (r0, s0, t0);
        }
        let inv = r0.lead().recip();
        (r0.scale(&inv), s0.scale(&inv), t0.scale(&inv))
    }

    /// Integer coefficients with content 1 and a positive leading coefficient,
    /// together with the rational factor taken out (`self = c * prim`).
    pub fn primitive(&self) -> (BigRational, Polynomial) {
        if self.is_zero() {
            return (BigRational::zero(), Polynomial::zero());
        }
        let den_lcm = self
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<BigInt> = self
            .coeffs
            .iter()
            .map(|c| (c * BigRational::from_integer(den_lcm.clone())).to_integer())
            .collect();
        let mut g = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
        if ints.last().unwrap().is_negative() {
            g = -g;
        }
        let prim = Polynomial::new(
            ints.iter()
                .map(|c| BigRational::from_integer(c / &g))
                .collect(),
        );
        (BigRational::new(g, den_lcm), prim)
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * t + c.to_f64().unwrap_or(f64::NAN))
    }

    pub fn eval(&self, t: &BigRational) -> BigRational {
        self.coeffs
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * t + c)
    }

    /// Expanded expression `sum c_k * t^k` with `t` replaced by `theta`.
    pub fn to_expr(&self, theta: &Expr) -> Expr {
        if self.is_zero() {
            return Expr::zero();
        }
        let terms = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| {
                let mono = match k {
                    0 => Expr::one(),
                    1 => theta.clone(),
                    _ => theta.clone().powi(k as i64),
                };
                if k == 0 {
                    Expr::number(c.clone())
                } else if c.is_one() {
                    mono
                } else {
                    Expr::number(c.clone()) * mono
                }
            });
        simplify_basic(&Expr::sum(terms))
    }

    /// Reads a polynomial in `theta` with rational coefficients back from an
    /// expression. `None` when the expression is not of that form.
    pub fn from_expr(e: &Expr, theta: &Expr) -> Option<Polynomial> {
        if e == theta {
            return Some(Polynomial::t());
        }
        if let Some(c) = e.as_number() {
            return Some(Polynomial::constant(c));
        }
        match e.node() {
            Node::Binary(op, [a, b]) => match op {
                BinOp::Add => Some(Self::from_expr(a, theta)?.add(&Self::from_expr(b, theta)?)),
                BinOp::Sub => Some(Self::from_expr(a, theta)?.sub(&Self::from_expr(b, theta)?)),
                BinOp::Mul => Some(Self::from_expr(a, theta)?.mul(&Self::from_expr(b, theta)?)),
                BinOp::Div => {
                    let c = b.as_number()?;
                    if c.is_zero() {
                        return None;
                    }
                    Some(Self::from_expr(a, theta)?.scale(&c.recip()))
                }
                BinOp::Pow => {
                    let k = b.as_int()?.to_usize()?;
                    if k > 64 {
                        return None;
                    }
                    Some(Self::from_expr(a, theta)?.pow(k))
                }
            },
            _ => None,
        }
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expr(&Expr::var("t")))
    }
}

/// Yun's square-free factorization. Returns `(Q_i, i)` with every `Q_i`
/// primitive, square-free, non-constant and pairwise coprime, such that the
/// input equals a constant times `prod Q_i^i`.
pub fn square_free_factor(p: &Polynomial) -> Result<Vec<(Polynomial, usize)>, DatagenError> {
    if p.is_zero() {
        return Err(DatagenError::ZeroPolynomial);
    }
    let mut out = Vec::new();
    if p.is_constant() {
        return Ok(out);
    }
    let dp = p.derivative();
    let c = p.gcd(&dp);
    let mut w = p.exact_div(&c);
    let mut y = dp.exact_div(&c);
    let mut z = y.sub(&w.derivative());
    let mut i = 1;
    while !w.is_constant() {
        let g = w.gcd(&z);
        if !g.is_constant() {
            out.push((g.primitive().1, i));
        }
        w = w.exact_div(&g);
        y = z.exact_div(&g);
        z = y.sub(&w.derivative());
        i += 1;
    }
    Ok(out)
}

/// Polynomial part plus terms `numer / base^power` with `deg numer < deg base`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractions {
    pub poly: Polynomial,
    pub terms: Vec<PfTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfTerm {
    pub numer: Polynomial,
    pub base: Polynomial,
    pub power: usize,
}

impl PartialFractions {
    /// Sum of all parts over one common denominator, as `(numer, denom)`.
    pub fn recombine(&self) -> (Polynomial, Polynomial) {
        let mut num = self.poly.clone();
        let mut den = Polynomial::one();
        for t in &self.terms {
            let td = t.base.pow(t.power);
            num = num.mul(&td).add(&t.numer.mul(&den));
            den = den.mul(&td);
        }
        (num, den)
    }

    pub fn to_expr(&self, theta: &Expr) -> Expr {
        let mut parts = Vec::new();
        if !self.poly.is_zero() {
            parts.push(self.poly.to_expr(theta));
        }
        for t in &self.terms {
            let base = t.base.to_expr(theta);
            let den = if t.power == 1 { base } else { base.powi(t.power as i64) };
            parts.push(t.numer.to_expr(theta) / den);
        }
        simplify_basic(&Expr::sum(parts))
    }
}

/// Decomposes `n / prod(base_i^m_i)` over pairwise coprime bases.
pub fn partial_fraction(
    n: &Polynomial,
    factors: &[(Polynomial, usize)],
) -> Result<PartialFractions, DatagenError> {
    let blocks: Vec<Polynomial> = factors.iter().map(|(b, m)| b.pow(*m)).collect();
    if blocks.iter().any(Polynomial::is_zero) {
        return Err(DatagenError::ZeroPolynomial);
    }
    let d = blocks.iter().fold(Polynomial::one(), |acc, b| acc.mul(b));
    let (poly, mut rem) = n.div_rem(&d);
    let mut terms = Vec::new();
    for (i, ((base, m), block)) in factors.iter().zip(&blocks).enumerate() {
        if base.is_constant() {
            continue;
        }
        let rest = blocks
            .iter()
            .enumerate()
            .filter(|(j, _)| *j > i)
            .fold(Polynomial::one(), |acc, (_, b)| acc.mul(b));
        let (g, s, _) = rest.ext_gcd(block);
        if !g.is_constant() || g.is_zero() {
            return Err(DatagenError::NotCoprimeFactors);
        }
        // rem/d = (rem*s mod block)/block + ...
        let ni = rem.mul(&s).div_rem(block).1;
        // Remove this block's share from the remainder: rem - ni*rest is divisible by block.
        rem = rem.sub(&ni.mul(&rest)).exact_div(block);
        // base-adic expansion: ni = sum_k c_k base^k, term c_k / base^(m-k).
        let mut cur = ni;
        let mut k = 0;
        while !cur.is_zero() {
            let (quo, c) = cur.div_rem(base);
            if !c.is_zero() {
                terms.push(PfTerm {
                    numer: c,
                    base: base.clone(),
                    power: m - k,
                });
            }
            cur = quo;
            k += 1;
        }
    }
    debug_assert!(rem.is_zero(), "partial fraction remainder left over");
    Ok(PartialFractions { poly, terms })
}
