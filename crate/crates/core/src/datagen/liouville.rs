//! The Liouville generator: a rational part in the top extension plus
//! constant-weighted logarithms, returned either normalised or as partial
//! fractions.

use num::rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::poly::{partial_fraction, square_free_factor, Polynomial};
use super::{DataPair, DatagenError, Generator, MAX_RETRIES};
use crate::expr::registry::FnClass;
use crate::expr::{differentiate, simplify_basic, BinOp, Expr, FunctionRegistry, Node, X};

/// A field extension over the previous ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extension {
    /// The integration variable itself.
    X,
    /// `exp(k x)`
    Exp(i64),
    /// `ln(x)`
    Ln,
    /// `tan(x)`
    Tan,
    /// Any unary registry function applied to `x`.
    Function(String),
    /// An arbitrary expression in `x`, used for intermediate tower levels.
    Other(Expr),
}

impl Extension {
    pub fn expr(&self) -> Expr {
        match self {
            Extension::X => Expr::x(),
            Extension::Exp(1) => Expr::call("exp", Expr::x()),
            Extension::Exp(k) => Expr::call("exp", Expr::int(*k) * Expr::x()),
            Extension::Ln => Expr::call("ln", Expr::x()),
            Extension::Tan => Expr::call("tan", Expr::x()),
            Extension::Function(f) => Expr::call(f, Expr::x()),
            Extension::Other(e) => e.clone(),
        }
    }

    /// `theta'` as a polynomial in `theta` when it is one.
    fn derivative_poly(&self) -> Option<Polynomial> {
        match self {
            Extension::X => Some(Polynomial::one()),
            Extension::Exp(k) => Some(Polynomial::from_ints(&[0, *k])),
            Extension::Tan => Some(Polynomial::from_ints(&[1, 0, 1])),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LiouvilleConfig {
    /// `theta_0 .. theta_n`; the first must be [`Extension::X`] and the last is
    /// the main symbol of every polynomial.
    pub extensions: Vec<Extension>,
    /// Maximum multiplicity `r` of the denominator factors.
    pub r: usize,
    /// `None` picks normalised or partial-fraction output at random.
    pub normal: Option<bool>,
    /// Bound on the degree of the denominator `D` in the main symbol.
    pub max_degree: usize,
    /// Upper bounds on the number of `A` and `B` log terms.
    pub j_max: usize,
    pub k_max: usize,
    /// Range of the nonzero integer coefficients.
    pub coeff_range: (i64, i64),
}

impl Default for LiouvilleConfig {
    fn default() -> Self {
        LiouvilleConfig {
            extensions: vec![Extension::X],
            r: 2,
            normal: None,
            max_degree: 4,
            j_max: 2,
            k_max: 1,
            coeff_range: (-5, 5),
        }
    }
}

impl LiouvilleConfig {
    pub fn with_main(ext: Extension) -> LiouvilleConfig {
        let mut extensions = vec![Extension::X];
        if ext != Extension::X {
            extensions.push(ext);
        }
        LiouvilleConfig {
            extensions,
            ..LiouvilleConfig::default()
        }
    }

    fn validate(&self) -> Result<(), DatagenError> {
        let bad = |m: &str| Err(DatagenError::InvalidConfig(m.to_string()));
        if self.extensions.first() != Some(&Extension::X) {
            return bad("the first extension must be x");
        }
        if self.r < 1 {
            return bad("r must be at least 1");
        }
        if self.max_degree < 1 {
            return bad("max_degree must be at least 1");
        }
        let (lo, hi) = self.coeff_range;
        if lo > hi || (lo == 0 && hi == 0) {
            return bad("coefficient range has no nonzero value");
        }
        Ok(())
    }
}

/// The sampled ingredients of one Liouville pair.
#[derive(Debug, Clone)]
pub struct LiouvilleParts {
    pub extensions: Vec<Extension>,
    /// Square-free denominator factors `Q_i` with multiplicities.
    pub factors: Vec<(Polynomial, usize)>,
    pub numer: Polynomial,
    /// `A = sum c_i log(Q_{a_i})`, stored as `(c_i, a_i)`.
    pub logs_a: Vec<(i64, usize)>,
    /// `B = sum d_i log(b_i)`, stored as `(d_i, b_i, extension index of b_i's variable)`.
    pub logs_b: Vec<(i64, Polynomial, usize)>,
    pub normal: bool,
}

/// `p/q` in lowest terms with a monic denominator.
#[derive(Debug, Clone)]
struct Frac {
    p: Polynomial,
    q: Polynomial,
}

impl Frac {
    fn new(p: Polynomial, q: Polynomial) -> Frac {
        let g = p.gcd(&q);
        let (p, q) = if g.is_zero() || g.is_constant() {
            (p, q)
        } else {
            (p.exact_div(&g), q.exact_div(&g))
        };
        let lead = q.lead().recip();
        Frac {
            p: p.scale(&lead),
            q: q.scale(&lead),
        }
    }

    fn add(&self, o: &Frac) -> Frac {
        Frac::new(self.p.mul(&o.q).add(&o.p.mul(&self.q)), self.q.mul(&o.q))
    }

    fn to_expr(&self, theta: &Expr) -> Expr {
        let (c, np) = self.p.primitive();
        let (d, dp) = self.q.primitive();
        let numer = np.scale(&(c / d)).to_expr(theta);
        if dp.is_constant() {
            numer
        } else {
            Expr::binary(BinOp::Div, numer, dp.to_expr(theta))
        }
    }
}

impl LiouvilleParts {
    pub fn theta(&self) -> Expr {
        self.extensions.last().expect("at least one extension").expr()
    }

    pub fn denominator(&self) -> Polynomial {
        self.factors
            .iter()
            .fold(Polynomial::one(), |acc, (q, m)| acc.mul(&q.pow(*m)))
    }

    fn log_sum(&self, terms: impl Iterator<Item = (i64, Expr)>) -> Expr {
        let parts: Vec<Expr> = terms
            .map(|(c, arg)| Expr::int(c) * Expr::call("ln", arg))
            .collect();
        Expr::sum(parts)
    }

    pub fn a_expr(&self) -> Expr {
        let theta = self.theta();
        self.log_sum(
            self.logs_a
                .iter()
                .map(|(c, i)| (*c, self.factors[*i].0.to_expr(&theta))),
        )
    }

    pub fn b_expr(&self) -> Expr {
        self.log_sum(
            self.logs_b
                .iter()
                .map(|(d, b, ext)| (*d, b.to_expr(&self.extensions[*ext].expr()))),
        )
    }

    /// `N/D` as one reduced fraction.
    fn rational_part(&self) -> Frac {
        Frac::new(self.numer.clone(), self.denominator())
    }

    pub fn integral(&self) -> Result<Expr, DatagenError> {
        let theta = self.theta();
        let rational = if self.normal {
            let mut f = self.rational_part();
            if f.q.is_constant() {
                f.p = f.p.sub(&Polynomial::constant(f.p.coeff(0)));
            }
            f.to_expr(&theta)
        } else {
            // The additive constant of the polynomial part is dropped.
            let mut pf = partial_fraction(&self.numer, &self.factors)?;
            pf.poly = pf.poly.sub(&Polynomial::constant(pf.poly.coeff(0)));
            pf.to_expr(&theta)
        };
        Ok(simplify_basic(&(rational + self.a_expr() + self.b_expr())))
    }

    pub fn integrand(&self) -> Result<Expr, DatagenError> {
        if !self.normal {
            return Ok(differentiate(&self.integral()?, X)?);
        }
        let theta = self.theta();
        let main = self.extensions.last().unwrap();
        let d = self.denominator();
        // d/dtheta (N/D + sum c log Q).
        let mut s = Frac::new(
            self.numer.derivative().mul(&d).sub(&self.numer.mul(&d.derivative())),
            d.mul(&d),
        );
        for (c, i) in &self.logs_a {
            let q = &self.factors[*i].0;
            let c = BigRational::from_integer((*c).into());
            s = s.add(&Frac::new(q.derivative().scale(&c), q.clone()));
        }
        let rational = match main.derivative_poly() {
            Some(dt) => Frac::new(s.p.mul(&dt), s.q).to_expr(&theta),
            None => s.to_expr(&theta) * differentiate(&theta, X)?,
        };
        let db = differentiate(&self.b_expr(), X)?;
        Ok(simplify_basic(&(rational + db)))
    }

    pub fn to_pair(&self, generator: Generator, seed: u64) -> Result<DataPair, DatagenError> {
        let integrand = self.integrand()?;
        let integral = self.integral()?;
        if integrand.is_zero() || !integral.contains_var(X) {
            return Err(DatagenError::DegeneratePair);
        }
        Ok(DataPair::verified_new(integrand, integral, generator, seed))
    }
}

fn nonzero<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (i64, i64)) -> i64 {
    loop {
        let v = rng.gen_range(lo..=hi);
        if v != 0 {
            return v;
        }
    }
}

/// Random polynomial of exact degree `deg` with integer coefficients.
fn random_poly<R: Rng + ?Sized>(rng: &mut R, deg: usize, range: (i64, i64)) -> Polynomial {
    let mut c: Vec<i64> = (0..deg).map(|_| rng.gen_range(range.0..=range.1)).collect();
    c.push(nonzero(rng, range));
    Polynomial::from_ints(&c)
}

/// Samples the ingredients of a Liouville pair.
pub fn liouville_parts<R: Rng + ?Sized>(
    cfg: &LiouvilleConfig,
    rng: &mut R,
) -> Result<LiouvilleParts, DatagenError> {
    cfg.validate()?;
    let r = rng.gen_range(1..=cfg.r);
    // q_1 .. q_r with deg D = sum i deg(q_i) <= max_degree and at least one non-constant q.
    let mut product = Polynomial::one();
    let mut total = 0;
    for i in 1..=r {
        let room = (cfg.max_degree - total) / i;
        let lo = usize::from(i == 1);
        if room < lo {
            break;
        }
        let deg = rng.gen_range(lo..=room.min(2));
        if deg == 0 {
            continue;
        }
        let qi = random_poly(rng, deg, cfg.coeff_range);
        product = product.mul(&qi.pow(i));
        total += i * deg;
    }
    if product.is_zero() {
        return Err(DatagenError::ZeroDenominator);
    }
    let factors = square_free_factor(&product)?;
    let deg_d: usize = factors.iter().map(|(q, m)| m * q.degree().unwrap_or(0)).sum();
    let numer = if rng.gen_bool(0.1) {
        Polynomial::zero()
    } else {
        let deg = rng.gen_range(0..=deg_d);
        random_poly(rng, deg, cfg.coeff_range)
    };
    let s = factors.len();
    let j = rng.gen_range(0..=s.min(cfg.j_max));
    let mut idx: Vec<usize> = (0..s).collect();
    idx.shuffle(rng);
    let logs_a = idx[..j]
        .iter()
        .map(|&i| (nonzero(rng, cfg.coeff_range), i))
        .collect();
    let k = rng.gen_range(0..=cfg.k_max);
    let logs_b = (0..k)
        .map(|_| {
            let ext = rng.gen_range(0..cfg.extensions.len());
            let deg = rng.gen_range(1..=2);
            (nonzero(rng, cfg.coeff_range), random_poly(rng, deg, cfg.coeff_range), ext)
        })
        .collect();
    Ok(LiouvilleParts {
        extensions: cfg.extensions.clone(),
        factors,
        numer,
        logs_a,
        logs_b,
        normal: cfg.normal.unwrap_or_else(|| rng.gen_bool(0.5)),
    })
}

/// LIOUVILLE: sample parts and build the verified pair, retrying degenerate draws.
pub fn gen_liouville(cfg: &LiouvilleConfig, seed: u64) -> Result<DataPair, DatagenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_RETRIES {
        let parts = liouville_parts(cfg, &mut rng)?;
        match parts.to_pair(Generator::Liouville, seed) {
            Err(DatagenError::DegeneratePair | DatagenError::ZeroDenominator) => continue,
            other => return other,
        }
    }
    Err(DatagenError::DegeneratePair)
}

/// The tower for a special function `f`: `x`, every function application
/// that appears in `f'`, then `f(x)` itself.
pub fn special_extensions(f: &str) -> Result<Vec<Extension>, DatagenError> {
    let fx = Expr::call(f, Expr::x());
    let df = differentiate(&fx, X)?;
    let mut inner: Vec<Expr> = Vec::new();
    df.visit(&mut |e| {
        if matches!(e.node(), Node::Apply(..)) && e.contains_var(X) && !inner.contains(e) {
            inner.push(e.clone());
        }
    });
    let mut exts = vec![Extension::X];
    exts.extend(inner.into_iter().map(Extension::Other));
    exts.push(Extension::Function(f.to_string()));
    Ok(exts)
}

/// Unary special functions with a derivative rule, optionally within one group.
pub fn liouville_special_candidates(group: Option<&str>) -> Vec<String> {
    FunctionRegistry::standard()
        .specs()
        .iter()
        .filter(|s| s.class == FnClass::Special && s.arity == 1 && s.derivatives[0].is_some())
        .filter(|s| group.is_none_or(|g| s.groups.iter().any(|x| x == g)))
        .map(|s| s.name.to_string())
        .collect()
}

/// Liouville generation with a special function as the top extension.
pub fn gen_special_liouville(
    f: &str,
    base: &LiouvilleConfig,
    seed: u64,
) -> Result<DataPair, DatagenError> {
    let reg = FunctionRegistry::standard();
    let spec = reg
        .get(f)
        .ok_or_else(|| DatagenError::Expr(crate::expr::ExprError::UnknownSymbol(f.to_string())))?;
    if spec.arity != 1 || spec.derivatives[0].is_none() {
        return Err(crate::expr::ExprError::UnknownDerivative(f.to_string()).into());
    }
    let cfg = LiouvilleConfig {
        extensions: special_extensions(f)?,
        ..base.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_RETRIES {
        let parts = liouville_parts(&cfg, &mut rng)?;
        match parts.to_pair(Generator::Special, seed) {
            Err(DatagenError::DegeneratePair | DatagenError::ZeroDenominator) => continue,
            other => return other,
        }
    }
    Err(DatagenError::DegeneratePair)
}

/// Checks that `integral` is a rational function of the atoms plus
/// numeric multiples of logs of polynomials in the atoms.
pub fn has_liouville_shape(integral: &Expr, atoms: &[Expr]) -> bool {
    let mut terms = Vec::new();
    split_sum(integral, &mut terms);
    terms.iter().all(|t| is_rational_in(t, atoms) || is_log_term(t, atoms))
}

fn split_sum(e: &Expr, out: &mut Vec<Expr>) {
    match e.node() {
        Node::Binary(BinOp::Add | BinOp::Sub, [a, b]) => {
            split_sum(a, out);
            split_sum(b, out);
        }
        _ => out.push(e.clone()),
    }
}

fn is_log_term(e: &Expr, atoms: &[Expr]) -> bool {
    match e.node() {
        Node::Binary(BinOp::Mul, [c, l]) if c.is_number() => is_log_term(l, atoms),
        Node::Apply(name, args) if &**name == "ln" && args.len() == 1 => {
            is_polynomial_in(&args[0], atoms)
        }
        _ => false,
    }
}

fn is_rational_in(e: &Expr, atoms: &[Expr]) -> bool {
    if e.is_number() || atoms.contains(e) {
        return true;
    }
    match e.node() {
        Node::Binary(BinOp::Pow, [b, k]) => k.as_int().is_some() && is_rational_in(b, atoms),
        Node::Binary(_, [a, b]) => is_rational_in(a, atoms) && is_rational_in(b, atoms),
        _ => false,
    }
}

fn is_polynomial_in(e: &Expr, atoms: &[Expr]) -> bool {
    if e.is_number() || atoms.contains(e) {
        return true;
    }
    match e.node() {
        Node::Binary(BinOp::Pow, [b, k]) => {
            k.as_int().is_some_and(|k| k >= &0.into()) && is_polynomial_in(b, atoms)
        }
        Node::Binary(BinOp::Div, [a, b]) => b.is_number() && is_polynomial_in(a, atoms),
        Node::Binary(_, [a, b]) => is_polynomial_in(a, atoms) && is_polynomial_in(b, atoms),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval_numeric, Env};

    fn p(c: &[i64]) -> Polynomial {
        Polynomial::from_ints(c)
    }

    fn close_at(a: &Expr, b: &Expr, x: f64) -> bool {
        let va = eval_numeric(a, &Env::x(x)).unwrap();
        let vb = eval_numeric(b, &Env::x(x)).unwrap();
        (va - vb).abs() <= 1e-10 * va.abs().max(1.0)
    }

    #[test]
    fn simple_rational_plus_log() {
        let parts = LiouvilleParts {
            extensions: vec![Extension::X],
            factors: vec![(p(&[0, 1]), 1)],
            numer: p(&[1]),
            logs_a: vec![(1, 0)],
            logs_b: vec![],
            normal: true,
        };
        let pair = parts.to_pair(Generator::Liouville, 3).unwrap();
        assert!(pair.verified);
        let want_f = crate::expr::parse_prefix("+ * -1 ^ x -2 / 1 x").unwrap();
        let want_g = crate::expr::parse_prefix("+ / 1 x ln x").unwrap();
        for x in [0.5, 1.5, 2.5] {
            assert!(close_at(&pair.integrand, &want_f, x));
            assert!(close_at(&pair.integral, &want_g, x));
        }
        assert!(has_liouville_shape(&pair.integral, &[Expr::x()]));
    }

    #[test]
    fn pure_log_term() {
        let parts = LiouvilleParts {
            extensions: vec![Extension::X],
            factors: vec![],
            numer: Polynomial::zero(),
            logs_a: vec![],
            logs_b: vec![(1, p(&[1, 0, 1]), 0)],
            normal: false,
        };
        let pair = parts.to_pair(Generator::Liouville, 0).unwrap();
        assert!(pair.verified);
        let want = crate::expr::parse_prefix("/ * 2 x + ^ x 2 1").unwrap();
        assert!(close_at(&pair.integrand, &want, 0.7));
    }

    #[test]
    fn special_extension_lists() {
        let ext = special_extensions("erf").unwrap();
        let s: Vec<String> = ext.iter().map(|e| e.expr().to_string()).collect();
        assert!(s.iter().any(|t| t.starts_with("exp(")), "{s:?}");
        assert_eq!(s.last().unwrap(), "erf(x)");
        let ext = special_extensions("Si").unwrap();
        assert!(ext.iter().any(|e| e.expr().to_string() == "sin(x)"));
    }

    #[test]
    fn special_liouville_verifies() {
        for (i, f) in ["erf", "Si", "Ei", "dilog"].iter().enumerate() {
            let pair = gen_special_liouville(f, &LiouvilleConfig::default(), i as u64).unwrap();
            assert!(pair.verified, "{f}: {} / {}", pair.integrand, pair.integral);
            assert!(pair.integral.function_names().iter().any(|n| &**n == *f));
        }
    }

    #[test]
    fn random_parts_verify_and_have_shape() {
        let cfg = LiouvilleConfig::default();
        for seed in 0..50 {
            let pair = gen_liouville(&cfg, seed).unwrap();
            assert!(pair.verified, "{} / {}", pair.integrand, pair.integral);
            assert!(has_liouville_shape(&pair.integral, &[Expr::x()]), "{}", pair.integral);
        }
    }

    #[test]
    fn exp_tower() {
        let cfg = LiouvilleConfig::with_main(Extension::Exp(1));
        for seed in 0..20 {
            let pair = gen_liouville(&cfg, seed).unwrap();
            assert!(pair.verified, "{} / {}", pair.integrand, pair.integral);
        }
    }

    #[test]
    fn bad_config() {
        let cfg = LiouvilleConfig { r: 0, ..LiouvilleConfig::default() };
        assert!(matches!(gen_liouville(&cfg, 0), Err(DatagenError::InvalidConfig(_))));
    }
}
