//! Random non-elementary expressions built around one special-function group.

use rand::seq::SliceRandom;
use rand::Rng;

use super::DatagenError;
use crate::expr::{random_expr, BinOp, Expr, FunctionRegistry, GenConfig};

#[derive(Debug, Clone)]
pub struct SpecialConfig {
    /// Group id from the registry; `None` picks a non-empty group per draw.
    pub group: Option<String>,
    /// Total number of terms, at most 3. `None` draws 1..=3.
    pub num_terms: Option<usize>,
    /// Arguments passed to the special functions.
    pub params: Vec<Expr>,
    /// Integer orders for the first argument of two-argument functions.
    pub orders: (i64, i64),
    /// Probability that an added term is special rather than elementary.
    pub special_prob: f64,
    /// Shape of the elementary terms.
    pub elementary: GenConfig,
}

pub const MAX_SPECIAL_TERMS: usize = 3;

impl Default for SpecialConfig {
    fn default() -> Self {
        let x = Expr::x();
        SpecialConfig {
            group: None,
            num_terms: None,
            params: vec![
                x.clone(),
                x.clone(),
                Expr::int(2) * x.clone(),
                Expr::powi(x.clone(), 2),
                x.clone() + Expr::one(),
            ],
            orders: (0, 3),
            special_prob: 0.5,
            elementary: GenConfig::elementary(2),
        }
    }
}

impl SpecialConfig {
    pub fn with_group(group: &str) -> SpecialConfig {
        SpecialConfig {
            group: Some(group.to_string()),
            ..SpecialConfig::default()
        }
    }

    fn validate(&self) -> Result<(), DatagenError> {
        let bad = |m: &str| Err(DatagenError::InvalidConfig(m.to_string()));
        if self.params.is_empty() {
            return bad("no parameters for special functions");
        }
        if matches!(self.num_terms, Some(n) if n == 0 || n > MAX_SPECIAL_TERMS) {
            return bad("num_terms must be in 1..=3");
        }
        if self.orders.0 > self.orders.1 {
            return bad("empty order range");
        }
        if !(0.0..=1.0).contains(&self.special_prob) {
            return bad("special_prob must be a probability");
        }
        Ok(())
    }
}

/// Registry groups that have at least one member.
pub fn nonempty_groups() -> Vec<String> {
    let reg = FunctionRegistry::standard();
    reg.groups()
        .iter()
        .filter(|(id, _)| !reg.group_members(id).is_empty())
        .map(|(id, _)| id.clone())
        .collect()
}

fn special_term<R: Rng + ?Sized>(
    cfg: &SpecialConfig,
    members: &[String],
    rng: &mut R,
) -> Result<Expr, DatagenError> {
    let reg = FunctionRegistry::standard();
    let f = members.choose(rng).expect("members are non-empty");
    let arg = cfg.params.choose(rng).expect("params are non-empty").clone();
    let args = match reg.arity(f) {
        Some(2) => vec![Expr::int(rng.gen_range(cfg.orders.0..=cfg.orders.1)), arg],
        _ => vec![arg],
    };
    Ok(reg.apply(f, args)?)
}

/// A base special term combined with up to two more terms via `+ - * /`.
pub fn gen_special<R: Rng + ?Sized>(cfg: &SpecialConfig, rng: &mut R) -> Result<Expr, DatagenError> {
    cfg.validate()?;
    let reg = FunctionRegistry::standard();
    let group = match &cfg.group {
        Some(g) => g.clone(),
        None => nonempty_groups()
            .choose(rng)
            .cloned()
            .ok_or_else(|| DatagenError::EmptyGroup("*".to_string()))?,
    };
    let members: Vec<String> = reg
        .group_members(&group)
        .iter()
        .map(|s| s.name.to_string())
        .collect();
    if members.is_empty() {
        return Err(DatagenError::EmptyGroup(group));
    }
    let num_terms = cfg
        .num_terms
        .unwrap_or_else(|| rng.gen_range(1..=MAX_SPECIAL_TERMS));
    let mut f = special_term(cfg, &members, rng)?;
    for _ in 1..num_terms {
        let g = if rng.gen_bool(cfg.special_prob) {
            special_term(cfg, &members, rng)?
        } else {
            random_expr(&cfg.elementary, rng)?
        };
        let op = *[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]
            .choose(rng)
            .expect("four operators");
        f = Expr::binary(op, f, g);
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Node;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary_count(e: &Expr) -> usize {
        // Only the spine built by the combination loop.
        match e.node() {
            Node::Binary(_, [a, _]) => 1 + binary_count(a),
            _ => 0,
        }
    }

    #[test]
    fn single_error_function_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = SpecialConfig {
            num_terms: Some(1),
            ..SpecialConfig::with_group("error")
        };
        for _ in 0..20 {
            let e = gen_special(&cfg, &mut rng).unwrap();
            let Node::Apply(name, _) = e.node() else { panic!("{e}") };
            assert!(FunctionRegistry::standard().get(name).unwrap().groups.contains(&"error".to_string()));
        }
    }

    #[test]
    fn three_terms_two_combinations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = SpecialConfig {
            num_terms: Some(3),
            ..SpecialConfig::default()
        };
        for _ in 0..20 {
            let e = gen_special(&cfg, &mut rng).unwrap();
            assert_eq!(binary_count(&e), 2, "{e}");
        }
    }

    #[test]
    fn one_group_per_draw() {
        let reg = FunctionRegistry::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = SpecialConfig::default();
        for _ in 0..1000 {
            let e = gen_special(&cfg, &mut rng).unwrap();
            let specials: Vec<_> = e
                .function_names()
                .into_iter()
                .filter(|n| reg.is_special(n))
                .collect();
            assert!(!specials.is_empty());
            let shared = reg.groups().iter().any(|(g, _)| {
                specials
                    .iter()
                    .all(|n| reg.get(n).unwrap().groups.contains(g))
            });
            assert!(shared, "{e}");
        }
    }

    #[test]
    fn empty_group_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = SpecialConfig::with_group("piecewise");
        assert_eq!(
            gen_special(&cfg, &mut rng),
            Err(DatagenError::EmptyGroup("piecewise".into()))
        );
    }
}
