//! A rule-table integrator: linearity, constants, polynomials, powers of
//! linear forms, and table antiderivatives of registry functions applied to
//! linear arguments.

use num::rational::BigRational;
use num::{One, Zero};

use super::poly::Polynomial;
use crate::expr::registry::instantiate;
use crate::expr::{simplify_basic, BinOp, Expr, FunctionRegistry, Node, X};

/// Antiderivative in `x` by table lookup, or `None` when no rule applies.
pub fn integrate_table(e: &Expr) -> Option<Expr> {
    integrate_raw(e).map(|f| simplify_basic(&f))
}

fn is_const(e: &Expr) -> bool {
    !e.contains_var(X)
}

/// `(a, b)` with `e = a x + b`, `a != 0`.
pub fn as_linear(e: &Expr) -> Option<(BigRational, BigRational)> {
    let p = Polynomial::from_expr(e, &Expr::x())?;
    if p.degree() != Some(1) {
        return None;
    }
    Some((p.coeff(1), p.coeff(0)))
}

fn integrate_raw(e: &Expr) -> Option<Expr> {
    if is_const(e) {
        return Some(if e.is_one() { Expr::x() } else { e.clone() * Expr::x() });
    }
    if let Some(p) = Polynomial::from_expr(e, &Expr::x()) {
        let coeffs = std::iter::once(BigRational::zero())
            .chain(
                p.coeffs()
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c / BigRational::from_integer((k as i64 + 1).into())),
            )
            .collect();
        return Some(Polynomial::new(coeffs).to_expr(&Expr::x()));
    }
    match e.node() {
        Node::Binary(BinOp::Add, [a, b]) => Some(integrate_raw(a)? + integrate_raw(b)?),
        Node::Binary(BinOp::Sub, [a, b]) => Some(integrate_raw(a)? - integrate_raw(b)?),
        Node::Binary(BinOp::Mul, [a, b]) if is_const(a) => Some(a.clone() * integrate_raw(b)?),
        Node::Binary(BinOp::Mul, [a, b]) if is_const(b) => Some(integrate_raw(a)? * b.clone()),
        Node::Binary(BinOp::Div, [a, b]) if is_const(b) => Some(integrate_raw(a)? / b.clone()),
        Node::Binary(BinOp::Div, [a, b]) if is_const(a) => {
            // c / (αx+β) and c / (αx+β)^n
            Some(a.clone() * integrate_raw(&b.clone().powi(-1))?)
        }
        Node::Binary(BinOp::Pow, [base, k]) if is_const(k) => {
            let (alpha, _) = as_linear(base)?;
            let alpha = Expr::number(alpha);
            if k.as_number().is_some_and(|n| n == -BigRational::one()) {
                Some(Expr::call("ln", base.clone()) / alpha)
            } else {
                let k1 = k.clone() + 1;
                Some(base.clone().pow(k1.clone()) / (k1 * alpha))
            }
        }
        Node::Binary(BinOp::Pow, [base, k]) if is_const(base) => {
            // c^(αx+β) = exp((αx+β) ln c)
            let (alpha, _) = as_linear(k)?;
            Some(e.clone() / (Expr::number(alpha) * Expr::call("ln", base.clone())))
        }
        Node::Apply(name, args) if args.len() == 1 => {
            let spec = FunctionRegistry::standard().get(name)?;
            let anti = spec.antiderivative.as_ref()?;
            let (alpha, _) = as_linear(&args[0])?;
            Some(instantiate(anti, args) / Expr::number(alpha))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_prefix, to_prefix_string};

    fn int(t: &str) -> Option<String> {
        integrate_table(&parse_prefix(t).unwrap()).map(|e| to_prefix_string(&e))
    }

    #[test]
    fn examples() {
        assert_eq!(int("* 3 ^ x 2").as_deref(), Some("^ x 3"));
        assert_eq!(int("cos + * 2 x 1").as_deref(), Some("* 1/2 sin + * 2 x 1"));
        assert_eq!(int("sin ^ x 2"), None);
        assert_eq!(int("/ 1 + x 1").as_deref(), Some("ln + x 1"));
        assert_eq!(int("5").as_deref(), Some("* 5 x"));
    }
}
