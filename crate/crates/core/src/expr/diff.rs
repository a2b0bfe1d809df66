use super::registry::{instantiate, FunctionRegistry};
use super::simplify::simplify_basic;
use super::{BinOp, Expr, ExprError, Node};

/// `d e / d v`, simplified with [`simplify_basic`].
pub fn differentiate(e: &Expr, v: &str) -> Result<Expr, ExprError> {
    differentiate_with(e, v, FunctionRegistry::standard())
}

pub fn differentiate_with(e: &Expr, v: &str, reg: &FunctionRegistry) -> Result<Expr, ExprError> {
    Ok(simplify_basic(&raw(e, v, reg)?))
}

fn raw(e: &Expr, v: &str, reg: &FunctionRegistry) -> Result<Expr, ExprError> {
    if !e.contains_var(v) {
        return Ok(Expr::zero());
    }
    Ok(match e.node() {
        Node::Var(_) => Expr::one(),
        Node::Int(_) | Node::Rational(_) | Node::Const(_) => Expr::zero(),
        Node::Binary(op, [a, b]) => {
            let da = raw(a, v, reg)?;
            let db = raw(b, v, reg)?;
            match op {
                BinOp::Add => da + db,
                BinOp::Sub => da - db,
                BinOp::Mul => da * b.clone() + a.clone() * db,
                BinOp::Div if !b.contains_var(v) => da / b.clone(),
                BinOp::Div => (da * b.clone() - a.clone() * db) / b.clone().powi(2),
                BinOp::Pow => {
                    if !b.contains_var(v) {
                        b.clone() * a.clone().pow(b.clone() - 1) * da
                    } else if !a.contains_var(v) {
                        e.clone() * Expr::call("ln", a.clone()) * db
                    } else {
                        e.clone()
                            * (db * Expr::call("ln", a.clone()) + b.clone() * da / a.clone())
                    }
                }
            }
        }
        Node::Apply(name, args) => {
            let spec = reg
                .get(name)
                .ok_or_else(|| ExprError::UnknownDerivative(name.to_string()))?;
            let mut terms = Vec::new();
            for (k, arg) in args.iter().enumerate() {
                if !arg.contains_var(v) {
                    continue;
                }
                let template = spec
                    .derivatives
                    .get(k)
                    .and_then(Option::as_ref)
                    .ok_or_else(|| ExprError::UnknownDerivative(name.to_string()))?;
                terms.push(instantiate(template, args) * raw(arg, v, reg)?);
            }
            Expr::sum(terms)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval_numeric, parse_prefix, to_prefix_string, Env};

    fn d(t: &str) -> Expr {
        differentiate(&parse_prefix(t).unwrap(), "x").unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(to_prefix_string(&d("^ x 2")), "* 2 x");
        assert_eq!(d("7"), Expr::zero());
        let e = d("sin ^ x 2");
        let want = |x: f64| (x * x).cos() * 2.0 * x;
        for &x in &[0.3, -1.2, 2.5] {
            let got = eval_numeric(&e, &Env::x(x)).unwrap();
            assert!((got - want(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_argument_needs_no_rule() {
        let e = parse_prefix("* x BesselJ x 2").unwrap();
        assert!(differentiate(&e, "x").is_err());
        let e = parse_prefix("* x BesselJ 2 3").unwrap();
        assert_eq!(to_prefix_string(&differentiate(&e, "x").unwrap()), "BesselJ 2 3");
    }

    #[test]
    fn unknown_function() {
        let e = Expr::call("foo", Expr::x());
        assert_eq!(differentiate(&e, "x"), Err(ExprError::UnknownDerivative("foo".into())));
    }
}
