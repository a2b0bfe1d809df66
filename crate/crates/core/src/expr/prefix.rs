//! Bracket-free prefix (Polish) serialization.
//!
//! Tokens: `+ - * / ^`, decimal integers (`-3`), rationals as one token (`-1/2`),
//! named constants (`pi`), registry functions, and anything else that looks
//! like an identifier is a variable.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Signed, Zero};

use super::registry::FunctionRegistry;
use super::{constant_value, BinOp, Expr, ExprError, Node};

/// Pre-order token list. Its length always equals `e.tree_size()`.
pub fn to_prefix(e: &Expr) -> Vec<String> {
    let mut out = Vec::with_capacity(16);
    emit(e, &mut out);
    out
}

/// [`to_prefix`] joined with single spaces.
pub fn to_prefix_string(e: &Expr) -> String {
    to_prefix(e).join(" ")
}

/// The token for the node itself, without its children.
pub fn head_token(e: &Expr) -> String {
    match e.node() {
        Node::Int(n) => n.to_string(),
        Node::Rational(q) => format!("{}/{}", q.numer(), q.denom()),
        Node::Var(s) | Node::Const(s) | Node::Apply(s, _) => s.to_string(),
        Node::Binary(op, _) => op.token().to_string(),
    }
}

fn emit(e: &Expr, out: &mut Vec<String>) {
    out.push(head_token(e));
    for c in e.children() {
        emit(c, out);
    }
}

/// Parses a token list against the standard registry.
pub fn from_prefix<S: AsRef<str>>(tokens: &[S]) -> Result<Expr, ExprError> {
    from_prefix_with(tokens, FunctionRegistry::standard())
}

/// Parses whitespace-separated prefix text against the standard registry.
pub fn parse_prefix(text: &str) -> Result<Expr, ExprError> {
    parse_prefix_with(text, FunctionRegistry::standard())
}

pub fn parse_prefix_with(text: &str, reg: &FunctionRegistry) -> Result<Expr, ExprError> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    from_prefix_with(&toks, reg)
}

enum Tok {
    Leaf(Expr),
    Op(BinOp),
    Func(String, usize),
}

fn classify(tok: &str, reg: &FunctionRegistry) -> Result<Tok, ExprError> {
    if let Some(op) = BinOp::from_token(tok) {
        return Ok(Tok::Op(op));
    }
    if let Some(n) = parse_int(tok) {
        return Ok(Tok::Leaf(Expr::int(n)));
    }
    if let Some((p, q)) = tok.split_once('/') {
        if let (Some(p), Some(q)) = (parse_int(p), parse_int(q)) {
            if q.is_positive() {
                return Ok(Tok::Leaf(Expr::number(BigRational::new(p, q))));
            }
        }
        return Err(ExprError::UnknownSymbol(tok.to_string()));
    }
    if constant_value(tok).is_some() {
        return Ok(Tok::Leaf(Expr::constant(tok)));
    }
    if let Some(arity) = reg.arity(tok) {
        return Ok(Tok::Func(tok.to_string(), arity));
    }
    if is_identifier(tok) {
        return Ok(Tok::Leaf(Expr::var(tok)));
    }
    Err(ExprError::UnknownSymbol(tok.to_string()))
}

fn parse_int(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn from_prefix_with<S: AsRef<str>>(
    tokens: &[S],
    reg: &FunctionRegistry,
) -> Result<Expr, ExprError> {
    // Classify everything first so an unknown token is reported even when the
    // term would also be truncated.
    let toks = tokens
        .iter()
        .map(|t| classify(t.as_ref(), reg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut pos = 0;
    let e = parse_at(&toks, &mut pos)?;
    if pos < toks.len() {
        return Err(ExprError::TrailingTokens(toks.len() - pos));
    }
    Ok(e)
}

fn parse_at(toks: &[Tok], pos: &mut usize) -> Result<Expr, ExprError> {
    let tok = toks.get(*pos).ok_or(ExprError::TruncatedTerm)?;
    *pos += 1;
    match tok {
        Tok::Leaf(e) => Ok(e.clone()),
        Tok::Op(op) => {
            let a = parse_at(toks, pos)?;
            let b = parse_at(toks, pos)?;
            Ok(Expr::binary(*op, a, b))
        }
        Tok::Func(name, arity) => {
            let args = (0..*arity)
                .map(|_| parse_at(toks, pos))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Expr::apply(name, args))
        }
    }
}

/// Sign and magnitude tier of an integer, as used by the tokenizer.
pub fn tier_int(n: &BigInt) -> [&'static str; 2] {
    let sign = if n.is_negative() { "INT-" } else { "INT+" };
    let mag = n.abs();
    let tier = if mag.is_zero() {
        "0"
    } else if mag == BigInt::from(1) {
        "1"
    } else if mag == BigInt::from(2) {
        "2"
    } else if mag < BigInt::from(10) {
        "CONST"
    } else if mag < BigInt::from(100) {
        "CONST2"
    } else {
        "CONST3"
    };
    [sign, tier]
}

/// Prefix tokens with every integer replaced by its two tier tokens and every
/// rational `p/q` written as the explicit tree `/ p q`.
pub fn tiered_prefix(e: &Expr) -> Vec<String> {
    let mut out = Vec::with_capacity(24);
    emit_tiered(e, &mut out);
    out
}

fn emit_tiered(e: &Expr, out: &mut Vec<String>) {
    match e.node() {
        Node::Int(n) => out.extend(tier_int(n).iter().map(|s| s.to_string())),
        Node::Rational(q) => {
            out.push("/".to_string());
            out.extend(tier_int(q.numer()).iter().map(|s| s.to_string()));
            out.extend(tier_int(q.denom()).iter().map(|s| s.to_string()));
        }
        _ => {
            out.push(head_token(e));
            for c in e.children() {
                emit_tiered(c, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_plus_cos_prefix() {
        let e = Expr::one() + Expr::call("cos", Expr::x());
        assert_eq!(to_prefix(&e), ["+", "1", "cos", "x"]);
        assert_eq!(parse_prefix("+ 1 cos x").unwrap(), e);
    }

    #[test]
    fn tree_prefix_example() {
        let e = Expr::call("sin", Expr::x().powi(2)) + Expr::one();
        assert_eq!(to_prefix(&e), ["+", "sin", "^", "x", "2", "1"]);
        assert_eq!(to_prefix(&e).len(), e.tree_size());
    }

    #[test]
    fn errors() {
        assert_eq!(parse_prefix("+ 1"), Err(ExprError::TruncatedTerm));
        assert_eq!(parse_prefix("x x"), Err(ExprError::TrailingTokens(1)));
        assert!(matches!(parse_prefix("+ x ?"), Err(ExprError::UnknownSymbol(_))));
        assert!(matches!(parse_prefix("1/0"), Err(ExprError::UnknownSymbol(_))));
    }

    #[test]
    fn numbers() {
        let e = parse_prefix("* -3/6 -12").unwrap();
        assert_eq!(to_prefix(&e), ["*", "-1/2", "-12"]);
        assert_eq!(parse_prefix("4/2").unwrap(), Expr::int(2));
    }

    #[test]
    fn tiers() {
        let e = parse_prefix("+ * 42 x -1/2").unwrap();
        assert_eq!(
            tiered_prefix(&e),
            ["+", "*", "INT+", "CONST2", "x", "/", "INT-", "1", "INT+", "2"]
        );
    }
}
