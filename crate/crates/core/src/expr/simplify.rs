//! A small, terminating rewrite system plus the canonical commutative order.

use std::cmp::Ordering;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

use super::prefix::{tiered_prefix, to_prefix_string};
use super::{BinOp, Expr, Node};

const MAX_PASSES: usize = 64;
/// Numeric powers are only folded while the result stays this small (in bits).
const MAX_FOLD_BITS: u64 = 512;

/// Constant folding, identity/annihilator elements, flattening of nested sums
/// and products, and canonical ordering of their operands. Idempotent.
pub fn simplify_basic(e: &Expr) -> Expr {
    let mut cur = e.clone();
    for _ in 0..MAX_PASSES {
        let next = pass(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

/// Flattens nested sums/products and sorts their operands, without any folding.
/// Two expressions that differ only by commutative/associative regrouping map
/// to the same tree.
pub fn canonical_order(e: &Expr) -> Expr {
    if e.is_leaf() {
        return e.clone();
    }
    let kids: Vec<Expr> = e.children().iter().map(canonical_order).collect();
    match e.node() {
        Node::Binary(op @ (BinOp::Add | BinOp::Mul), _) => {
            let mut items = Vec::new();
            for k in &kids {
                flatten_into(*op, k, &mut items);
            }
            sort_operands(*op, &mut items);
            fold(*op, items)
        }
        _ => e.with_children(kids),
    }
}

/// Raw prefix string of the canonically ordered expression.
pub fn canonical_key(e: &Expr) -> String {
    to_prefix_string(&canonical_order(e))
}

fn flatten_into(op: BinOp, e: &Expr, out: &mut Vec<Expr>) {
    match e.node() {
        Node::Binary(o, [a, b]) if *o == op => {
            flatten_into(op, a, out);
            flatten_into(op, b, out);
        }
        _ => out.push(e.clone()),
    }
}

fn fold(op: BinOp, items: Vec<Expr>) -> Expr {
    items
        .into_iter()
        .reduce(|a, b| Expr::binary(op, a, b))
        .expect("fold of an empty operand list")
}

/// Numbers go last in sums and first in products; everything else is ordered
/// by tier-normalized prefix text, then by raw prefix text.
fn sort_operands(op: BinOp, items: &mut [Expr]) {
    let mut keyed: Vec<(bool, String, String, Expr)> = items
        .iter()
        .map(|e| {
            let num_rank = if op == BinOp::Add { e.is_number() } else { !e.is_number() };
            (num_rank, tiered_prefix(e).join(" "), to_prefix_string(e), e.clone())
        })
        .collect();
    keyed.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    for (slot, (_, _, _, e)) in items.iter_mut().zip(keyed) {
        *slot = e;
    }
}

fn pass(e: &Expr) -> Expr {
    if e.is_leaf() {
        return e.clone();
    }
    let kids: Vec<Expr> = e.children().iter().map(pass).collect();
    match e.node() {
        Node::Binary(op, _) => {
            let [a, b]: [Expr; 2] = kids.try_into().expect("binary node");
            rewrite_binary(*op, a, b)
        }
        _ => e.with_children(kids),
    }
}

fn num(q: BigRational) -> Expr {
    Expr::number(q)
}

fn rewrite_binary(op: BinOp, a: Expr, b: Expr) -> Expr {
    match op {
        BinOp::Add | BinOp::Mul => collect(op, &a, &b),
        BinOp::Sub => {
            if let (Some(x), Some(y)) = (a.as_number(), b.as_number()) {
                return num(x - y);
            }
            if b.is_zero() {
                return a;
            }
            if a == b {
                return Expr::zero();
            }
            if a.is_zero() {
                return collect(BinOp::Mul, &Expr::int(-1), &b);
            }
            if let Some(y) = b.as_number().filter(|y| y.is_negative()) {
                return collect(BinOp::Add, &a, &num(-y));
            }
            Expr::binary(BinOp::Sub, a, b)
        }
        BinOp::Div => {
            if let (Some(x), Some(y)) = (a.as_number(), b.as_number()) {
                if !y.is_zero() {
                    return num(x / y);
                }
            }
            if b.is_one() {
                return a;
            }
            if a.is_zero() && !b.is_zero() {
                return Expr::zero();
            }
            if a == b && !b.is_zero() {
                return Expr::one();
            }
            if let Some(y) = b.as_number() {
                if !y.is_zero() {
                    return collect(BinOp::Mul, &num(y.recip()), &a);
                }
            }
            Expr::binary(BinOp::Div, a, b)
        }
        BinOp::Pow => {
            if b.is_zero() {
                return Expr::one();
            }
            if b.is_one() {
                return a;
            }
            if a.is_one() {
                return Expr::one();
            }
            if let (Some(x), Some(k)) = (a.as_number(), b.as_int()) {
                if let Some(v) = fold_pow(&x, k) {
                    return num(v);
                }
            }
            if a.is_zero() && b.as_number().is_some_and(|k| k.is_positive()) {
                return Expr::zero();
            }
            // (u^m)^n = u^(m n) for integer n.
            if let (Node::Binary(BinOp::Pow, [u, m]), Some(n)) = (a.node(), b.as_int()) {
                if let Some(m) = m.as_number() {
                    let mn = m * BigRational::from_integer(n.clone());
                    return rewrite_binary(BinOp::Pow, u.clone(), num(mn));
                }
            }
            Expr::binary(BinOp::Pow, a, b)
        }
    }
}

fn fold_pow(x: &BigRational, k: &BigInt) -> Option<BigRational> {
    let k = k.to_i64()?;
    if x.is_zero() && k < 0 {
        return None;
    }
    let bits = x.numer().bits().max(x.denom().bits()).max(1);
    if bits.saturating_mul(k.unsigned_abs()) > MAX_FOLD_BITS {
        return None;
    }
    let p = num::pow::pow(x.clone(), k.unsigned_abs() as usize);
    Some(if k < 0 { p.recip() } else { p })
}

fn collect(op: BinOp, a: &Expr, b: &Expr) -> Expr {
    let mut items = Vec::new();
    flatten_into(op, a, &mut items);
    flatten_into(op, b, &mut items);
    let (unit, mut acc) = match op {
        BinOp::Add => (BigRational::zero(), BigRational::zero()),
        _ => (BigRational::one(), BigRational::one()),
    };
    let mut rest = Vec::with_capacity(items.len());
    for it in items {
        match it.as_number() {
            Some(q) if op == BinOp::Add => acc += q,
            Some(q) => acc *= q,
            None => rest.push(it),
        }
    }
    if op == BinOp::Mul && acc.is_zero() {
        return Expr::zero();
    }
    if acc != unit || rest.is_empty() {
        rest.push(num(acc));
    }
    sort_operands(op, &mut rest);
    fold(op, rest)
}

/// Total order on expressions matching the canonical operand order.
pub fn compare_exprs(a: &Expr, b: &Expr) -> Ordering {
    tiered_prefix(a)
        .cmp(&tiered_prefix(b))
        .then_with(|| to_prefix_string(a).cmp(&to_prefix_string(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_prefix;

    fn s(t: &str) -> String {
        to_prefix_string(&simplify_basic(&parse_prefix(t).unwrap()))
    }

    #[test]
    fn identities_and_folding() {
        assert_eq!(s("+ * x 1 0"), "x");
        assert_eq!(s("+ 2 3"), "5");
        assert_eq!(s("+ * cos x 0 x"), "x");
        assert_eq!(s("^ x 1"), "x");
        assert_eq!(s("^ x 0"), "1");
        assert_eq!(s("* 2 * x 3"), "* 6 x");
        assert_eq!(s("+ 1 + x 2"), "+ x 3");
        assert_eq!(s("^ 2 -2"), "1/4");
        assert_eq!(s("/ 1 0"), "/ 1 0");
        assert_eq!(s("- x x"), "0");
        assert_eq!(s("- x -1"), "+ x 1");
        assert_eq!(s("/ 0 sin x"), "0");
        assert_eq!(s("/ sin x sin x"), "1");
        assert_eq!(s("^ ^ x 2 3"), "^ x 6");
    }

    #[test]
    fn commutative_order_is_canonical() {
        assert_eq!(s("+ 1 x"), s("+ x 1"));
        assert_eq!(s("* x sin x"), s("* sin x x"));
        assert_eq!(canonical_key(&parse_prefix("+ + a b c").unwrap()),
                   canonical_key(&parse_prefix("+ c + b a").unwrap()));
    }

    #[test]
    fn huge_powers_are_left_alone() {
        assert_eq!(s("^ 10 1000"), "^ 10 1000");
    }
}
