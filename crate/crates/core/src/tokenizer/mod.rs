//! Token streams for the sequence models: integer tiers, `[CLS]`,
//! deduplication and symbolic-coefficient normalization.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use num::bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{
    canonical_order, parse_prefix, simplify_basic, tier_int, tiered_prefix, BinOp, Expr,
    ExprError, FunctionRegistry, Node, X,
};

pub const CLS: &str = "[CLS]";
pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const INT_POS: &str = "INT+";
pub const INT_NEG: &str = "INT-";

/// Always present, always first, in this order.
pub const RESERVED: [&str; 11] = [
    CLS, PAD, UNK, INT_POS, INT_NEG, "0", "1", "2", "CONST", "CONST2", "CONST3",
];

pub const DEFAULT_MAX_LEN: usize = 256;

/// Values substituted for the magnitude tiers when decoding.
pub const CONST_SENTINEL: i64 = 3;
pub const CONST2_SENTINEL: i64 = 10;
pub const CONST3_SENTINEL: i64 = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenizeError {
    #[error("sequence of {len} tokens exceeds max_len {max}")]
    TooLong { len: usize, max: usize },
    #[error("every sentinel substitution leaves a zero denominator")]
    StillSingular,
    #[error("unknown token id {0}")]
    UnknownId(usize),
    #[error("malformed token stream: {0}")]
    Malformed(String),
    #[error("vocab: {0}")]
    Vocab(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Token string <-> dense id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocab {
    /// Reserved tokens followed by `extra` in lexicographic order.
    pub fn from_tokens<I, S>(extra: I) -> Vocab
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let reserved: HashSet<&str> = RESERVED.iter().copied().collect();
        let rest: BTreeSet<String> = extra
            .into_iter()
            .map(Into::into)
            .filter(|t| !reserved.contains(t.as_str()))
            .collect();
        let tokens: Vec<String> = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(rest)
            .collect();
        let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, ids }
    }

    /// Every operator, registry function, `x` and `pi`.
    pub fn standard() -> Vocab {
        let mut extra: Vec<String> = ["+", "-", "*", "/", "^", "x", "pi"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        extra.extend(
            FunctionRegistry::standard()
                .specs()
                .iter()
                .map(|s| s.name.to_string()),
        );
        Vocab::from_tokens(extra)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    /// Id of `token`, or of `[UNK]`.
    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(self.ids[UNK])
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn cls(&self) -> usize {
        self.ids[CLS]
    }

    pub fn pad(&self) -> usize {
        self.ids[PAD]
    }

    pub fn unk(&self) -> usize {
        self.ids[UNK]
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<&str, usize> = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        serde_json::to_string_pretty(&map).expect("string map serializes")
    }

    pub fn from_json(text: &str) -> Result<Vocab, TokenizeError> {
        let map: BTreeMap<String, usize> =
            serde_json::from_str(text).map_err(|e| TokenizeError::Vocab(e.to_string()))?;
        let mut tokens = vec![None; map.len()];
        for (t, i) in map {
            match tokens.get_mut(i) {
                Some(slot @ None) => *slot = Some(t),
                _ => return Err(TokenizeError::Vocab(format!("id {i} is not dense"))),
            }
        }
        let tokens: Vec<String> = tokens.into_iter().map(Option::unwrap).collect();
        for (i, r) in RESERVED.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*r) {
                return Err(TokenizeError::Vocab(format!("reserved token {r} is not id {i}")));
            }
        }
        let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocab { tokens, ids })
    }

    pub fn save(&self, path: &Path) -> Result<(), TokenizeError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| TokenizeError::Vocab(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Vocab, TokenizeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TokenizeError::Vocab(format!("{}: {e}", path.display())))?;
        Vocab::from_json(&text)
    }
}

/// Sign flag then one magnitude token.
pub fn encode_int(n: &BigInt) -> [&'static str; 2] {
    tier_int(n)
}

/// The `[CLS]`-less token strings of `e` in canonical order.
pub fn token_strings(e: &Expr) -> Vec<String> {
    tiered_prefix(&canonical_order(e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedExpr {
    /// Position 0 is `[CLS]`.
    pub ids: Vec<usize>,
    pub source: Expr,
}

impl TokenizedExpr {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Whether any token fell back to `[UNK]`.
    pub fn has_unk(&self, v: &Vocab) -> bool {
        self.ids.contains(&v.unk())
    }
}

/// `[CLS]` followed by the tiered prefix of the canonically ordered expression.
pub fn tokenize(e: &Expr, v: &Vocab, max_len: usize) -> Result<TokenizedExpr, TokenizeError> {
    let toks = token_strings(e);
    let len = toks.len() + 1;
    if len > max_len {
        return Err(TokenizeError::TooLong { len, max: max_len });
    }
    let mut ids = Vec::with_capacity(len);
    ids.push(v.cls());
    ids.extend(toks.iter().map(|t| v.id_or_unk(t)));
    Ok(TokenizedExpr {
        ids,
        source: e.clone(),
    })
}

fn tier_value(tok: &str) -> Option<i64> {
    Some(match tok {
        "0" => 0,
        "1" => 1,
        "2" => 2,
        "CONST" => CONST_SENTINEL,
        "CONST2" => CONST2_SENTINEL,
        "CONST3" => CONST3_SENTINEL,
        _ => return None,
    })
}

/// Inverse of [`tokenize`] up to tiers: magnitudes decode to their sentinels.
pub fn decode(ids: &[usize], v: &Vocab) -> Result<Expr, TokenizeError> {
    let mut toks = Vec::with_capacity(ids.len());
    for &id in ids {
        toks.push(v.token(id).ok_or(TokenizeError::UnknownId(id))?);
    }
    if toks.first() == Some(&CLS) {
        toks.remove(0);
    }
    let mut prefix = Vec::with_capacity(toks.len());
    let mut it = toks.into_iter();
    while let Some(t) = it.next() {
        match t {
            INT_POS | INT_NEG => {
                let mag = it
                    .next()
                    .and_then(tier_value)
                    .ok_or_else(|| TokenizeError::Malformed(format!("{t} without a magnitude")))?;
                prefix.push(if t == INT_NEG && mag != 0 { format!("-{mag}") } else { mag.to_string() });
            }
            CLS | PAD | UNK => return Err(TokenizeError::Malformed(format!("unexpected {t}"))),
            _ if tier_value(t).is_some() => {
                return Err(TokenizeError::Malformed(format!("magnitude {t} without a sign")))
            }
            _ => prefix.push(t.to_string()),
        }
    }
    Ok(parse_prefix(&prefix.join(" "))?)
}

fn has_zero_denominator(e: &Expr) -> bool {
    let mut bad = false;
    e.visit(&mut |n| match n.node() {
        Node::Binary(BinOp::Div, [_, d]) if d.is_zero() => bad = true,
        Node::Binary(BinOp::Pow, [b, k]) if b.is_zero() && k.is_negative_number() => bad = true,
        _ => {}
    });
    bad
}

/// Replaces every free symbol other than `x` by a numeric sentinel: all
/// `CONST3` first, then alternating `CONST3`/`CONST2` and `CONST2`/`CONST3` in
/// sorted symbol order when the uniform choice creates a zero denominator.
pub fn normalize_symbolic_coeffs(e: &Expr) -> Result<Expr, TokenizeError> {
    let syms = e.free_symbols_except(X);
    if syms.is_empty() {
        return Ok(e.clone());
    }
    let (hi, lo) = (CONST3_SENTINEL, CONST2_SENTINEL);
    let schemes: [&dyn Fn(usize) -> i64; 3] = [
        &|_| hi,
        &|i| if i % 2 == 0 { hi } else { lo },
        &|i| if i % 2 == 0 { lo } else { hi },
    ];
    for scheme in schemes {
        let mut out = e.clone();
        for (i, s) in syms.iter().enumerate() {
            out = out.substitute(s, &Expr::int(scheme(i)));
        }
        let out = simplify_basic(&out);
        if !has_zero_denominator(&out) {
            return Ok(out);
        }
    }
    Err(TokenizeError::StillSingular)
}

/// Key under which two integrands count as duplicates.
pub fn dedup_key(e: &Expr) -> String {
    token_strings(e).join(" ")
}

/// Indices of the first occurrence of each dedup key.
pub fn dedup_indices(corpus: &[Expr]) -> Vec<usize> {
    let mut seen = HashSet::new();
    (0..corpus.len())
        .filter(|&i| seen.insert(dedup_key(&corpus[i])))
        .collect()
}

pub fn dedup(corpus: &[Expr]) -> Vec<Expr> {
    dedup_indices(corpus)
        .into_iter()
        .map(|i| corpus[i].clone())
        .collect()
}

/// Reserved tokens plus every token seen in `corpus`.
pub fn build_vocab(corpus: &[Expr]) -> Vocab {
    Vocab::from_tokens(corpus.iter().flat_map(token_strings))
}

/// One line of a tokenized dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedRecord {
    pub id: usize,
    pub tokens: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<serde_json::Value>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Expr {
        parse_prefix(s).unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        let v = Vocab::standard();
        tokenize(&e(s), &v, DEFAULT_MAX_LEN)
            .unwrap()
            .ids
            .iter()
            .map(|&i| v.token(i).unwrap().to_string())
            .collect()
    }

    #[test]
    fn encode_int_examples() {
        assert_eq!(encode_int(&2.into()), ["INT+", "2"]);
        assert_eq!(encode_int(&(-7).into()), ["INT-", "CONST"]);
        assert_eq!(encode_int(&1000.into()), ["INT+", "CONST3"]);
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(toks("+ x 1"), ["[CLS]", "+", "x", "INT+", "1"]);
        assert_eq!(toks("* 42 x"), ["[CLS]", "*", "INT+", "CONST2", "x"]);
        let v = Vocab::standard();
        let foo = Expr::apply("foo", vec![Expr::x()]);
        assert!(tokenize(&foo, &v, 16).unwrap().has_unk(&v));
    }

    #[test]
    fn too_long() {
        let v = Vocab::standard();
        let r = tokenize(&e("+ x 1"), &v, 4);
        assert_eq!(r, Err(TokenizeError::TooLong { len: 5, max: 4 }));
    }

    #[test]
    fn decode_round_trip_up_to_tiers() {
        let v = Vocab::standard();
        let src = e("+ * 42 x sin / x 7");
        let t = tokenize(&src, &v, 64).unwrap();
        let back = decode(&t.ids, &v).unwrap();
        assert_eq!(tokenize(&back, &v, 64).unwrap().ids, t.ids);
        assert_eq!(back, e("+ * 10 x sin / x 3"));
    }

    #[test]
    fn normalization() {
        let out = normalize_symbolic_coeffs(&e("+ * a ^ x 2 b")).unwrap();
        assert_eq!(out, simplify_basic(&e("+ * 100 ^ x 2 100")));
        let out = normalize_symbolic_coeffs(&e("/ 1 * - a b x")).unwrap();
        assert_eq!(out, simplify_basic(&e("/ 1 * 90 x")));
        let plain = e("^ x 2");
        assert_eq!(normalize_symbolic_coeffs(&plain).unwrap(), plain);
    }

    #[test]
    fn still_singular() {
        // (a - a) is zero under every scheme.
        let r = normalize_symbolic_coeffs(&Expr::binary(
            BinOp::Div,
            Expr::one(),
            Expr::binary(BinOp::Mul, Expr::var("a") - Expr::var("c") - Expr::var("b") + Expr::var("d"), Expr::x()),
        ));
        assert_eq!(r, Err(TokenizeError::StillSingular));
    }

    #[test]
    fn dedup_examples() {
        assert_eq!(dedup(&[e("* 3 x"), e("* 7 x")]).len(), 1);
        assert_eq!(dedup(&[e("+ x 1"), e("+ 1 x")]).len(), 1);
        assert_eq!(dedup(&[e("x"), e("sin x")]).len(), 2);
    }

    #[test]
    fn vocab_build() {
        let v = build_vocab(&[e("+ x 1"), e("erf x"), e("erf * 2 x")]);
        for t in ["+", "x", "INT+", "1", "erf"] {
            assert!(v.id(t).is_some());
        }
        assert_eq!(v.tokens().iter().filter(|t| *t == "erf").count(), 1);
        assert_eq!(v, build_vocab(&[e("+ x 1"), e("erf x"), e("erf * 2 x")]));
        assert_eq!(Vocab::from_json(&v.to_json()).unwrap(), v);
        assert_eq!(&v.tokens()[..RESERVED.len()], RESERVED);
    }
}
