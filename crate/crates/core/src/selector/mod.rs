//! Selection policies: the guarded fixed-order baseline, best-method
//! classification, size regression, rank-only and two-stage
//! (success guards, then ranking), with attempts accounting.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, FnClass};
use crate::oracle::Predicate;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelectorError {
    #[error("all methods failed after {attempts} attempts")]
    AllMethodsFailed { attempts: usize },
    #[error("expected {expected} per-method values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    FixedOrder,
    Classification,
    Regression,
    RankOnly,
    TwoStage,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::FixedOrder,
        Policy::Classification,
        Policy::Regression,
        Policy::RankOnly,
        Policy::TwoStage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::FixedOrder => "fixed-order",
            Policy::Classification => "classification",
            Policy::Regression => "regression",
            Policy::RankOnly => "rank-only",
            Policy::TwoStage => "two-stage",
        }
    }

    pub fn parse(s: &str) -> Option<Policy> {
        Policy::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// Result of trying methods in some order against the ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorOutcome {
    pub chosen: usize,
    /// Methods invoked up to and including the first success.
    pub attempts: usize,
    pub achieved: u64,
    pub optimal: u64,
    pub matched: bool,
    pub within5: bool,
    pub within10: bool,
    /// Invoked methods in order.
    pub tried: Vec<usize>,
}

/// `achieved <= optimal * (1 + pct/100)`.
pub fn within_pct(achieved: u64, optimal: u64, pct: u64) -> bool {
    u128::from(achieved) * 100 <= u128::from(optimal) * u128::from(100 + pct)
}

/// The baseline order for the default suite, `M1, M3, M2, M4, M5, M0`, then
/// any further methods by index.
pub fn baseline_order(k: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [1, 3, 2, 4, 5, 0].into_iter().filter(|&m| m < k).collect();
    v.extend(6..k);
    v
}

/// Cheap static guards for the baseline: structural tests coarser than the
/// oracle's own rules. Methods past the sixth are unguarded.
pub fn baseline_guards(k: usize) -> Vec<Predicate> {
    let no_functions = Predicate::Not(Box::new(Predicate::Any(
        [FnClass::Trig, FnClass::ExpLog, FnClass::Algebraic, FnClass::Special]
            .into_iter()
            .map(Predicate::Contains)
            .collect(),
    )));
    (0..k)
        .map(|m| match m {
            1 | 3 => no_functions.clone(),
            2 => Predicate::Contains(FnClass::Trig),
            4 => Predicate::Contains(FnClass::ExpLog),
            5 => Predicate::Contains(FnClass::Special),
            _ => Predicate::Always,
        })
        .collect()
}

/// Invokes `run` on each method of `order` until one succeeds.
pub fn try_in_order(order: &[usize], outcomes: &[Option<u64>]) -> Result<SelectorOutcome, SelectorError> {
    let mut tried = Vec::new();
    for &m in order {
        tried.push(m);
        if let Some(achieved) = outcomes[m] {
            let optimal = outcomes
                .iter()
                .flatten()
                .min()
                .copied()
                .expect("a success exists");
            return Ok(SelectorOutcome {
                chosen: m,
                attempts: tried.len(),
                achieved,
                optimal,
                matched: achieved == optimal,
                within5: within_pct(achieved, optimal, 5),
                within10: within_pct(achieved, optimal, 10),
                tried,
            });
        }
    }
    Err(SelectorError::AllMethodsFailed { attempts: tried.len() })
}

fn check_len(expected: usize, got: usize) -> Result<(), SelectorError> {
    if expected == got {
        Ok(())
    } else {
        Err(SelectorError::ShapeMismatch { expected, got })
    }
}

/// Baseline order, skipping methods whose guard rejects the integrand.
pub fn fixed_order_select(
    integrand: &Expr,
    order: &[usize],
    guards: &[Predicate],
    outcomes: &[Option<u64>],
) -> Result<SelectorOutcome, SelectorError> {
    check_len(outcomes.len(), guards.len())?;
    let admitted: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&m| guards[m].holds(integrand))
        .collect();
    try_in_order(&admitted, outcomes)
}

/// `{i : probs[i] >= threshold}`, or every method when that set is empty.
pub fn stage1_guards(probs: &[f64], threshold: f64) -> Vec<usize> {
    let adm: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] >= threshold).collect();
    if adm.is_empty() {
        (0..probs.len()).collect()
    } else {
        adm
    }
}

/// Admissible methods by ascending score, then the rest by ascending score.
/// Ties keep the baseline order.
pub fn rank_methods(scores: &[f64], admissible: &[usize], baseline: &[usize]) -> Vec<usize> {
    let n = scores.len();
    let mut pos = vec![usize::MAX; n];
    for (i, &m) in baseline.iter().enumerate() {
        if m < n {
            pos[m] = i;
        }
    }
    let mut adm = vec![false; n];
    for &a in admissible {
        adm[a] = true;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        adm[b]
            .cmp(&adm[a])
            .then(scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal))
            .then(pos[a].cmp(&pos[b]))
            .then(a.cmp(&b))
    });
    order
}

pub fn rank_only_select(scores: &[f64], baseline: &[usize], outcomes: &[Option<u64>]) -> Result<SelectorOutcome, SelectorError> {
    check_len(outcomes.len(), scores.len())?;
    let all: Vec<usize> = (0..scores.len()).collect();
    try_in_order(&rank_methods(scores, &all, baseline), outcomes)
}

pub fn two_stage_select(
    probs: &[f64],
    scores: &[f64],
    threshold: f64,
    baseline: &[usize],
    outcomes: &[Option<u64>],
) -> Result<SelectorOutcome, SelectorError> {
    check_len(outcomes.len(), probs.len())?;
    check_len(outcomes.len(), scores.len())?;
    let adm = stage1_guards(probs, threshold);
    try_in_order(&rank_methods(scores, &adm, baseline), outcomes)
}

/// Descending best-method probability.
pub fn classification_select(probs: &[f64], baseline: &[usize], outcomes: &[Option<u64>]) -> Result<SelectorOutcome, SelectorError> {
    check_len(outcomes.len(), probs.len())?;
    let neg: Vec<f64> = probs.iter().map(|p| -p).collect();
    let all: Vec<usize> = (0..probs.len()).collect();
    try_in_order(&rank_methods(&neg, &all, baseline), outcomes)
}

/// Ascending predicted size. With `guards`, admissible methods go first and
/// the rest are retried afterwards.
pub fn regression_select(
    sizes: &[f64],
    guards: Option<(&[f64], f64)>,
    baseline: &[usize],
    outcomes: &[Option<u64>],
) -> Result<SelectorOutcome, SelectorError> {
    check_len(outcomes.len(), sizes.len())?;
    let adm = match guards {
        Some((probs, t)) => {
            check_len(outcomes.len(), probs.len())?;
            stage1_guards(probs, t)
        }
        None => (0..sizes.len()).collect(),
    };
    try_in_order(&rank_methods(sizes, &adm, baseline), outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_prefix;

    #[test]
    fn guards_and_ranking() {
        assert_eq!(stage1_guards(&[0.9, 0.1, 0.6], 0.5), [0, 2]);
        assert_eq!(stage1_guards(&[0.2, 0.1, 0.3], 0.5), [0, 1, 2]);
        assert_eq!(stage1_guards(&[0.2, 0.1, 0.3], 0.0), [0, 1, 2]);
        let b = [0, 1, 2];
        assert_eq!(rank_methods(&[3.0, 1.0, 2.0], &[0, 1, 2], &b), [1, 2, 0]);
        assert_eq!(rank_methods(&[3.0, 1.0, 2.0], &[0], &b), [0, 1, 2]);
        assert_eq!(rank_methods(&[1.0, 1.0, 1.0], &[0, 1, 2], &[2, 0, 1]), [2, 0, 1]);
    }

    #[test]
    fn admissible_first_scenario() {
        let outcomes = [Some(10), Some(12), None];
        let probs = [0.2, 0.8, 0.1];
        let scores = [2.0, 3.0, 1.0];
        let b = baseline_order(3);
        let two = two_stage_select(&probs, &scores, DEFAULT_THRESHOLD, &b, &outcomes).unwrap();
        assert_eq!((two.chosen, two.attempts, two.matched), (1, 1, false));
        let rank = rank_only_select(&scores, &b, &outcomes).unwrap();
        assert_eq!((rank.chosen, rank.attempts, rank.matched), (0, 2, true));
        assert_eq!(rank.tried, [2, 0]);
        let fallback = two_stage_select(&[0.0; 3], &scores, 0.5, &b, &outcomes).unwrap();
        assert_eq!(fallback, rank);
    }

    #[test]
    fn regression_order_pathology() {
        let outcomes = [Some(10), Some(13)];
        let b = [0, 1];
        let m1 = regression_select(&[14.0, 13.0], None, &b, &outcomes).unwrap();
        assert_eq!((m1.chosen, m1.matched), (1, false));
        let m2 = regression_select(&[6.0, 13.0], None, &b, &outcomes).unwrap();
        assert_eq!((m2.chosen, m2.matched), (0, true));
        let shifted = regression_select(&[106.0, 113.0], None, &b, &outcomes).unwrap();
        assert_eq!(shifted.chosen, 0);
    }

    #[test]
    fn fixed_order_skips_guarded_methods() {
        let k = 6;
        let e = parse_prefix("* x sin x").unwrap();
        let outcomes = [Some(6), None, Some(4), None, None, None];
        let out = fixed_order_select(&e, &baseline_order(k), &baseline_guards(k), &outcomes).unwrap();
        assert_eq!(out.tried, [2]);
        assert_eq!((out.chosen, out.attempts, out.matched), (2, 1, true));
        let p = parse_prefix("+ x 1").unwrap();
        let only_last = [Some(5), None, None, None, None, None];
        let out = fixed_order_select(&p, &baseline_order(k), &baseline_guards(k), &only_last).unwrap();
        assert_eq!(out.tried, [1, 3, 0]);
        assert!(out.attempts <= k);
        let none = [None; 6];
        assert_eq!(
            fixed_order_select(&p, &baseline_order(k), &baseline_guards(k), &none),
            Err(SelectorError::AllMethodsFailed { attempts: 3 })
        );
    }

    #[test]
    fn classification_falls_through() {
        let outcomes = [Some(5), None, Some(7)];
        let out = classification_select(&[0.3, 0.9, 0.5], &[0, 1, 2], &outcomes).unwrap();
        assert_eq!(out.tried, [1, 2]);
        assert_eq!((out.chosen, out.within5, out.within10), (2, false, false));
        let out = classification_select(&[0.5; 3], &[2, 0, 1], &outcomes).unwrap();
        assert_eq!(out.chosen, 2);
        assert!(within_pct(105, 100, 5) && !within_pct(106, 100, 5) && within_pct(110, 100, 10));
    }
}
