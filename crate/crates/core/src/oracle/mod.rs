//! Ground-truth method outcomes: a deterministic synthetic suite of mock
//! integration methods, and loading of externally produced labels.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::DataPair;
use crate::expr::{dag_stats, BinOp, Expr, FnClass, FunctionRegistry, Node};
use crate::seed::mix;

pub const MIN_METHODS: usize = 2;
pub const MAX_METHODS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("method count {0} is outside 2..=16")]
    InvalidK(usize),
    #[error("label schema: {0}")]
    SchemaError(String),
    #[error("label for unknown example id {0}")]
    UnknownId(usize),
    #[error("io: {0}")]
    Io(String),
}

/// Structural applicability test on the integrand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Always,
    /// Numbers, `x`, `+ - *` and non-negative integer powers.
    Polynomial,
    /// Numbers, `x`, `+ - * /` and integer powers.
    Rational,
    /// Contains a registry function of the given class.
    Contains(FnClass),
    /// Integrand DAG size at most this.
    SmallerThan(usize),
    All(Vec<Predicate>),
    Any(Vec<Predicate>),
    Not(Box<Predicate>),
}

fn is_rational_fn(e: &Expr, allow_div: bool) -> bool {
    match e.node() {
        Node::Int(_) | Node::Rational(_) => true,
        Node::Var(_) | Node::Const(_) => true,
        Node::Binary(BinOp::Pow, [b, k]) => match k.as_int() {
            Some(k) => (allow_div || k >= &0.into()) && is_rational_fn(b, allow_div),
            None => false,
        },
        Node::Binary(BinOp::Div, [a, b]) => {
            (allow_div || b.is_number()) && is_rational_fn(a, allow_div) && is_rational_fn(b, allow_div)
        }
        Node::Binary(_, [a, b]) => is_rational_fn(a, allow_div) && is_rational_fn(b, allow_div),
        Node::Apply(..) => false,
    }
}

impl Predicate {
    pub fn holds(&self, integrand: &Expr) -> bool {
        match self {
            Predicate::Always => true,
            Predicate::Polynomial => is_rational_fn(integrand, false),
            Predicate::Rational => is_rational_fn(integrand, true),
            Predicate::Contains(class) => {
                let reg = FunctionRegistry::standard();
                integrand.any_apply(&mut |n| reg.class_of(n) == Some(*class))
            }
            Predicate::SmallerThan(n) => dag_stats(integrand).dag_size <= *n,
            Predicate::All(ps) => ps.iter().all(|p| p.holds(integrand)),
            Predicate::Any(ps) => ps.iter().any(|p| p.holds(integrand)),
            Predicate::Not(p) => !p.holds(integrand),
        }
    }
}

/// A mock method: succeeds iff `applies` holds, with output size
/// `dag_size(integral) + offset` (at least 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRule {
    pub name: String,
    pub applies: Predicate,
    pub offset: i64,
}

impl MethodRule {
    pub fn new(name: &str, applies: Predicate, offset: i64) -> MethodRule {
        MethodRule {
            name: name.to_string(),
            applies,
            offset,
        }
    }
}

/// The sixteen built-in rules; a suite of size `k` takes the first `k`.
pub fn default_rules() -> Vec<MethodRule> {
    use Predicate::*;
    let trig = || Contains(FnClass::Trig);
    let explog = || Contains(FnClass::ExpLog);
    let special = || Contains(FnClass::Special);
    vec![
        MethodRule::new("M0", Always, 3),
        MethodRule::new("M1", Polynomial, 0),
        MethodRule::new("M2", trig(), 1),
        MethodRule::new("M3", Rational, 0),
        MethodRule::new("M4", explog(), 1),
        MethodRule::new("M5", special(), 0),
        MethodRule::new("M6", Polynomial, 2),
        MethodRule::new("M7", All(vec![trig(), explog()]), 0),
        MethodRule::new("M8", All(vec![Rational, Not(Box::new(Polynomial))]), 1),
        MethodRule::new("M9", special(), 2),
        MethodRule::new("M10", Always, 5),
        MethodRule::new("M11", SmallerThan(12), 1),
        MethodRule::new("M12", All(vec![trig(), Not(Box::new(explog()))]), 0),
        MethodRule::new("M13", Contains(FnClass::Algebraic), 1),
        MethodRule::new("M14", All(vec![explog(), Not(Box::new(trig()))]), 0),
        MethodRule::new("M15", Any(vec![special(), Rational]), 2),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodOracle {
    pub methods: Vec<MethodRule>,
    /// Adds a deterministic size jitter in {-1, 0, +1} keyed by example id and method.
    #[serde(default)]
    pub hard: bool,
}

pub fn synthetic_suite(k: usize) -> Result<MethodOracle, OracleError> {
    if !(MIN_METHODS..=MAX_METHODS).contains(&k) {
        return Err(OracleError::InvalidK(k));
    }
    Ok(MethodOracle {
        methods: default_rules().into_iter().take(k).collect(),
        hard: false,
    })
}

impl MethodOracle {
    pub fn with_rules(methods: Vec<MethodRule>) -> Result<MethodOracle, OracleError> {
        if !(MIN_METHODS..=MAX_METHODS).contains(&methods.len()) {
            return Err(OracleError::InvalidK(methods.len()));
        }
        let mut seen = HashSet::new();
        if let Some(m) = methods.iter().find(|m| !seen.insert(m.name.clone())) {
            return Err(OracleError::SchemaError(format!("duplicate method {}", m.name)));
        }
        Ok(MethodOracle { methods, hard: false })
    }

    pub fn len(&self) -> usize {
        self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.methods.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.methods.iter().map(|m| m.name.clone()).collect()
    }

    /// Output size of method `m`, or `None` when it fails.
    pub fn run(&self, m: usize, id: usize, integrand: &Expr, integral: &Expr) -> Option<u64> {
        let rule = &self.methods[m];
        if !rule.applies.holds(integrand) {
            return None;
        }
        let mut size = dag_stats(integral).dag_size as i64 + rule.offset;
        if self.hard {
            size += (mix(id as u64, &[m as u64]) % 3) as i64 - 1;
        }
        Some(size.max(1) as u64)
    }

    pub fn label(&self, id: usize, pair: &DataPair) -> LabelRecord {
        let methods = self
            .methods
            .iter()
            .enumerate()
            .map(|(m, rule)| {
                let size = self.run(m, id, &pair.integrand, &pair.integral);
                (
                    rule.name.clone(),
                    MethodOutcome {
                        success: size.is_some(),
                        size,
                    },
                )
            })
            .collect();
        LabelRecord { id, methods }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: usize,
    pub methods: BTreeMap<String, MethodOutcome>,
}

impl LabelRecord {
    /// Sizes in the order of `names`; absent methods count as failures.
    pub fn sizes(&self, names: &[String]) -> Vec<Option<u64>> {
        names
            .iter()
            .map(|n| self.methods.get(n).and_then(|o| o.size))
            .collect()
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        for (name, o) in &self.methods {
            match (o.success, o.size) {
                (true, None) => {
                    return Err(OracleError::SchemaError(format!(
                        "id {}: {name} succeeded without a size",
                        self.id
                    )))
                }
                (false, Some(_)) => {
                    return Err(OracleError::SchemaError(format!(
                        "id {}: {name} failed but has a size",
                        self.id
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Dense ranks, starting at 1, equal only for equal sizes; failures get `None`.
pub fn dense_ranks(sizes: &[Option<u64>]) -> Vec<Option<u32>> {
    let mut distinct: Vec<u64> = sizes.iter().flatten().copied().collect();
    distinct.sort_unstable();
    distinct.dedup();
    sizes
        .iter()
        .map(|s| s.map(|v| distinct.binary_search(&v).expect("present") as u32 + 1))
        .collect()
}

/// Indices of the methods achieving the smallest size.
pub fn optimal_methods(sizes: &[Option<u64>]) -> Vec<usize> {
    let Some(best) = sizes.iter().flatten().min() else {
        return Vec::new();
    };
    (0..sizes.len()).filter(|&i| sizes[i] == Some(*best)).collect()
}

/// Labels `pairs` (ids are positions) and counts how often each method is
/// optimal; ties count for every tied method.
pub fn label_dataset(
    pairs: &[DataPair],
    oracle: &MethodOracle,
) -> (Vec<LabelRecord>, BTreeMap<String, usize>) {
    let names = oracle.names();
    let mut hist: BTreeMap<String, usize> = names.iter().map(|n| (n.clone(), 0)).collect();
    let records: Vec<LabelRecord> = pairs
        .iter()
        .enumerate()
        .map(|(id, p)| oracle.label(id, p))
        .collect();
    for r in &records {
        for m in optimal_methods(&r.sizes(&names)) {
            *hist.get_mut(&names[m]).expect("known method") += 1;
        }
    }
    (records, hist)
}

pub fn write_labels(path: &Path, records: &[LabelRecord]) -> Result<(), OracleError> {
    let io = |e: std::io::Error| OracleError::Io(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| OracleError::Io(e.to_string()))?;
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads and validates a label file. With `known_ids`, every record must
/// refer to one of them.
pub fn load_labels(
    path: &Path,
    known_ids: Option<&HashSet<usize>>,
) -> Result<Vec<LabelRecord>, OracleError> {
    let io = |e: std::io::Error| OracleError::Io(format!("{}: {e}", path.display()));
    let r = BufReader::new(File::open(path).map_err(io)?);
    let mut out: Vec<LabelRecord> = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord = serde_json::from_str(&line)
            .map_err(|e| OracleError::SchemaError(format!("line {}: {e}", n + 1)))?;
        rec.validate()?;
        if !seen.insert(rec.id) {
            return Err(OracleError::SchemaError(format!("duplicate id {}", rec.id)));
        }
        if let Some(first) = out.first() {
            if !first.methods.keys().eq(rec.methods.keys()) {
                return Err(OracleError::SchemaError(format!(
                    "id {}: method set differs from the first record",
                    rec.id
                )));
            }
        }
        if known_ids.is_some_and(|k| !k.contains(&rec.id)) {
            return Err(OracleError::UnknownId(rec.id));
        }
        out.push(rec);
    }
    Ok(out)
}
