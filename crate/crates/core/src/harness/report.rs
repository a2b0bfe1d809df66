//! Evaluation reports and their CSV renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::selector::{SelectorError, SelectorOutcome};

/// One row of the per-example CSV. Failed selections have an empty `chosen`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleRow {
    pub id: usize,
    pub policy: String,
    pub chosen: String,
    pub attempts: usize,
    pub achieved: Option<u64>,
    pub optimal: Option<u64>,
    pub matched: bool,
    pub within5: bool,
    pub within10: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: String,
    pub examples: usize,
    pub exact: f64,
    pub within5: f64,
    pub within10: f64,
    /// Examples on which every tried method failed.
    pub failures: usize,
    pub total_attempts: usize,
    /// Attempts until success (failures under their attempt count) -> examples.
    pub attempts_histogram: BTreeMap<usize, usize>,
    /// Misclassified examples only: rows are the true optimum, columns the
    /// first method the policy tried.
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub methods: Vec<String>,
    pub holdout: usize,
    pub policies: Vec<PolicyReport>,
}

impl EvalReport {
    pub fn policy(&self, name: &str) -> Option<&PolicyReport> {
        self.policies.iter().find(|p| p.policy == name)
    }

    /// Checks rate ranges, the exact/within nesting and confusion row sums.
    pub fn check_invariants(&self) -> Result<(), String> {
        for p in &self.policies {
            for r in [p.exact, p.within5, p.within10] {
                if !(0.0..=1.0).contains(&r) {
                    return Err(format!("{}: rate {r} outside [0, 1]", p.policy));
                }
            }
            if !(p.exact <= p.within5 && p.within5 <= p.within10) {
                return Err(format!("{}: exact <= within5 <= within10 violated", p.policy));
            }
            let wrong: usize = p.confusion.iter().flatten().sum();
            let expected = p.examples - (p.exact * p.examples as f64).round() as usize;
            if wrong != expected {
                return Err(format!("{}: confusion holds {wrong} examples, {expected} misclassified", p.policy));
            }
        }
        Ok(())
    }
}

/// Accumulates outcomes of one policy.
pub struct PolicyTally {
    report: PolicyReport,
    hits: [usize; 3],
}

impl PolicyTally {
    pub fn new(policy: &str, methods: usize) -> PolicyTally {
        PolicyTally {
            report: PolicyReport {
                policy: policy.to_string(),
                examples: 0,
                exact: 0.0,
                within5: 0.0,
                within10: 0.0,
                failures: 0,
                total_attempts: 0,
                attempts_histogram: BTreeMap::new(),
                confusion: vec![vec![0; methods]; methods],
            },
            hits: [0; 3],
        }
    }

    /// `true_best` is the reference optimum and `first` the first method tried.
    pub fn add(&mut self, outcome: &Result<SelectorOutcome, SelectorError>, true_best: Option<usize>, first: usize) {
        let r = &mut self.report;
        r.examples += 1;
        let (attempts, matched) = match outcome {
            Ok(o) => {
                self.hits[0] += usize::from(o.matched);
                self.hits[1] += usize::from(o.within5);
                self.hits[2] += usize::from(o.within10);
                (o.attempts, o.matched)
            }
            Err(SelectorError::AllMethodsFailed { attempts }) => {
                r.failures += 1;
                (*attempts, false)
            }
            Err(SelectorError::ShapeMismatch { .. }) => (0, false),
        };
        r.total_attempts += attempts;
        *r.attempts_histogram.entry(attempts).or_insert(0) += 1;
        if !matched {
            if let Some(t) = true_best {
                r.confusion[t][first] += 1;
            }
        }
    }

    pub fn finish(mut self) -> PolicyReport {
        let n = self.report.examples.max(1) as f64;
        self.report.exact = self.hits[0] as f64 / n;
        self.report.within5 = self.hits[1] as f64 / n;
        self.report.within10 = self.hits[2] as f64 / n;
        self.report
    }
}

fn csv_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Data(format!("csv: {e}"))
}

pub fn example_rows_csv(rows: &[ExampleRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
}

pub fn parse_example_rows(text: &str) -> Result<Vec<ExampleRow>, HarnessError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(csv_err)
}

/// Header `true,<methods...>`, then one row per true optimum.
pub fn confusion_csv(methods: &[String], m: &[Vec<usize>]) -> String {
    let mut s = String::from("true");
    for name in methods {
        write!(s, ",{name}").unwrap();
    }
    s.push('\n');
    for (name, row) in methods.iter().zip(m) {
        s.push_str(name);
        for c in row {
            write!(s, ",{c}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn parse_confusion_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<usize>>), HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("true") {
        return Err(HarnessError::Data("confusion csv: missing `true` column".into()));
    }
    let methods: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut m = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.get(0) != methods.get(i).map(String::as_str) {
            return Err(HarnessError::Data(format!("confusion csv: row {i} label")));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|c| c.parse::<usize>().map_err(csv_err))
            .collect::<Result<Vec<_>, _>>()?;
        m.push(row);
    }
    if m.len() != methods.len() {
        return Err(HarnessError::Data("confusion csv: not square".into()));
    }
    Ok((methods, m))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptsRow {
    pub policy: String,
    pub attempts: usize,
    pub count: usize,
}

pub fn attempts_csv(report: &EvalReport) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &report.policies {
        for (&attempts, &count) in &p.attempts_histogram {
            w.serialize(AttemptsRow {
                policy: p.policy.clone(),
                attempts,
                count,
            })
            .map_err(csv_err)?;
        }
    }
    String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
}

pub fn parse_attempts_csv(text: &str) -> Result<BTreeMap<String, BTreeMap<usize, usize>>, HarnessError> {
    let mut out: BTreeMap<String, BTreeMap<usize, usize>> = BTreeMap::new();
    for row in csv::Reader::from_reader(text.as_bytes()).deserialize::<AttemptsRow>() {
        let row = row.map_err(csv_err)?;
        out.entry(row.policy).or_default().insert(row.attempts, row.count);
    }
    Ok(out)
}

pub fn summary_text(report: &EvalReport) -> String {
    let mut s = format!("holdout examples: {}\nmethods: {}\n\n", report.holdout, report.methods.join(" "));
    writeln!(s, "{:<16} {:>8} {:>8} {:>8} {:>10} {:>9}", "policy", "exact", "within5", "within10", "attempts", "failures").unwrap();
    for p in &report.policies {
        writeln!(
            s,
            "{:<16} {:>8.4} {:>8.4} {:>8.4} {:>10} {:>9}",
            p.policy, p.exact, p.within5, p.within10, p.total_attempts, p.failures
        )
        .unwrap();
    }
    s
}
