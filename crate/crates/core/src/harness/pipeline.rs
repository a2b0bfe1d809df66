//! Pipeline steps. Each step reads the previous step's files from the
//! output directory and writes its own.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::report::{
    attempts_csv, confusion_csv, example_rows_csv, parse_attempts_csv, parse_confusion_csv, summary_text,
    EvalReport, ExampleRow, PolicyTally,
};
use super::HarnessError;
use crate::datagen::{generate_dataset, read_dataset, write_dataset, DataPair, GenStats, PairRecord};
use crate::expr::{parse_prefix, Expr};
use crate::neural::{model_input, Checkpoint, LabeledExample, Model, Objective, Prediction, Trainer};
use crate::oracle::{load_labels, optimal_methods, write_labels, LabelRecord};
use crate::seed::sub_seed;
use crate::selector::{
    baseline_guards, baseline_order, rank_methods, stage1_guards, try_in_order, Policy, SelectorOutcome,
};
use crate::tokenizer::{build_vocab, dedup_indices, tokenize, TokenizeError, TokenizedRecord, Vocab};

/// Name of the oracle-ceiling policy that orders methods by their true sizes.
pub const PERFECT: &str = "perfect-knowledge";

/// File layout under the output directory.
#[derive(Debug, Clone)]
pub struct Paths {
    pub root: PathBuf,
}

impl Paths {
    pub fn new(root: &Path) -> Paths {
        Paths {
            root: root.to_path_buf(),
        }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn pairs(&self) -> PathBuf {
        self.file("pairs.jsonl")
    }
    pub fn gen_stats(&self) -> PathBuf {
        self.file("gen_stats.json")
    }
    pub fn vocab(&self) -> PathBuf {
        self.file("vocab.json")
    }
    pub fn tokenized(&self) -> PathBuf {
        self.file("tokenized.jsonl")
    }
    pub fn labels(&self) -> PathBuf {
        self.file("labels.jsonl")
    }
    pub fn label_hist(&self) -> PathBuf {
        self.file("label_hist.json")
    }
    pub fn split(&self) -> PathBuf {
        self.file("split.json")
    }
    pub fn checkpoint(&self, o: Objective) -> PathBuf {
        self.root.join("models").join(format!("{}.ckpt.json", o.name()))
    }
    pub fn trace(&self, o: Objective) -> PathBuf {
        self.root.join("models").join(format!("{}.trace.csv", o.name()))
    }
    pub fn report(&self) -> PathBuf {
        self.file("report.json")
    }
    pub fn per_example(&self) -> PathBuf {
        self.file("per_example.csv")
    }
    pub fn summary(&self) -> PathBuf {
        self.file("summary.txt")
    }
    pub fn confusion(&self, policy: &str) -> PathBuf {
        self.file(&format!("confusion_{policy}.csv"))
    }
    pub fn attempts(&self) -> PathBuf {
        self.file("attempts_histogram.csv")
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), HarnessError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| HarnessError::Data(e.to_string()))?;
    s.push('\n');
    write_text(path, &s)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let s = read_text(path)?;
    serde_json::from_str(&s).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, s: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, s).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

/// Generates and verifies pairs; writes `pairs.jsonl` and `gen_stats.json`.
pub fn cmd_gen(cfg: &RunConfig) -> Result<GenStats, HarnessError> {
    let paths = Paths::new(&cfg.out_dir);
    fs::create_dir_all(&paths.root)?;
    let (pairs, stats) = generate_dataset(&cfg.datagen())?;
    write_dataset(&paths.pairs(), &pairs)?;
    write_json(&paths.gen_stats(), &stats)?;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizeSummary {
    pub input: usize,
    pub kept: usize,
    pub duplicates: usize,
    pub too_long: usize,
    pub vocab_size: usize,
}

fn load_pairs(paths: &Paths) -> Result<Vec<(PairRecord, DataPair)>, HarnessError> {
    read_dataset(&paths.pairs())?
        .into_iter()
        .map(|r| {
            let p = r.to_pair()?;
            Ok((r, p))
        })
        .collect()
}

/// Deduplicates integrands, builds the vocabulary and writes token ids.
pub fn cmd_tokenize(cfg: &RunConfig) -> Result<TokenizeSummary, HarnessError> {
    let paths = Paths::new(&cfg.out_dir);
    let pairs = load_pairs(&paths)?;
    let integrands: Vec<Expr> = pairs.iter().map(|(_, p)| p.integrand.clone()).collect();
    let unique = dedup_indices(&integrands);
    let vocab = build_vocab(&unique.iter().map(|&i| integrands[i].clone()).collect::<Vec<_>>());
    let mut records = Vec::new();
    let mut too_long = 0;
    for &i in &unique {
        match tokenize(&integrands[i], &vocab, cfg.tokenize.max_len) {
            Ok(t) => records.push(TokenizedRecord {
                id: pairs[i].0.id,
                tokens: t.ids,
                labels: None,
            }),
            Err(TokenizeError::TooLong { .. }) => too_long += 1,
            Err(e) => return Err(e.into()),
        }
    }
    vocab.save(&paths.vocab())?;
    let mut w = BufWriter::new(fs::File::create(paths.tokenized())?);
    for r in &records {
        let line = serde_json::to_string(r).map_err(|e| HarnessError::Data(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(TokenizeSummary {
        input: pairs.len(),
        kept: records.len(),
        duplicates: pairs.len() - unique.len(),
        too_long,
        vocab_size: vocab.len(),
    })
}

fn load_tokenized(paths: &Paths) -> Result<Vec<TokenizedRecord>, HarnessError> {
    let r = BufReader::new(
        fs::File::open(paths.tokenized()).map_err(|e| HarnessError::Data(format!("{}: {e}", paths.tokenized().display())))?,
    );
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| HarnessError::Data(format!("tokenized: {e}")))?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub holdout: Vec<usize>,
}

/// Labels tokenized pairs with the oracle and fixes the train/valid/holdout split.
pub fn cmd_label(cfg: &RunConfig) -> Result<BTreeMap<String, usize>, HarnessError> {
    let paths = Paths::new(&cfg.out_dir);
    let oracle = cfg.oracle()?;
    let names = oracle.names();
    let pairs: HashMap<usize, DataPair> = load_pairs(&paths)?.into_iter().map(|(r, p)| (r.id, p)).collect();
    let mut ids: Vec<usize> = load_tokenized(&paths)?.iter().map(|t| t.id).collect();
    if let Some(n) = cfg.split.limit {
        ids.truncate(n);
    }
    let mut records = Vec::with_capacity(ids.len());
    let mut hist: BTreeMap<String, usize> = names.iter().map(|n| (n.clone(), 0)).collect();
    for &id in &ids {
        let p = pairs
            .get(&id)
            .ok_or_else(|| HarnessError::Data(format!("tokenized id {id} has no pair")))?;
        let rec = oracle.label(id, p);
        for m in optimal_methods(&rec.sizes(&names)) {
            *hist.get_mut(&names[m]).expect("known method") += 1;
        }
        records.push(rec);
    }
    write_labels(&paths.labels(), &records)?;
    write_json(&paths.label_hist(), &hist)?;

    let mut shuffled = ids.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, "split")));
    let n = shuffled.len();
    let h = (n as f64 * cfg.split.holdout_fraction).round() as usize;
    let v = (n as f64 * cfg.split.valid_fraction).round() as usize;
    let mut split = Split {
        holdout: shuffled[..h].to_vec(),
        valid: shuffled[h..h + v].to_vec(),
        train: shuffled[h + v..].to_vec(),
    };
    split.holdout.sort_unstable();
    split.valid.sort_unstable();
    split.train.sort_unstable();
    write_json(&paths.split(), &split)?;
    Ok(hist)
}

/// Everything the model-facing steps need.
struct Workspace {
    vocab: Vocab,
    names: Vec<String>,
    pairs: HashMap<usize, DataPair>,
    labels: HashMap<usize, LabelRecord>,
    split: Split,
}

impl Workspace {
    fn load(cfg: &RunConfig) -> Result<Workspace, HarnessError> {
        let paths = Paths::new(&cfg.out_dir);
        let vocab = Vocab::load(&paths.vocab())?;
        let pairs: HashMap<usize, DataPair> = load_pairs(&paths)?.into_iter().map(|(r, p)| (r.id, p)).collect();
        let known = pairs.keys().copied().collect();
        let labels = load_labels(&paths.labels(), Some(&known))?
            .into_iter()
            .map(|r| (r.id, r))
            .collect();
        let split: Split = read_json(&paths.split())?;
        Ok(Workspace {
            vocab,
            names: cfg.oracle()?.names(),
            pairs,
            labels,
            split,
        })
    }

    fn examples(&self, cfg: &RunConfig, ids: &[usize]) -> Result<Vec<LabeledExample>, HarnessError> {
        ids.iter()
            .map(|&id| {
                let pair = self.pairs.get(&id).ok_or_else(|| HarnessError::Data(format!("unknown id {id}")))?;
                let label = self.labels.get(&id).ok_or_else(|| HarnessError::Data(format!("id {id} is unlabeled")))?;
                Ok(LabeledExample::from_expr(
                    id,
                    &pair.integrand,
                    &self.vocab,
                    cfg.tokenize.max_len,
                    cfg.tokenize.max_depth,
                    label.sizes(&self.names),
                )?)
            })
            .collect()
    }
}

/// Trains one model per needed objective, checkpointing after every epoch.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<(Objective, Vec<crate::neural::TraceRow>)>, HarnessError> {
    let paths = Paths::new(&cfg.out_dir);
    let ws = Workspace::load(cfg)?;
    let train = ws.examples(cfg, &ws.split.train)?;
    let valid = ws.examples(cfg, &ws.split.valid)?;
    let mut out = Vec::new();
    for objective in cfg.objectives() {
        let ck = paths.checkpoint(objective);
        let mut trainer = if cfg.train.resume && ck.exists() {
            let mut t = Trainer::from_checkpoint(Checkpoint::load(&ck)?)?;
            t.cfg.epochs = cfg.train.epochs;
            t
        } else {
            let model = Model::new(cfg.model_config(objective, ws.vocab.len()))?;
            Trainer::new(model, cfg.train_config(objective), &train)?
        };
        fs::create_dir_all(ck.parent().expect("models dir"))?;
        while trainer.epoch < trainer.cfg.epochs {
            trainer.run_epoch(&train, &valid)?;
            trainer.checkpoint().save(&ck)?;
        }
        if !ck.exists() {
            trainer.checkpoint().save(&ck)?;
        }
        crate::neural::write_trace(&paths.trace(objective), &trainer.trace)?;
        out.push((objective, trainer.trace));
    }
    Ok(out)
}

/// Trained models by objective.
struct Models {
    by_objective: HashMap<Objective, Model>,
}

impl Models {
    fn load(cfg: &RunConfig) -> Result<Models, HarnessError> {
        let paths = Paths::new(&cfg.out_dir);
        let mut by_objective = HashMap::new();
        for o in cfg.objectives() {
            let p = paths.checkpoint(o);
            if !p.exists() {
                return Err(HarnessError::MissingCheckpoint(p));
            }
            by_objective.insert(o, Checkpoint::load(&p)?.model()?);
        }
        Ok(Models { by_objective })
    }

    fn predict(&self, o: Objective, ex: &LabeledExample) -> Result<Option<Prediction>, HarnessError> {
        match self.by_objective.get(&o) {
            Some(m) => Ok(Some(m.predict(&ex.input)?)),
            None => Ok(None),
        }
    }
}

/// Per-example predictions of every loaded model.
struct Preds {
    guards: Option<Vec<f64>>,
    scores: Option<Vec<f64>>,
    best: Option<Vec<f64>>,
    sizes: Option<Vec<f64>>,
}

impl Preds {
    fn of(models: &Models, ex: &LabeledExample) -> Result<Preds, HarnessError> {
        let joint = models.predict(Objective::Joint, ex)?;
        let success = models.predict(Objective::Success, ex)?;
        let rank = models.predict(Objective::Rank, ex)?;
        Ok(Preds {
            guards: success.or_else(|| joint.clone()).map(|p| p.probs),
            scores: rank.or(joint).map(|p| p.scores),
            best: models.predict(Objective::Best, ex)?.map(|p| p.probs),
            sizes: models.predict(Objective::Regression, ex)?.map(|p| p.sizes),
        })
    }
}

fn need<'a>(v: &'a Option<Vec<f64>>, what: &str) -> Result<&'a [f64], HarnessError> {
    v.as_deref()
        .ok_or_else(|| HarnessError::Usage(format!("no model provides {what}")))
}

/// The order in which `policy` tries methods on one example.
fn policy_order(
    policy: Policy,
    integrand: &Expr,
    preds: &Preds,
    cfg: &RunConfig,
    k: usize,
) -> Result<Vec<usize>, HarnessError> {
    let baseline = baseline_order(k);
    let all: Vec<usize> = (0..k).collect();
    let t = cfg.eval.threshold;
    Ok(match policy {
        Policy::FixedOrder => {
            let guards = baseline_guards(k);
            baseline.iter().copied().filter(|&m| guards[m].holds(integrand)).collect()
        }
        Policy::Classification => {
            let neg: Vec<f64> = need(&preds.best, "best-method probabilities")?.iter().map(|p| -p).collect();
            rank_methods(&neg, &all, &baseline)
        }
        Policy::Regression => {
            let adm = match &preds.guards {
                Some(g) => stage1_guards(g, t),
                None => all,
            };
            rank_methods(need(&preds.sizes, "size estimates")?, &adm, &baseline)
        }
        Policy::RankOnly => rank_methods(need(&preds.scores, "rank scores")?, &all, &baseline),
        Policy::TwoStage => {
            let adm = stage1_guards(need(&preds.guards, "success probabilities")?, t);
            rank_methods(need(&preds.scores, "rank scores")?, &adm, &baseline)
        }
    })
}

fn perfect_order(sizes: &[Option<u64>]) -> Vec<usize> {
    let scores: Vec<f64> = sizes.iter().map(|s| s.map_or(f64::INFINITY, |v| v as f64)).collect();
    let adm: Vec<usize> = (0..sizes.len()).filter(|&i| sizes[i].is_some()).collect();
    rank_methods(&scores, &adm, &baseline_order(sizes.len()))
}

fn example_row(id: usize, policy: &str, names: &[String], r: &Result<SelectorOutcome, crate::selector::SelectorError>, optimal: Option<u64>) -> ExampleRow {
    match r {
        Ok(o) => ExampleRow {
            id,
            policy: policy.to_string(),
            chosen: names[o.chosen].clone(),
            attempts: o.attempts,
            achieved: Some(o.achieved),
            optimal: Some(o.optimal),
            matched: o.matched,
            within5: o.within5,
            within10: o.within10,
        },
        Err(e) => ExampleRow {
            id,
            policy: policy.to_string(),
            chosen: String::new(),
            attempts: match e {
                crate::selector::SelectorError::AllMethodsFailed { attempts } => *attempts,
                _ => 0,
            },
            achieved: None,
            optimal,
            matched: false,
            within5: false,
            within10: false,
        },
    }
}

/// Evaluates every configured policy and the perfect-knowledge ceiling on the
/// holdout; writes `report.json` and `per_example.csv`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport, HarnessError> {
    let paths = Paths::new(&cfg.out_dir);
    let ws = Workspace::load(cfg)?;
    let models = Models::load(cfg)?;
    let holdout = ws.examples(cfg, &ws.split.holdout)?;
    let k = ws.names.len();
    let baseline = baseline_order(k);
    let mut tallies: Vec<(String, PolicyTally)> = cfg
        .eval
        .policies
        .iter()
        .map(|p| p.name().to_string())
        .chain([PERFECT.to_string()])
        .map(|n| {
            let t = PolicyTally::new(&n, k);
            (n, t)
        })
        .collect();
    let mut rows = Vec::new();
    for ex in &holdout {
        let preds = Preds::of(&models, ex)?;
        let integrand = &ws.pairs[&ex.id].integrand;
        let opt = optimal_methods(&ex.sizes);
        let true_best = baseline.iter().copied().find(|m| opt.contains(m));
        for (name, tally) in tallies.iter_mut() {
            let order = match Policy::parse(name) {
                Some(p) => policy_order(p, integrand, &preds, cfg, k)?,
                None => perfect_order(&ex.sizes),
            };
            let r = try_in_order(&order, &ex.sizes);
            tally.add(&r, true_best, order.first().copied().unwrap_or(0));
            rows.push(example_row(ex.id, name, &ws.names, &r, ex.best_size()));
        }
    }
    let report = EvalReport {
        methods: ws.names.clone(),
        holdout: holdout.len(),
        policies: tallies.into_iter().map(|(_, t)| t.finish()).collect(),
    };
    write_json(&paths.report(), &report)?;
    write_text(&paths.per_example(), &example_rows_csv(&rows)?)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMethod {
    pub method: String,
    pub admissible: bool,
    pub probability: f64,
    pub score: f64,
}

/// Ranks the methods for one integrand given in prefix notation, using the
/// two-stage models.
pub fn cmd_rank(cfg: &RunConfig, integrand: &str) -> Result<Vec<RankedMethod>, HarnessError> {
    let e = parse_prefix(integrand).map_err(|e| HarnessError::Usage(format!("integrand: {e}")))?;
    let paths = Paths::new(&cfg.out_dir);
    let vocab = Vocab::load(&paths.vocab())?;
    let names = cfg.oracle()?.names();
    let load = |o: Objective| -> Result<Model, HarnessError> {
        let p = paths.checkpoint(o);
        if !p.exists() {
            return Err(HarnessError::MissingCheckpoint(p));
        }
        Ok(Checkpoint::load(&p)?.model()?)
    };
    let input = model_input(&e, &vocab, cfg.tokenize.max_len, cfg.tokenize.max_depth)?;
    let (probs, scores) = if cfg.train.share_encoder {
        let p = load(Objective::Joint)?.predict(&input)?;
        (p.probs, p.scores)
    } else {
        (
            load(Objective::Success)?.predict(&input)?.probs,
            load(Objective::Rank)?.predict(&input)?.scores,
        )
    };
    let adm = stage1_guards(&probs, cfg.eval.threshold);
    Ok(rank_methods(&scores, &adm, &baseline_order(names.len()))
        .into_iter()
        .map(|m| RankedMethod {
            method: names[m].clone(),
            admissible: adm.contains(&m),
            probability: probs[m],
            score: scores[m],
        })
        .collect())
}

/// Writes the summary, confusion and attempts CSVs from `report.json`, and
/// checks that the CSVs parse back to the report's numbers.
pub fn cmd_report(cfg: &RunConfig) -> Result<String, HarnessError> {
    let paths = Paths::new(&cfg.out_dir);
    let report: EvalReport = read_json(&paths.report())?;
    report.check_invariants().map_err(HarnessError::Data)?;
    let summary = summary_text(&report);
    write_text(&paths.summary(), &summary)?;
    for p in &report.policies {
        let text = confusion_csv(&report.methods, &p.confusion);
        let path = paths.confusion(&p.policy);
        write_text(&path, &text)?;
        let (names, m) = parse_confusion_csv(&read_text(&path)?)?;
        if names != report.methods || m != p.confusion {
            return Err(HarnessError::Data(format!("{} does not round-trip", path.display())));
        }
    }
    let text = attempts_csv(&report)?;
    write_text(&paths.attempts(), &text)?;
    let parsed = parse_attempts_csv(&read_text(&paths.attempts())?)?;
    for p in &report.policies {
        if parsed.get(&p.policy) != Some(&p.attempts_histogram) {
            return Err(HarnessError::Data(format!("attempts histogram of {} does not round-trip", p.policy)));
        }
    }
    Ok(summary)
}

/// gen, tokenize, label, train, eval and report in sequence.
pub fn run_all(cfg: &RunConfig) -> Result<EvalReport, HarnessError> {
    cmd_gen(cfg)?;
    cmd_tokenize(cfg)?;
    cmd_label(cfg)?;
    cmd_train(cfg)?;
    let r = cmd_eval(cfg)?;
    cmd_report(cfg)?;
    Ok(r)
}
