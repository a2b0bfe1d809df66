//! Labeled examples, Adam, the training loop, checkpoints and metric traces.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{bce_multilabel_grad, bce_multilabel_loss, rank_loss_mean, regression_loss, regression_loss_grad, sigmoid, RankSample};
use super::model::{Model, ModelInput, NodeInput, Outputs, SizeNorm};
use super::tape::{Params, Tape};
use super::tensor::Matrix;
use super::{loss::imputation_means, ModelConfig, NeuralError, Objective};
use crate::encoding::binarize_and_index;
use crate::expr::Expr;
use crate::oracle::{dense_ranks, optimal_methods};
use crate::seed::{mix, sub_seed};
use crate::selector::{baseline_order, rank_methods, stage1_guards, try_in_order, DEFAULT_THRESHOLD};
use crate::tokenizer::{tokenize, Vocab};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: usize,
    pub input: ModelInput,
    pub success: Vec<bool>,
    /// Output size per method; `None` when the method failed.
    pub sizes: Vec<Option<u64>>,
}

impl LabeledExample {
    /// Tokenizes and binarizes `integrand`.
    pub fn from_expr(
        id: usize,
        integrand: &Expr,
        vocab: &Vocab,
        max_len: usize,
        max_depth: usize,
        sizes: Vec<Option<u64>>,
    ) -> Result<LabeledExample, NeuralError> {
        Ok(LabeledExample {
            id,
            input: model_input(integrand, vocab, max_len, max_depth)?,
            success: sizes.iter().map(Option::is_some).collect(),
            sizes,
        })
    }

    pub fn ranks(&self) -> Vec<Option<u32>> {
        dense_ranks(&self.sizes)
    }

    pub fn rank_sample(&self, p: Vec<f64>) -> RankSample {
        RankSample {
            p,
            y: self.ranks().into_iter().map(|r| r.unwrap_or(0)).collect(),
            m: self.success.clone(),
        }
    }

    /// Methods attaining the smallest size.
    pub fn optimal(&self) -> Vec<usize> {
        optimal_methods(&self.sizes)
    }

    pub fn best_size(&self) -> Option<u64> {
        self.sizes.iter().flatten().min().copied()
    }
}

pub fn model_input(e: &Expr, vocab: &Vocab, max_len: usize, max_depth: usize) -> Result<ModelInput, NeuralError> {
    let seq = tokenize(e, vocab, max_len)
        .map_err(|err| NeuralError::ShapeMismatch(err.to_string()))?
        .ids;
    let tree = binarize_and_index(e, max_depth)
        .into_iter()
        .map(|n| NodeInput {
            ids: n.tokens.iter().map(|t| vocab.id_or_unk(t)).collect(),
            children: [n.children.first().copied(), n.children.get(1).copied()],
            position: n.position,
        })
        .collect();
    Ok(ModelInput { seq, tree })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub objective: Objective,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: Objective::Rank,
            epochs: 3,
            batch_size: 32,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(5.0),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

impl AdamState {
    pub fn new(params: &Params) -> AdamState {
        AdamState {
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn update(&mut self, params: &mut Params, grads: &[Matrix], cfg: &TrainConfig) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
        let step = (cfg.lr / c1) as f32;
        let c2 = c2 as f32;
        let eps = cfg.eps as f32;
        for (k, g) in grads.iter().enumerate() {
            let (m, v, p) = (&mut self.m[k].data, &mut self.v[k].data, &mut params.values[k].data);
            for i in 0..g.data.len() {
                let gi = g.data[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                p[i] -= step * m[i] / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub exact_match: f64,
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<(), NeuralError> {
    let io = |e: csv::Error| NeuralError::Io(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| NeuralError::Io(e.to_string()))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, NeuralError> {
    let io = |e: csv::Error| NeuralError::Io(e.to_string());
    csv::Reader::from_path(path)
        .map_err(io)?
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(io)
}

/// Weights plus everything needed to resume training bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub train: TrainConfig,
    pub epoch: usize,
    pub size_norm: Option<SizeNorm>,
    pub params: Params,
    pub adam: AdamState,
    pub trace: Vec<TraceRow>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let s = serde_json::to_string(self).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        std::fs::write(path, s).map_err(|e| NeuralError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Checkpoint, NeuralError> {
        let s = std::fs::read_to_string(path).map_err(|e| NeuralError::Io(format!("{}: {e}", path.display())))?;
        let c: Checkpoint = serde_json::from_str(&s).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(NeuralError::Checkpoint(format!("unsupported version {}", c.version)));
        }
        Ok(c)
    }

    pub fn model(&self) -> Result<Model, NeuralError> {
        Model::from_params(self.config.clone(), self.params.clone(), self.size_norm.clone())
    }
}

/// Loss of one example under `objective` and the gradients to seed backward with.
fn example_loss(
    objective: Objective,
    ex: &LabeledExample,
    tape: &Tape,
    out: &Outputs,
    norm: Option<&SizeNorm>,
) -> (f64, Vec<(usize, Matrix)>) {
    let vals = |v: usize| -> Vec<f64> { tape.value(v).data.iter().map(|&z| f64::from(z)).collect() };
    let seed = |v: usize, g: Vec<f64>| (v, Matrix::from_vec(1, g.len(), g.into_iter().map(|x| x as f32).collect()));
    let bits = |b: Vec<bool>| -> Vec<f64> { b.into_iter().map(|s| if s { 1.0 } else { 0.0 }).collect() };
    let l = ex.sizes.len();
    match objective {
        Objective::Success | Objective::Best => {
            let t = if objective == Objective::Success {
                bits(ex.success.clone())
            } else {
                let opt = ex.optimal();
                bits((0..l).map(|k| opt.contains(&k)).collect())
            };
            let z = vals(out.success);
            (bce_multilabel_loss(&z, &t), vec![seed(out.success, bce_multilabel_grad(&z, &t))])
        }
        Objective::Rank => {
            let s = ex.rank_sample(vals(out.rank));
            let (loss, g) = rank_loss_mean(&s.p, &s.y, &s.m);
            (loss, vec![seed(out.rank, g)])
        }
        Objective::Joint => {
            let (a, mut ga) = example_loss(Objective::Success, ex, tape, out, norm);
            let (b, gb) = example_loss(Objective::Rank, ex, tape, out, norm);
            ga.extend(gb);
            (a + b, ga)
        }
        Objective::Regression => {
            let n = norm.expect("size normalization is set before regression training");
            let truth: Vec<Option<f64>> = ex
                .sizes
                .iter()
                .zip(&n.means)
                .map(|(s, m)| s.map(|s| (s as f64 - m) / n.scale))
                .collect();
            let zeros = vec![0.0; l];
            let z = vals(out.size);
            (regression_loss(&z, &truth, &zeros), vec![seed(out.size, regression_loss_grad(&z, &truth, &zeros))])
        }
    }
}

/// The order in which a model of this objective would try methods, from raw
/// head outputs.
pub fn method_order(objective: Objective, success: &[f32], rank: &[f32], size: &[f32]) -> Vec<usize> {
    let f = |v: &[f32]| v.iter().map(|&z| f64::from(z)).collect::<Vec<f64>>();
    let baseline = baseline_order(success.len());
    let all: Vec<usize> = (0..success.len()).collect();
    match objective {
        Objective::Success | Objective::Best => {
            let neg: Vec<f64> = success.iter().map(|&z| -f64::from(z)).collect();
            rank_methods(&neg, &all, &baseline)
        }
        Objective::Rank => rank_methods(&f(rank), &all, &baseline),
        Objective::Regression => rank_methods(&f(size), &all, &baseline),
        Objective::Joint => {
            let probs: Vec<f64> = success.iter().map(|&z| sigmoid(f64::from(z))).collect();
            rank_methods(&f(rank), &stage1_guards(&probs, DEFAULT_THRESHOLD), &baseline)
        }
    }
}

fn matched(ex: &LabeledExample, tape: &Tape, out: &Outputs, objective: Objective) -> bool {
    let order = method_order(
        objective,
        &tape.value(out.success).data,
        &tape.value(out.rank).data,
        &tape.value(out.size).data,
    );
    try_in_order(&order, &ex.sizes).is_ok_and(|o| o.matched)
}

/// Mean loss and exact-match rate without updating weights.
pub fn evaluate(model: &Model, objective: Objective, data: &[LabeledExample]) -> Result<(f64, f64), NeuralError> {
    if data.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut loss = 0.0;
    let mut hits = 0usize;
    for ex in data {
        model.check_input(&ex.input)?;
        let mut tape = Tape::new(&model.params);
        let out = model.forward(&mut tape, &ex.input, None);
        loss += example_loss(objective, ex, &tape, &out, model.size_norm.as_ref()).0;
        hits += usize::from(matched(ex, &tape, &out, objective));
    }
    let n = data.len() as f64;
    Ok((loss / n, hits as f64 / n))
}

pub struct Trainer {
    pub model: Model,
    pub cfg: TrainConfig,
    pub adam: AdamState,
    /// Completed epochs.
    pub epoch: usize,
    pub trace: Vec<TraceRow>,
}

impl Trainer {
    /// Starts from fresh Adam state. Regression objectives fit the size
    /// normalization on `train_set` here.
    pub fn new(mut model: Model, cfg: TrainConfig, train_set: &[LabeledExample]) -> Result<Trainer, NeuralError> {
        if cfg.batch_size == 0 {
            return Err(NeuralError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if cfg.objective == Objective::Regression && model.size_norm.is_none() {
            let sizes: Vec<Vec<Option<u64>>> = train_set.iter().map(|e| e.sizes.clone()).collect();
            let means = imputation_means(&sizes, model.config.methods)?;
            let obs: Vec<f64> = sizes.iter().flatten().flatten().map(|&s| s as f64).collect();
            let mu = obs.iter().sum::<f64>() / obs.len() as f64;
            let var = obs.iter().map(|s| (s - mu) * (s - mu)).sum::<f64>() / obs.len() as f64;
            let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
            model.size_norm = Some(SizeNorm { means, scale });
        }
        let adam = AdamState::new(&model.params);
        Ok(Trainer {
            model,
            cfg,
            adam,
            epoch: 0,
            trace: Vec::new(),
        })
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Trainer, NeuralError> {
        let model = c.model()?;
        if c.adam.m.len() != model.params.values.len() || c.adam.v.len() != model.params.values.len() {
            return Err(NeuralError::Checkpoint("optimizer state does not match parameters".into()));
        }
        Ok(Trainer {
            model,
            cfg: c.train,
            adam: c.adam,
            epoch: c.epoch,
            trace: c.trace,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.model.config.clone(),
            train: self.cfg.clone(),
            epoch: self.epoch,
            size_norm: self.model.size_norm.clone(),
            params: self.model.params.clone(),
            adam: self.adam.clone(),
            trace: self.trace.clone(),
        }
    }

    /// One pass over `train_set` in an order fixed by `(seed, epoch)`.
    pub fn run_epoch(&mut self, train_set: &[LabeledExample], valid_set: &[LabeledExample]) -> Result<(), NeuralError> {
        for ex in train_set {
            self.model.check_input(&ex.input)?;
        }
        let epoch = self.epoch + 1;
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(mix(sub_seed(self.cfg.seed, "shuffle"), &[epoch as u64]));
        order.shuffle(&mut rng);
        let drop_root = sub_seed(self.cfg.seed, "dropout");
        let objective = self.cfg.objective;
        let mut total = 0.0;
        let mut hits = 0usize;
        let mut grads = self.model.params.zeros_like();
        for (bi, batch) in order.chunks(self.cfg.batch_size).enumerate() {
            grads.iter_mut().for_each(|g| g.fill(0.0));
            for (j, &i) in batch.iter().enumerate() {
                let ex = &train_set[i];
                let mut tape = Tape::new(&self.model.params);
                let ds = (self.model.config.dropout > 0.0)
                    .then(|| mix(drop_root, &[epoch as u64, (bi * self.cfg.batch_size + j) as u64]));
                let out = self.model.forward(&mut tape, &ex.input, ds);
                let (loss, seeds) = example_loss(objective, ex, &tape, &out, self.model.size_norm.as_ref());
                if !loss.is_finite() {
                    return Err(NeuralError::Diverged { epoch });
                }
                total += loss;
                hits += usize::from(matched(ex, &tape, &out, objective));
                tape.backward(seeds, &mut grads);
            }
            let s = 1.0 / batch.len() as f32;
            grads.iter_mut().for_each(|g| g.scale(s));
            let norm = grads.iter().map(Matrix::sq_norm).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(NeuralError::Diverged { epoch });
            }
            if let Some(c) = self.cfg.clip_norm {
                if norm > c {
                    let s = (c / norm) as f32;
                    grads.iter_mut().for_each(|g| g.scale(s));
                }
            }
            self.adam.update(&mut self.model.params, &grads, &self.cfg);
        }
        let n = train_set.len().max(1) as f64;
        self.epoch = epoch;
        self.trace.push(TraceRow {
            epoch,
            split: "train".into(),
            loss: total / n,
            exact_match: hits as f64 / n,
        });
        if !valid_set.is_empty() {
            let (loss, em) = evaluate(&self.model, objective, valid_set)?;
            if !loss.is_finite() {
                return Err(NeuralError::Diverged { epoch });
            }
            self.trace.push(TraceRow {
                epoch,
                split: "valid".into(),
                loss,
                exact_match: em,
            });
        }
        Ok(())
    }

    /// Runs epochs until `cfg.epochs` are complete.
    pub fn fit(&mut self, train_set: &[LabeledExample], valid_set: &[LabeledExample]) -> Result<(), NeuralError> {
        while self.epoch < self.cfg.epochs {
            self.run_epoch(train_set, valid_set)?;
        }
        Ok(())
    }
}

/// Trains a fresh model for `cfg.epochs` epochs.
pub fn train(
    config: ModelConfig,
    train_set: &[LabeledExample],
    valid_set: &[LabeledExample],
    cfg: TrainConfig,
) -> Result<Trainer, NeuralError> {
    let mut t = Trainer::new(Model::new(config)?, cfg, train_set)?;
    t.fit(train_set, valid_set)?;
    Ok(t)
}
