//! Encoders and prediction heads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::sigmoid;
use super::tape::{ParamId, Params, Tape, Var};
use super::tensor::Matrix;
use super::{Arch, ModelConfig, NeuralError};
use crate::encoding::seq_positions;
use crate::seed::sub_seed;

/// One node of the `[CLS]`-rooted binarized tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInput {
    pub ids: Vec<usize>,
    pub children: [Option<usize>; 2],
    pub position: Vec<u8>,
}

/// Both views of one expression: `[CLS]`-prefixed token ids and the tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInput {
    pub seq: Vec<usize>,
    pub tree: Vec<NodeInput>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Sigmoid of the success head.
    pub probs: Vec<f64>,
    /// Rank head; lower is better.
    pub scores: Vec<f64>,
    /// Size head mapped back to output-size units.
    pub sizes: Vec<f64>,
}

/// Per-method mean and a shared scale for the size head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeNorm {
    pub means: Vec<f64>,
    pub scale: f64,
}

#[derive(Clone, Copy)]
enum Init {
    Xavier,
    Zeros,
    Ones,
    Embedding,
    /// Zeros with the forget-gate blocks set to one.
    LstmBias { gates: usize },
}

struct Head {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

struct Block {
    qkv_w: ParamId,
    qkv_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
    ln1_g: ParamId,
    ln1_b: ParamId,
    ff1_w: ParamId,
    ff1_b: ParamId,
    ff2_w: ParamId,
    ff2_b: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
}

struct Recurrent {
    w: ParamId,
    b: ParamId,
    u: ParamId,
    u_right: Option<ParamId>,
}

enum Body {
    Transformer { pos: Option<ParamId>, blocks: Vec<Block> },
    Recurrent(Vec<Recurrent>),
}

struct Layout {
    embed: ParamId,
    body: Body,
    success: Head,
    rank: Head,
    size: Head,
}

struct Builder<'a> {
    params: Params,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn add(&mut self, name: &str, rows: usize, cols: usize, init: Init) -> ParamId {
        let mut m = Matrix::zeros(rows, cols);
        match init {
            Init::Zeros => {}
            Init::Ones => m.fill(1.0),
            Init::Xavier => {
                let a = (6.0 / (rows + cols) as f32).sqrt();
                m.data.iter_mut().for_each(|v| *v = self.rng.gen_range(-a..a));
            }
            Init::Embedding => {
                let a = 3f32.sqrt() * 0.5;
                m.data.iter_mut().for_each(|v| *v = self.rng.gen_range(-a..a));
            }
            Init::LstmBias { gates } => {
                let d = cols / (gates + 3);
                for v in &mut m.data[d..(1 + gates) * d] {
                    *v = 1.0;
                }
            }
        }
        self.params.add(name, m)
    }

    fn head(&mut self, name: &str, d: usize, l: usize) -> Head {
        Head {
            w1: self.add(&format!("{name}.w1"), d, d, Init::Xavier),
            b1: self.add(&format!("{name}.b1"), 1, d, Init::Zeros),
            w2: self.add(&format!("{name}.w2"), d, l, Init::Xavier),
            b2: self.add(&format!("{name}.b2"), 1, l, Init::Zeros),
        }
    }
}

fn build(cfg: &ModelConfig, seed: u64) -> (Params, Layout) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder {
        params: Params::default(),
        rng: &mut rng,
    };
    let d = cfg.embed_dim;
    let embed = b.add("embed", cfg.vocab_size, d, Init::Embedding);
    let body = match cfg.arch {
        Arch::Transformer | Arch::TreeTransformer => {
            let pos = (cfg.arch == Arch::TreeTransformer)
                .then(|| b.add("pos.w", 2 * cfg.max_depth, d, Init::Xavier));
            let blocks = (0..cfg.layers)
                .map(|l| {
                    let f = cfg.ffn_dim;
                    Block {
                        qkv_w: b.add(&format!("l{l}.qkv.w"), d, 3 * d, Init::Xavier),
                        qkv_b: b.add(&format!("l{l}.qkv.b"), 1, 3 * d, Init::Zeros),
                        out_w: b.add(&format!("l{l}.out.w"), d, d, Init::Xavier),
                        out_b: b.add(&format!("l{l}.out.b"), 1, d, Init::Zeros),
                        ln1_g: b.add(&format!("l{l}.ln1.g"), 1, d, Init::Ones),
                        ln1_b: b.add(&format!("l{l}.ln1.b"), 1, d, Init::Zeros),
                        ff1_w: b.add(&format!("l{l}.ff1.w"), d, f, Init::Xavier),
                        ff1_b: b.add(&format!("l{l}.ff1.b"), 1, f, Init::Zeros),
                        ff2_w: b.add(&format!("l{l}.ff2.w"), f, d, Init::Xavier),
                        ff2_b: b.add(&format!("l{l}.ff2.b"), 1, d, Init::Zeros),
                        ln2_g: b.add(&format!("l{l}.ln2.g"), 1, d, Init::Ones),
                        ln2_b: b.add(&format!("l{l}.ln2.b"), 1, d, Init::Zeros),
                    }
                })
                .collect();
            Body::Transformer { pos, blocks }
        }
        Arch::Lstm | Arch::TreeLstm => {
            let gates = if cfg.arch == Arch::Lstm { 1 } else { 2 };
            let width = (gates + 3) * d;
            let layers = (0..cfg.layers)
                .map(|l| Recurrent {
                    w: b.add(&format!("r{l}.w"), d, width, Init::Xavier),
                    b: b.add(&format!("r{l}.b"), 1, width, Init::LstmBias { gates }),
                    u: b.add(&format!("r{l}.u"), d, width, Init::Xavier),
                    u_right: (gates == 2).then(|| b.add(&format!("r{l}.u_right"), d, width, Init::Xavier)),
                })
                .collect();
            Body::Recurrent(layers)
        }
    };
    let success = b.head("success", d, cfg.methods);
    let rank = b.head("rank", d, cfg.methods);
    let size = b.head("size", d, cfg.methods);
    let params = b.params;
    (
        params,
        Layout {
            embed,
            body,
            success,
            rank,
            size,
        },
    )
}

/// Tape variables of one forward pass.
pub struct Outputs {
    pub cls: Var,
    pub success: Var,
    pub rank: Var,
    pub size: Var,
}

pub struct Model {
    pub config: ModelConfig,
    pub params: Params,
    pub size_norm: Option<SizeNorm>,
    layout: Layout,
    pe: Matrix,
}

impl Model {
    /// Fresh weights drawn from the `init` sub-stream of `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Model, NeuralError> {
        config.validate()?;
        let (params, layout) = build(&config, sub_seed(config.seed, "init"));
        let pe = Self::pe_table(&config)?;
        Ok(Model {
            config,
            params,
            size_norm: None,
            layout,
            pe,
        })
    }

    /// Rebuilds a model around stored weights, checking names and shapes.
    pub fn from_params(config: ModelConfig, params: Params, size_norm: Option<SizeNorm>) -> Result<Model, NeuralError> {
        let mut m = Model::new(config)?;
        if m.params.names != params.names {
            return Err(NeuralError::ShapeMismatch("parameter names differ from the config".into()));
        }
        for ((name, a), b) in m.params.names.iter().zip(&m.params.values).zip(&params.values) {
            if a.shape() != b.shape() || b.data.len() != b.rows * b.cols {
                return Err(NeuralError::ShapeMismatch(format!("parameter {name}")));
            }
        }
        m.params = params;
        m.size_norm = size_norm;
        Ok(m)
    }

    fn pe_table(cfg: &ModelConfig) -> Result<Matrix, NeuralError> {
        if cfg.arch != Arch::Transformer {
            return Ok(Matrix::zeros(0, cfg.embed_dim));
        }
        let rows = seq_positions(cfg.max_len, cfg.embed_dim)
            .map_err(|e| NeuralError::InvalidConfig(e.to_string()))?;
        Ok(Matrix::from_rows(&rows))
    }

    pub fn check_input(&self, x: &ModelInput) -> Result<(), NeuralError> {
        let c = &self.config;
        let bad = |m: String| Err(NeuralError::ShapeMismatch(m));
        if c.arch.is_tree() {
            if x.tree.is_empty() {
                return bad("empty tree".into());
            }
            for (i, n) in x.tree.iter().enumerate() {
                if n.ids.is_empty() || n.ids.iter().any(|&t| t >= c.vocab_size) {
                    return bad(format!("node {i} token ids"));
                }
                if n.position.len() != 2 * c.max_depth {
                    return bad(format!("node {i} position has {} entries, want {}", n.position.len(), 2 * c.max_depth));
                }
                if n.children.iter().flatten().any(|&ch| ch <= i || ch >= x.tree.len()) {
                    return bad(format!("node {i} children"));
                }
            }
        } else {
            if x.seq.is_empty() || x.seq.len() > c.max_len {
                return bad(format!("sequence length {} outside 1..={}", x.seq.len(), c.max_len));
            }
            if x.seq.iter().any(|&t| t >= c.vocab_size) {
                return bad("token id outside the vocabulary".into());
            }
        }
        Ok(())
    }

    fn dropout(&self, tape: &mut Tape, x: Var, rng: &mut Option<ChaCha8Rng>) -> Var {
        let p = self.config.dropout;
        match rng {
            Some(r) if p > 0.0 => {
                let keep = 1.0 / (1.0 - p);
                let n = tape.value(x).data.len();
                let mask = (0..n).map(|_| if r.gen::<f32>() < p { 0.0 } else { keep }).collect();
                tape.dropout(x, mask)
            }
            _ => x,
        }
    }

    /// Records a forward pass. `dropout_seed` enables dropout (training only).
    pub fn forward(&self, tape: &mut Tape, x: &ModelInput, dropout_seed: Option<u64>) -> Outputs {
        let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
        let l = &self.layout;
        let cls = match &l.body {
            Body::Transformer { pos, blocks } => {
                let (ids, extra) = match pos {
                    Some(pw) => {
                        let ids = x.tree.iter().map(|n| n.ids.clone()).collect();
                        let rows: Vec<Vec<f32>> = x
                            .tree
                            .iter()
                            .map(|n| n.position.iter().map(|&b| f32::from(b)).collect())
                            .collect();
                        let p = tape.input(Matrix::from_rows(&rows));
                        (ids, tape.linear(p, *pw, None))
                    }
                    None => {
                        let ids = x.seq.iter().map(|&t| vec![t]).collect();
                        let n = x.seq.len();
                        let d = self.config.embed_dim;
                        let pe = Matrix::from_vec(n, d, self.pe.data[..n * d].to_vec());
                        (ids, tape.input(pe))
                    }
                };
                let e = tape.embed(l.embed, ids);
                let mut h = tape.add(e, extra);
                h = self.dropout(tape, h, &mut rng);
                for b in blocks {
                    let qkv = tape.linear(h, b.qkv_w, Some(b.qkv_b));
                    let a = tape.attention(qkv, self.config.heads);
                    let a = tape.linear(a, b.out_w, Some(b.out_b));
                    let a = self.dropout(tape, a, &mut rng);
                    let s = tape.add(h, a);
                    h = tape.layer_norm(s, b.ln1_g, b.ln1_b);
                    let f = tape.linear(h, b.ff1_w, Some(b.ff1_b));
                    let f = tape.relu(f);
                    let f = tape.linear(f, b.ff2_w, Some(b.ff2_b));
                    let f = self.dropout(tape, f, &mut rng);
                    let s = tape.add(h, f);
                    h = tape.layer_norm(s, b.ln2_g, b.ln2_b);
                }
                tape.row(h, 0)
            }
            Body::Recurrent(layers) => {
                let tree = self.config.arch == Arch::TreeLstm;
                let ids: Vec<Vec<usize>> = if tree {
                    x.tree.iter().map(|n| n.ids.clone()).collect()
                } else {
                    // Reversed so that [CLS] is read last.
                    x.seq.iter().rev().map(|&t| vec![t]).collect()
                };
                let n = ids.len();
                let mut h = tape.embed(l.embed, ids);
                h = self.dropout(tape, h, &mut rng);
                for r in layers {
                    let g = tape.linear(h, r.w, Some(r.b));
                    h = match r.u_right {
                        Some(ur) => {
                            let ch = x.tree.iter().map(|n| n.children).collect();
                            tape.tree_lstm(g, r.u, ur, ch)
                        }
                        None => tape.lstm(g, r.u),
                    };
                }
                tape.row(h, if tree { 0 } else { n - 1 })
            }
        };
        let head = |tape: &mut Tape, h: &Head| {
            let z = tape.linear(cls, h.w1, Some(h.b1));
            let z = tape.relu(z);
            tape.linear(z, h.w2, Some(h.b2))
        };
        Outputs {
            cls,
            success: head(tape, &l.success),
            rank: head(tape, &l.rank),
            size: head(tape, &l.size),
        }
    }

    /// The `[CLS]` embedding.
    pub fn encode(&self, x: &ModelInput) -> Result<Vec<f32>, NeuralError> {
        self.check_input(x)?;
        let mut tape = Tape::new(&self.params);
        let o = self.forward(&mut tape, x, None);
        Ok(tape.value(o.cls).data.clone())
    }

    pub fn sizes_from_raw(&self, raw: &[f32]) -> Vec<f64> {
        match &self.size_norm {
            Some(n) => raw
                .iter()
                .zip(&n.means)
                .map(|(&r, m)| m + n.scale * f64::from(r))
                .collect(),
            None => raw.iter().map(|&r| f64::from(r)).collect(),
        }
    }

    pub fn predict(&self, x: &ModelInput) -> Result<Prediction, NeuralError> {
        self.check_input(x)?;
        let mut tape = Tape::new(&self.params);
        let o = self.forward(&mut tape, x, None);
        let f = |v: Var| tape.value(v).data.iter().map(|&z| f64::from(z)).collect::<Vec<f64>>();
        Ok(Prediction {
            probs: f(o.success).into_iter().map(sigmoid).collect(),
            scores: f(o.rank),
            sizes: self.sizes_from_raw(&tape.value(o.size).data),
        })
    }

    pub fn predict_batch(&self, xs: &[ModelInput]) -> Result<Vec<Prediction>, NeuralError> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::binarize_and_index;
    use crate::expr::parse_prefix;
    use crate::tokenizer::Vocab;

    fn small(arch: Arch) -> ModelConfig {
        ModelConfig {
            embed_dim: 8,
            heads: 2,
            ffn_dim: 12,
            max_len: 32,
            max_depth: 6,
            seed: 7,
            ..ModelConfig::new(arch, Vocab::standard().len(), 3)
        }
    }

    fn input(src: &str, max_depth: usize) -> ModelInput {
        let v = Vocab::standard();
        let e = parse_prefix(src).unwrap();
        crate::neural::model_input(&e, &v, 32, max_depth).unwrap()
    }

    /// Weighted sum of every head output.
    fn objective(m: &Model, x: &ModelInput, w: &[f32]) -> f64 {
        let mut tape = Tape::new(&m.params);
        let o = m.forward(&mut tape, x, None);
        [o.success, o.rank, o.size]
            .iter()
            .flat_map(|&v| tape.value(v).data.clone())
            .zip(w)
            .map(|(a, b)| f64::from(a) * f64::from(*b))
            .sum()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = input("+ * 3 sin ^ x 2 exp - x 1", 6);
        let w = [0.3, -0.7, 1.1, 0.5, 0.2, -0.4, 0.9, -1.3, 0.6];
        for arch in Arch::ALL {
            let mut m = Model::new(small(arch)).unwrap();
            let mut tape = Tape::new(&m.params);
            let o = m.forward(&mut tape, &x, None);
            let seeds = [o.success, o.rank, o.size]
                .iter()
                .enumerate()
                .map(|(k, &v)| (v, Matrix::from_vec(1, 3, w[3 * k..3 * k + 3].to_vec())))
                .collect();
            let mut grads = m.params.zeros_like();
            tape.backward(seeds, &mut grads);
            let mut checked = 0;
            for p in 0..m.params.values.len() {
                let len = m.params.values[p].data.len();
                for i in 0..len {
                    let analytic = f64::from(grads[p].data[i]);
                    let orig = m.params.values[p].data[i];
                    let h = 2e-3f32;
                    m.params.values[p].data[i] = orig + h;
                    let up = objective(&m, &x, &w);
                    m.params.values[p].data[i] = orig - h;
                    let down = objective(&m, &x, &w);
                    m.params.values[p].data[i] = orig;
                    let numeric = (up - down) / (2.0 * f64::from(h));
                    let mid = objective(&m, &x, &w);
                    let (right, left) = ((up - mid) / f64::from(h), (mid - down) / f64::from(h));
                    if (right - left).abs() > 2e-3 + 0.02 * numeric.abs() {
                        // A ReLU kink lies inside the step.
                        continue;
                    }
                    assert!(
                        (analytic - numeric).abs() <= 2e-3 + 2e-2 * numeric.abs(),
                        "{arch:?} {} [{i}]: analytic {analytic} numeric {numeric}",
                        m.params.names[p]
                    );
                    checked += 1;
                }
            }
            assert!(checked > 30);
        }
    }

    #[test]
    fn deterministic_and_shaped() {
        for arch in Arch::ALL {
            let m = Model::new(small(arch)).unwrap();
            let x = input("+ sin ^ x 2 1", 6);
            let a = m.encode(&x).unwrap();
            assert_eq!(a.len(), 8);
            assert_eq!(a, m.encode(&x).unwrap());
            let p = m.predict(&x).unwrap();
            assert!(p.probs.iter().all(|&q| q > 0.0 && q < 1.0));
            assert!(p.scores.iter().all(|s| s.is_finite()));
            let xs = vec![x.clone(), input("* x exp x", 6)];
            let batch = m.predict_batch(&xs).unwrap();
            assert_eq!(batch[0], p);
            assert_eq!(batch[1], m.predict(&xs[1]).unwrap());
        }
    }

    #[test]
    fn sibling_swap() {
        let a = input("+ sin x exp x", 6);
        let b = input("+ exp x sin x", 6);
        // Canonical ordering makes the two orders identical inputs.
        assert_eq!(a, b);
        let e = parse_prefix("- sin x exp x").unwrap();
        let f = parse_prefix("- exp x sin x").unwrap();
        let (te, tf) = (binarize_and_index(&e, 6), binarize_and_index(&f, 6));
        assert_eq!(te[3].tokens, tf[5].tokens);
        // `sin` moves from the left slot to the right one; its ancestry is unchanged.
        assert_eq!(te[2].position[..2], [1, 0]);
        assert_eq!(tf[4].position[..2], [0, 1]);
        assert_eq!(te[2].position[2..], tf[4].position[2..]);
        let m = Model::new(small(Arch::Transformer)).unwrap();
        let (xe, xf) = (input("- sin x exp x", 6), input("- exp x sin x", 6));
        assert_ne!(m.encode(&xe).unwrap(), m.encode(&xf).unwrap());
    }

    #[test]
    fn tree_lstm_ignores_the_sequence() {
        let m = Model::new(small(Arch::TreeLstm)).unwrap();
        let x = input("+ sin ^ x 2 1", 6);
        let mut padded = x.clone();
        padded.seq.extend([Vocab::standard().pad(); 5]);
        assert_eq!(m.encode(&x).unwrap(), m.encode(&padded).unwrap());
    }

    #[test]
    fn shape_checks() {
        let m = Model::new(small(Arch::TreeTransformer)).unwrap();
        let mut x = input("sin x", 6);
        x.tree[1].position.pop();
        assert!(matches!(m.predict(&x), Err(NeuralError::ShapeMismatch(_))));
        let m = Model::new(small(Arch::Lstm)).unwrap();
        let mut x = input("sin x", 6);
        x.seq.push(10_000);
        assert!(matches!(m.encode(&x), Err(NeuralError::ShapeMismatch(_))));
        let bad = ModelConfig { heads: 3, ..small(Arch::Transformer) };
        assert!(matches!(Model::new(bad), Err(NeuralError::InvalidConfig(_))));
    }
}
