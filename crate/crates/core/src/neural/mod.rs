//! Toy encoders over expressions (LSTM, TreeLSTM, transformer, tree
//! transformer) with success, rank and size heads, their losses, and
//! deterministic training.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod loss;
pub mod model;
pub mod tape;
pub mod tensor;
pub mod train;

pub use loss::{
    bce_multilabel_grad, bce_multilabel_loss, imputation_means, pair_weight, rank_loss,
    rank_loss_grad, rank_loss_mean, regression_loss, regression_loss_grad, RankSample,
};
pub use model::{Model, ModelInput, NodeInput, Prediction, SizeNorm};
pub use train::{
    evaluate, method_order, model_input, read_trace, train, write_trace, AdamState, Checkpoint,
    LabeledExample, TraceRow, TrainConfig, Trainer,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("no observed sizes to impute from")]
    NoObservedSizes,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    Lstm,
    TreeLstm,
    Transformer,
    TreeTransformer,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Lstm, Arch::TreeLstm, Arch::Transformer, Arch::TreeTransformer];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Lstm => "lstm",
            Arch::TreeLstm => "tree-lstm",
            Arch::Transformer => "transformer",
            Arch::TreeTransformer => "tree-transformer",
        }
    }

    pub fn parse(s: &str) -> Option<Arch> {
        Arch::ALL.into_iter().find(|a| a.name() == s)
    }

    pub fn is_tree(self) -> bool {
        matches!(self, Arch::TreeLstm | Arch::TreeTransformer)
    }
}

/// What a model is trained to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Per-method success (stage-1 guards).
    Success,
    /// Per-method "is optimal" bits (binary relevance).
    Best,
    /// Masked weighted pairwise ranking (stage 2, or rank-only).
    Rank,
    /// Output size regression.
    Regression,
    /// Success and rank heads on one shared encoder.
    Joint,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Success => "success",
            Objective::Best => "best",
            Objective::Rank => "rank",
            Objective::Regression => "regression",
            Objective::Joint => "joint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub arch: Arch,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
    pub max_depth: usize,
    pub methods: usize,
    pub dropout: f32,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(arch: Arch, vocab_size: usize, methods: usize) -> ModelConfig {
        ModelConfig {
            arch,
            vocab_size,
            embed_dim: 64,
            layers: 2,
            heads: 4,
            ffn_dim: 256,
            max_len: crate::tokenizer::DEFAULT_MAX_LEN,
            max_depth: crate::encoding::DEFAULT_MAX_DEPTH,
            methods,
            dropout: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::InvalidConfig(m.to_string()));
        if [self.vocab_size, self.embed_dim, self.layers, self.heads, self.ffn_dim, self.max_len, self.max_depth, self.methods]
            .contains(&0)
        {
            return bad("all dimensions must be at least 1");
        }
        if self.embed_dim % self.heads != 0 {
            return bad("embed_dim must be divisible by heads");
        }
        if self.embed_dim % 2 != 0 && self.arch == Arch::Transformer {
            return bad("sinusoidal positions need an even embed_dim");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        Ok(())
    }
}
