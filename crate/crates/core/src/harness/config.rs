//! Run configuration: a TOML file with sections, plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::datagen::{DatagenConfig, Generator};
use crate::neural::{Arch, ModelConfig, Objective, TrainConfig};
use crate::oracle::{synthetic_suite, MethodOracle, MethodRule};
use crate::seed::{name_hash, sub_seed};
use crate::selector::{Policy, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSection {
    pub count: usize,
    pub generators: Vec<Generator>,
    pub max_ops: usize,
    pub liouville_r: usize,
    pub liouville_max_degree: usize,
}

impl Default for GenSection {
    fn default() -> Self {
        let d = DatagenConfig::default();
        GenSection {
            count: d.count,
            generators: d.generators,
            max_ops: d.max_ops,
            liouville_r: d.liouville_r,
            liouville_max_degree: d.liouville_max_degree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizeSection {
    pub max_len: usize,
    pub max_depth: usize,
}

impl Default for TokenizeSection {
    fn default() -> Self {
        TokenizeSection {
            max_len: crate::tokenizer::DEFAULT_MAX_LEN,
            max_depth: crate::encoding::DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    /// Size of the built-in suite; ignored when `rules` is given.
    pub methods: usize,
    pub hard: bool,
    pub rules: Option<Vec<MethodRule>>,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            methods: 6,
            hard: false,
            rules: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    /// Keep at most this many labeled examples, in dataset order.
    pub limit: Option<usize>,
    pub holdout_fraction: f64,
    pub valid_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            limit: None,
            holdout_fraction: 0.1,
            valid_fraction: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub arch: Arch,
    pub embed_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub dropout: f32,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            arch: Arch::TreeTransformer,
            embed_dim: 64,
            layers: 2,
            heads: 4,
            ffn_dim: 256,
            dropout: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub clip_norm: Option<f64>,
    /// One encoder with success and rank heads instead of two models.
    pub share_encoder: bool,
    /// Continue from existing checkpoints instead of starting over.
    pub resume: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr,
            clip_norm: t.clip_norm,
            share_encoder: false,
            resume: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub threshold: f64,
    pub policies: Vec<Policy>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            threshold: DEFAULT_THRESHOLD,
            policies: Policy::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of the named `gen`, `split`, `shuffle` and `init` sub-streams.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub gen: GenSection,
    pub tokenize: TokenizeSection,
    pub oracle: OracleSection,
    pub split: SplitSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("run"),
            gen: GenSection::default(),
            tokenize: TokenizeSection::default(),
            oracle: OracleSection::default(),
            split: SplitSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

/// Command-line values; each is the twin of one config key and wins over it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub count: Option<usize>,
    pub generators: Option<Vec<Generator>>,
    pub max_ops: Option<usize>,
    pub max_len: Option<usize>,
    pub max_depth: Option<usize>,
    pub methods: Option<usize>,
    pub hard: Option<bool>,
    pub limit: Option<usize>,
    pub holdout_fraction: Option<f64>,
    pub valid_fraction: Option<f64>,
    pub arch: Option<Arch>,
    pub embed_dim: Option<usize>,
    pub layers: Option<usize>,
    pub heads: Option<usize>,
    pub ffn_dim: Option<usize>,
    pub dropout: Option<f32>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub share_encoder: Option<bool>,
    pub resume: Option<bool>,
    pub threshold: Option<f64>,
    pub policies: Option<Vec<Policy>>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, HarnessError> {
        let c: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Usage(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<RunConfig, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Usage(format!("{}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), HarnessError> {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        set(&mut self.seed, &o.seed);
        set(&mut self.out_dir, &o.out_dir);
        set(&mut self.gen.count, &o.count);
        set(&mut self.gen.generators, &o.generators);
        set(&mut self.gen.max_ops, &o.max_ops);
        set(&mut self.tokenize.max_len, &o.max_len);
        set(&mut self.tokenize.max_depth, &o.max_depth);
        set(&mut self.oracle.methods, &o.methods);
        set(&mut self.oracle.hard, &o.hard);
        if o.limit.is_some() {
            self.split.limit = o.limit;
        }
        set(&mut self.split.holdout_fraction, &o.holdout_fraction);
        set(&mut self.split.valid_fraction, &o.valid_fraction);
        set(&mut self.model.arch, &o.arch);
        set(&mut self.model.embed_dim, &o.embed_dim);
        set(&mut self.model.layers, &o.layers);
        set(&mut self.model.heads, &o.heads);
        set(&mut self.model.ffn_dim, &o.ffn_dim);
        set(&mut self.model.dropout, &o.dropout);
        set(&mut self.train.epochs, &o.epochs);
        set(&mut self.train.batch_size, &o.batch_size);
        set(&mut self.train.lr, &o.lr);
        set(&mut self.train.share_encoder, &o.share_encoder);
        set(&mut self.train.resume, &o.resume);
        set(&mut self.eval.threshold, &o.threshold);
        set(&mut self.eval.policies, &o.policies);
        self.validate()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Usage(m.to_string()));
        let s = &self.split;
        if !(0.0..1.0).contains(&s.holdout_fraction) || !(0.0..1.0).contains(&s.valid_fraction) {
            return bad("split fractions must be in [0, 1)");
        }
        if s.holdout_fraction + s.valid_fraction >= 1.0 {
            return bad("holdout and valid fractions leave no training data");
        }
        if !(0.0..=1.0).contains(&self.eval.threshold) {
            return bad("threshold must be in [0, 1]");
        }
        self.oracle()?;
        self.model_config(Objective::Rank, 1)
            .validate()
            .map_err(|e| HarnessError::Usage(e.to_string()))?;
        Ok(())
    }

    pub fn datagen(&self) -> DatagenConfig {
        DatagenConfig {
            seed: sub_seed(self.seed, "gen"),
            count: self.gen.count,
            generators: self.gen.generators.clone(),
            max_ops: self.gen.max_ops,
            max_tokens: self.tokenize.max_len,
            liouville_r: self.gen.liouville_r,
            liouville_max_degree: self.gen.liouville_max_degree,
        }
    }

    pub fn oracle(&self) -> Result<MethodOracle, HarnessError> {
        let mut o = match &self.oracle.rules {
            Some(r) => MethodOracle::with_rules(r.clone()),
            None => synthetic_suite(self.oracle.methods),
        }
        .map_err(|e| HarnessError::Usage(e.to_string()))?;
        o.hard = self.oracle.hard;
        Ok(o)
    }

    /// Each objective gets its own initialization stream.
    pub fn model_config(&self, objective: Objective, vocab_size: usize) -> ModelConfig {
        let m = &self.model;
        ModelConfig {
            arch: m.arch,
            vocab_size,
            embed_dim: m.embed_dim,
            layers: m.layers,
            heads: m.heads,
            ffn_dim: m.ffn_dim,
            max_len: self.tokenize.max_len,
            max_depth: self.tokenize.max_depth,
            methods: self.oracle.rules.as_ref().map_or(self.oracle.methods, Vec::len),
            dropout: m.dropout,
            seed: crate::seed::mix(self.seed, &[name_hash(objective.name())]),
        }
    }

    pub fn train_config(&self, objective: Objective) -> TrainConfig {
        TrainConfig {
            objective,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            lr: self.train.lr,
            clip_norm: self.train.clip_norm,
            seed: crate::seed::mix(self.seed, &[name_hash(objective.name())]),
            ..TrainConfig::default()
        }
    }

    /// Models needed by the configured policies.
    pub fn objectives(&self) -> Vec<Objective> {
        let mut out = Vec::new();
        let mut need = |o: Objective| {
            if !out.contains(&o) {
                out.push(o);
            }
        };
        for p in &self.eval.policies {
            match p {
                Policy::FixedOrder => {}
                Policy::Classification => need(Objective::Best),
                Policy::Regression => need(Objective::Regression),
                Policy::RankOnly | Policy::TwoStage if self.train.share_encoder => need(Objective::Joint),
                Policy::RankOnly => need(Objective::Rank),
                Policy::TwoStage => {
                    need(Objective::Success);
                    need(Objective::Rank);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_parse_and_flags_win() {
        let text = r#"
            seed = 7
            out_dir = "somewhere"
            [gen]
            count = 600
            generators = ["FWD", "BWD"]
            [model]
            arch = "lstm"
            [train]
            epochs = 4
            share_encoder = true
            [eval]
            policies = ["two-stage", "fixed-order"]
        "#;
        let mut c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.gen.generators, [Generator::Fwd, Generator::Bwd]);
        assert_eq!(c.model.arch, Arch::Lstm);
        assert_eq!(c.objectives(), [Objective::Joint]);
        c.apply(&Overrides {
            epochs: Some(9),
            arch: Some(Arch::TreeLstm),
            ..Default::default()
        })
        .unwrap();
        assert_eq!((c.train.epochs, c.model.arch), (9, Arch::TreeLstm));
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(c.datagen().seed, sub_seed(7, "gen"));
    }

    #[test]
    fn bad_configs_are_usage_errors() {
        assert!(matches!(RunConfig::from_toml("nonsense = 1"), Err(HarnessError::Usage(_))));
        assert!(matches!(
            RunConfig::from_toml("[oracle]\nmethods = 40"),
            Err(HarnessError::Usage(_))
        ));
        assert!(matches!(
            RunConfig::from_toml("[split]\nholdout_fraction = 0.6\nvalid_fraction = 0.5"),
            Err(HarnessError::Usage(_))
        ));
        let mut c = RunConfig::default();
        let o = Overrides {
            heads: Some(5),
            ..Default::default()
        };
        assert!(c.apply(&o).is_err());
    }

    #[test]
    fn default_objectives() {
        let c = RunConfig::default();
        assert_eq!(
            c.objectives(),
            [Objective::Best, Objective::Regression, Objective::Rank, Objective::Success]
        );
    }
}
