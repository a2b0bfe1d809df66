//! The end-to-end pipeline behind the command-line tool: configuration,
//! the gen / tokenize / label / train / eval / rank / report steps, and
//! evaluation reports.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{Overrides, RunConfig};
pub use pipeline::{
    cmd_eval, cmd_gen, cmd_label, cmd_rank, cmd_report, cmd_tokenize, cmd_train, run_all, Paths,
    RankedMethod, Split, TokenizeSummary,
};
pub use report::{
    attempts_csv, confusion_csv, parse_attempts_csv, parse_confusion_csv, parse_example_rows,
    EvalReport, ExampleRow, PolicyReport,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("missing checkpoint {0}")]
    MissingCheckpoint(PathBuf),
    #[error("divergence: {0}")]
    Diverged(String),
    #[error("io: {0}")]
    Io(String),
}

impl HarnessError {
    /// 1 usage, 2 data, 3 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            HarnessError::Data(_) | HarnessError::MissingCheckpoint(_) | HarnessError::Io(_) => 2,
            HarnessError::Diverged(_) => 3,
        }
    }
}

impl From<crate::datagen::DatagenError> for HarnessError {
    fn from(e: crate::datagen::DatagenError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<crate::tokenizer::TokenizeError> for HarnessError {
    fn from(e: crate::tokenizer::TokenizeError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<crate::oracle::OracleError> for HarnessError {
    fn from(e: crate::oracle::OracleError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<crate::neural::NeuralError> for HarnessError {
    fn from(e: crate::neural::NeuralError) -> Self {
        match e {
            crate::neural::NeuralError::Diverged { .. } => HarnessError::Diverged(e.to_string()),
            _ => HarnessError::Data(e.to_string()),
        }
    }
}

impl From<crate::expr::ExprError> for HarnessError {
    fn from(e: crate::expr::ExprError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
