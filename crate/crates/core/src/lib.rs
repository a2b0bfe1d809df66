//! Ranking symbolic-integration methods: expression core, data generators,
//! tokenizer, positional encodings, neural encoders, selection policies,
//! a synthetic method oracle, and the pipeline harness.

pub mod expr;
pub mod datagen;
pub mod seed;
pub mod tokenizer;
pub mod encoding;
pub mod oracle;
pub mod neural;
pub mod selector;
pub mod harness;
