//! Verified (integrand, integral) pair generators.

mod batch;
mod generators;
pub mod integrate;
pub mod liouville;
pub mod poly;
pub mod special;
mod verify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError};

pub use batch::{
    generate_dataset, read_dataset, write_dataset, DatagenConfig, GenCounts, GenStats, PairRecord,
};
pub use generators::{
    backward_pair, forward_pair, gen_bwd, gen_fwd, gen_ibp, gen_sub, ibp_pair, sub_pair, Pool,
};
pub use integrate::integrate_table;
pub use liouville::{
    gen_liouville, gen_special_liouville, has_liouville_shape, liouville_parts, Extension,
    LiouvilleConfig, LiouvilleParts,
};
pub use poly::{partial_fraction, square_free_factor, PartialFractions, PfTerm, Polynomial};
pub use special::{gen_special, SpecialConfig, MAX_SPECIAL_TERMS};
pub use verify::{verify_integral, verify_pair, VERIFY_POINTS, VERIFY_REQUIRED, VERIFY_RTOL};

/// Retries per requested pair before a generator gives up.
pub const MAX_RETRIES: usize = 50;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatagenError {
    #[error("integrand simplifies to zero")]
    DegeneratePair,
    #[error("no applicable pair found")]
    NoApplicablePair,
    #[error("not integrable by the rule table")]
    NotIntegrableByTable,
    #[error("zero polynomial")]
    ZeroPolynomial,
    #[error("denominator factors are not pairwise coprime")]
    NotCoprimeFactors,
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("special-function group `{0}` has no registered members")]
    EmptyGroup(String),
    #[error("candidate failed numeric verification")]
    Unverified,
    #[error("{generator} gave up after {attempts} attempts")]
    RetriesExhausted { generator: Generator, attempts: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Generator {
    Fwd,
    Bwd,
    Ibp,
    Sub,
    Liouville,
    Special,
}

impl Generator {
    pub const ALL: [Generator; 6] = [
        Generator::Fwd,
        Generator::Bwd,
        Generator::Ibp,
        Generator::Sub,
        Generator::Liouville,
        Generator::Special,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Generator::Fwd => "FWD",
            Generator::Bwd => "BWD",
            Generator::Ibp => "IBP",
            Generator::Sub => "SUB",
            Generator::Liouville => "LIOUVILLE",
            Generator::Special => "SPECIAL",
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = DatagenError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Generator::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| DatagenError::InvalidConfig(format!("unknown generator `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPair {
    pub integrand: Expr,
    pub integral: Expr,
    pub generator: Generator,
    pub seed: u64,
    pub verified: bool,
}

impl DataPair {
    /// Builds a pair and runs [`verify_pair`] on it.
    pub fn verified_new(integrand: Expr, integral: Expr, generator: Generator, seed: u64) -> DataPair {
        let mut p = DataPair {
            integrand,
            integral,
            generator,
            seed,
            verified: false,
        };
        p.verified = verify_pair(&p);
        p
    }
}
