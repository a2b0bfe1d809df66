//! Mixed-generator datasets, deduplicated and written as JSON lines.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::generators::{backward_pair, forward_pair, gen_bwd, gen_fwd, gen_ibp, gen_sub, Pool};
use super::liouville::{gen_liouville, gen_special_liouville, liouville_special_candidates, Extension, LiouvilleConfig};
use super::special::{gen_special, SpecialConfig};
use super::{DataPair, DatagenError, Generator, MAX_RETRIES};
use crate::expr::{canonical_key, parse_prefix, tiered_prefix, to_prefix_string, GenConfig};
use crate::seed::mix;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatagenConfig {
    pub seed: u64,
    /// Total number of pairs, split evenly over `generators`.
    pub count: usize,
    pub generators: Vec<Generator>,
    /// Operator budget for random elementary expressions.
    pub max_ops: usize,
    /// Pairs whose tokenized integrand (with `[CLS]`) is longer are dropped.
    pub max_tokens: usize,
    /// Denominator multiplicity bound for LIOUVILLE.
    pub liouville_r: usize,
    /// Degree bound of the LIOUVILLE denominator.
    pub liouville_max_degree: usize,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        DatagenConfig {
            seed: 0,
            count: 1000,
            generators: vec![
                Generator::Fwd,
                Generator::Bwd,
                Generator::Ibp,
                Generator::Sub,
                Generator::Liouville,
            ],
            max_ops: 5,
            max_tokens: 256,
            liouville_r: 2,
            liouville_max_degree: 4,
        }
    }
}

impl DatagenConfig {
    fn validate(&self) -> Result<(), DatagenError> {
        let bad = |m: &str| Err(DatagenError::InvalidConfig(m.to_string()));
        if self.count > 0 && self.generators.is_empty() {
            return bad("no generators selected");
        }
        if self.max_ops == 0 {
            return bad("max_ops must be positive");
        }
        if self.max_tokens < 2 {
            return bad("max_tokens must be at least 2");
        }
        let mut seen = HashSet::new();
        if !self.generators.iter().all(|g| seen.insert(*g)) {
            return bad("duplicate generator");
        }
        Ok(())
    }

    /// Per-generator targets; the remainder goes to the first generators.
    pub fn targets(&self) -> BTreeMap<Generator, usize> {
        let n = self.generators.len().max(1);
        self.generators
            .iter()
            .enumerate()
            .map(|(i, g)| (*g, self.count / n + usize::from(i < self.count % n)))
            .collect()
    }
}

/// Per-generator bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenCounts {
    pub requested: usize,
    pub produced: usize,
    pub attempts: usize,
    pub unverified: usize,
    pub duplicates: usize,
    pub too_long: usize,
    pub failed: usize,
    /// Requested pairs abandoned after exhausting their retries.
    pub exhausted: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenStats {
    pub per_generator: BTreeMap<Generator, GenCounts>,
}

impl GenStats {
    pub fn total_produced(&self) -> usize {
        self.per_generator.values().map(|c| c.produced).sum()
    }
}

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: usize,
    pub generator: Generator,
    pub seed: u64,
    pub integrand_prefix: String,
    pub integral_prefix: String,
    pub verified: bool,
}

impl PairRecord {
    pub fn from_pair(id: usize, p: &DataPair) -> PairRecord {
        PairRecord {
            id,
            generator: p.generator,
            seed: p.seed,
            integrand_prefix: to_prefix_string(&p.integrand),
            integral_prefix: to_prefix_string(&p.integral),
            verified: p.verified,
        }
    }

    pub fn to_pair(&self) -> Result<DataPair, DatagenError> {
        Ok(DataPair {
            integrand: parse_prefix(&self.integrand_prefix)?,
            integral: parse_prefix(&self.integral_prefix)?,
            generator: self.generator,
            seed: self.seed,
            verified: self.verified,
        })
    }
}

fn generator_order(g: Generator) -> usize {
    // Pool-based generators run last so they can draw on every other pair.
    match g {
        Generator::Fwd => 0,
        Generator::Bwd => 1,
        Generator::Liouville => 2,
        Generator::Special => 3,
        Generator::Ibp => 4,
        Generator::Sub => 5,
    }
}

struct Context {
    elementary: GenConfig,
    liouville: LiouvilleConfig,
    special: SpecialConfig,
    special_fns: Vec<String>,
    pool: Pool,
}

fn attempt(ctx: &Context, g: Generator, seed: u64) -> Result<DataPair, DatagenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match g {
        Generator::Bwd => gen_bwd(&ctx.elementary, seed),
        Generator::Fwd => {
            if rng.gen_bool(0.2) {
                forward_pair(&gen_special(&ctx.special, &mut rng)?, seed)
            } else {
                gen_fwd(&ctx.elementary, seed)
            }
        }
        Generator::Ibp => gen_ibp(&ctx.pool, &ctx.elementary, seed),
        Generator::Sub => gen_sub(&ctx.pool, &ctx.elementary, seed),
        Generator::Liouville => {
            let main = match rng.gen_range(0..4) {
                0 | 1 => Extension::X,
                2 => Extension::Exp(rng.gen_range(1..=2)),
                _ => Extension::Ln,
            };
            let cfg = LiouvilleConfig {
                extensions: LiouvilleConfig::with_main(main).extensions,
                ..ctx.liouville.clone()
            };
            gen_liouville(&cfg, seed)
        }
        Generator::Special => {
            if rng.gen_bool(0.5) {
                backward_pair(&gen_special(&ctx.special, &mut rng)?, Generator::Special, seed)
            } else {
                let f = ctx
                    .special_fns
                    .choose(&mut rng)
                    .ok_or_else(|| DatagenError::EmptyGroup("*".into()))?;
                gen_special_liouville(f, &ctx.liouville, seed)
            }
        }
    }
}

/// Generates the configured mix. Each requested pair gets up to
/// [`MAX_RETRIES`] attempts; pairs that fail verification, repeat an
/// earlier integrand, or exceed `max_tokens` are dropped and counted.
pub fn generate_dataset(cfg: &DatagenConfig) -> Result<(Vec<DataPair>, GenStats), DatagenError> {
    cfg.validate()?;
    let targets = cfg.targets();
    let mut order: Vec<Generator> = targets.keys().copied().collect();
    order.sort_by_key(|g| generator_order(*g));
    let mut ctx = Context {
        elementary: GenConfig::elementary(cfg.max_ops),
        liouville: LiouvilleConfig {
            r: cfg.liouville_r,
            max_degree: cfg.liouville_max_degree,
            ..LiouvilleConfig::default()
        },
        special: SpecialConfig::default(),
        special_fns: liouville_special_candidates(None),
        pool: Pool::seeded(),
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut stats = GenStats::default();
    for g in order {
        let counts = stats.per_generator.entry(g).or_default();
        counts.requested = targets[&g];
        for i in 0..targets[&g] {
            let mut accepted = false;
            for a in 0..MAX_RETRIES {
                counts.attempts += 1;
                let seed = mix(cfg.seed, &[generator_order(g) as u64, i as u64, a as u64]);
                let pair = match attempt(&ctx, g, seed) {
                    Ok(p) => p,
                    Err(DatagenError::InvalidConfig(m)) => return Err(DatagenError::InvalidConfig(m)),
                    Err(_) => {
                        counts.failed += 1;
                        continue;
                    }
                };
                if !pair.verified {
                    counts.unverified += 1;
                    continue;
                }
                if tiered_prefix(&pair.integrand).len() + 1 > cfg.max_tokens {
                    counts.too_long += 1;
                    continue;
                }
                if !seen.insert(canonical_key(&pair.integrand)) {
                    counts.duplicates += 1;
                    continue;
                }
                ctx.pool.push(pair.integrand.clone(), pair.integral.clone());
                out.push(pair);
                counts.produced += 1;
                accepted = true;
                break;
            }
            if !accepted {
                counts.exhausted += 1;
            }
        }
    }
    Ok((out, stats))
}

pub fn write_dataset(path: &Path, pairs: &[DataPair]) -> Result<(), DatagenError> {
    let io = |e: std::io::Error| DatagenError::Io(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for (id, p) in pairs.iter().enumerate() {
        let line = serde_json::to_string(&PairRecord::from_pair(id, p))
            .map_err(|e| DatagenError::Parse(e.to_string()))?;
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_dataset(path: &Path) -> Result<Vec<PairRecord>, DatagenError> {
    let io = |e: std::io::Error| DatagenError::Io(format!("{}: {e}", path.display()));
    let r = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PairRecord = serde_json::from_str(&line)
            .map_err(|e| DatagenError::Parse(format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(count: usize) -> DatagenConfig {
        DatagenConfig {
            count,
            seed: 11,
            ..DatagenConfig::default()
        }
    }

    #[test]
    fn even_split() {
        let t = small(600).targets();
        assert!(t.values().all(|&n| n == 120));
        let t = small(7).targets();
        assert_eq!(t.values().sum::<usize>(), 7);
    }

    #[test]
    fn empty_dataset() {
        let (pairs, stats) = generate_dataset(&small(0)).unwrap();
        assert!(pairs.is_empty());
        assert_eq!(stats.total_produced(), 0);
    }

    #[test]
    fn deterministic_and_unique() {
        let cfg = DatagenConfig {
            generators: Generator::ALL.to_vec(),
            ..small(60)
        };
        let (a, sa) = generate_dataset(&cfg).unwrap();
        let (b, sb) = generate_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert!(a.iter().all(|p| p.verified));
        let keys: HashSet<String> = a.iter().map(|p| canonical_key(&p.integrand)).collect();
        assert_eq!(keys.len(), a.len());
    }

    #[test]
    fn jsonl_round_trip() {
        let (pairs, _) = generate_dataset(&small(10)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        write_dataset(&path, &pairs).unwrap();
        let recs = read_dataset(&path).unwrap();
        assert_eq!(recs.len(), pairs.len());
        for (i, (r, p)) in recs.iter().zip(&pairs).enumerate() {
            assert_eq!(r.id, i);
            assert_eq!(&r.to_pair().unwrap(), p);
        }
    }
}
