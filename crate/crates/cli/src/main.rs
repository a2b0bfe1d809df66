use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use intrank::datagen::Generator;
use intrank::harness::{self, HarnessError, Overrides, RunConfig};
use intrank::neural::Arch;
use intrank::selector::Policy;

#[derive(Parser)]
#[command(name = "intrank", version, about = "Rank symbolic integration methods with toy neural encoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate verified (integrand, integral) pairs.
    Gen(Common),
    /// Deduplicate, build the vocabulary and tokenize integrands.
    Tokenize(Common),
    /// Label pairs with the method oracle and split them.
    Label(Common),
    /// Train the models the configured policies need.
    Train(Common),
    /// Evaluate every policy on the holdout.
    Eval(Common),
    /// Rank the methods for one integrand in prefix notation, e.g. "* x sin x".
    Rank {
        integrand: String,
        #[command(flatten)]
        common: Common,
    },
    /// Write the summary and CSV files from the last evaluation.
    Report(Common),
    /// Run gen, tokenize, label, train, eval and report.
    All(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    count: Option<usize>,
    /// Comma-separated, e.g. FWD,BWD,IBP.
    #[arg(long, value_delimiter = ',', value_parser = parse_generator)]
    generators: Option<Vec<Generator>>,
    #[arg(long)]
    max_ops: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    methods: Option<usize>,
    #[arg(long)]
    hard: Option<bool>,
    /// Keep at most this many labeled examples.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    holdout_fraction: Option<f64>,
    #[arg(long)]
    valid_fraction: Option<f64>,
    /// lstm, tree-lstm, transformer or tree-transformer.
    #[arg(long, value_parser = parse_arch)]
    arch: Option<Arch>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    ffn_dim: Option<usize>,
    #[arg(long)]
    dropout: Option<f32>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    share_encoder: Option<bool>,
    #[arg(long)]
    resume: Option<bool>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Comma-separated policy names.
    #[arg(long, value_delimiter = ',', value_parser = parse_policy)]
    policies: Option<Vec<Policy>>,
}

fn parse_generator(s: &str) -> Result<Generator, String> {
    Generator::ALL
        .into_iter()
        .find(|g| g.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown generator {s}"))
}

fn parse_arch(s: &str) -> Result<Arch, String> {
    Arch::parse(s).ok_or_else(|| format!("unknown architecture {s}"))
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    Policy::parse(s).ok_or_else(|| format!("unknown policy {s}"))
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            count: self.count,
            generators: self.generators.clone(),
            max_ops: self.max_ops,
            max_len: self.max_len,
            max_depth: self.max_depth,
            methods: self.methods,
            hard: self.hard,
            limit: self.limit,
            holdout_fraction: self.holdout_fraction,
            valid_fraction: self.valid_fraction,
            arch: self.arch,
            embed_dim: self.embed_dim,
            layers: self.layers,
            heads: self.heads,
            ffn_dim: self.ffn_dim,
            dropout: self.dropout,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            share_encoder: self.share_encoder,
            resume: self.resume,
            threshold: self.threshold,
            policies: self.policies.clone(),
        }
    }

    fn config(&self) -> Result<RunConfig, HarnessError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        c.apply(&self.overrides())?;
        Ok(c)
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn run(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Gen(c) => {
            let stats = harness::cmd_gen(&c.config()?)?;
            println!("{}", json(&stats));
        }
        Command::Tokenize(c) => println!("{}", json(&harness::cmd_tokenize(&c.config()?)?)),
        Command::Label(c) => println!("{}", json(&harness::cmd_label(&c.config()?)?)),
        Command::Train(c) => {
            for (objective, trace) in harness::cmd_train(&c.config()?)? {
                if let Some(last) = trace.last() {
                    println!(
                        "{}: epoch {} {} loss {:.6} exact {:.4}",
                        objective.name(),
                        last.epoch,
                        last.split,
                        last.loss,
                        last.exact_match
                    );
                }
            }
        }
        Command::Eval(c) => {
            let cfg = c.config()?;
            harness::cmd_eval(&cfg)?;
            print!("{}", harness::cmd_report(&cfg)?);
        }
        Command::Rank { integrand, common } => {
            for (i, m) in harness::cmd_rank(&common.config()?, &integrand)?.iter().enumerate() {
                println!(
                    "{}. {} p={:.3} score={:.4}{}",
                    i + 1,
                    m.method,
                    m.probability,
                    m.score,
                    if m.admissible { "" } else { " (inadmissible)" }
                );
            }
        }
        Command::Report(c) => print!("{}", harness::cmd_report(&c.config()?)?),
        Command::All(c) => {
            let cfg = c.config()?;
            harness::run_all(&cfg)?;
            print!("{}", harness::cmd_report(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
