//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use intrank::datagen::{generate_dataset, verify_pair, DatagenConfig, Generator};
use intrank::encoding::tree_positions;
use intrank::expr::{from_prefix, parse_prefix, random_expr, to_prefix, GenConfig};
use intrank::harness::{cmd_eval, cmd_gen, cmd_label, cmd_report, cmd_tokenize, cmd_train, run_all, EvalReport, Overrides, RunConfig};
use intrank::neural::{
    bce_multilabel_grad, bce_multilabel_loss, rank_loss, rank_loss_grad, regression_loss, regression_loss_grad, Arch,
};
use intrank::selector::{baseline_order, rank_only_select, regression_select, two_stage_select, Policy, DEFAULT_THRESHOLD};
use intrank::tokenizer::{dedup, dedup_key, encode_int};
use num::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn report(n: usize, name: &str, r: &Outcome) {
    let line = match r {
        Ok(d) => format!("PASS criterion {n:>2} {name}: {d}"),
        Err(d) => format!("FAIL criterion {n:>2} {name}: {d}"),
    };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn generator_soundness() -> Outcome {
    let start = Instant::now();
    let cfg = DatagenConfig {
        seed: 1,
        count: 6000,
        generators: Generator::ALL.to_vec(),
        ..DatagenConfig::default()
    };
    let (pairs, stats) = generate_dataset(&cfg).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for g in Generator::ALL {
        let ours: Vec<_> = pairs.iter().filter(|p| p.generator == g).collect();
        let bad = ours.iter().filter(|p| !verify_pair(p)).count();
        check(bad == 0, format!("{g}: {bad} pairs fail verification"))?;
        if g != Generator::Fwd {
            check(ours.len() == 1000, format!("{g}: {} of 1000 pairs", ours.len()))?;
        }
        check(ours.len() == stats.per_generator[&g].produced, format!("{g}: stats disagree"))?;
        parts.push(format!("{g}={}", ours.len()));
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 300.0, format!("took {secs:.1}s"))?;
    Ok(format!("{} verified in {secs:.1}s", parts.join(" ")))
}

fn sin_square_positions() -> Outcome {
    let e = parse_prefix("+ sin ^ x 2 1").map_err(|e| e.to_string())?;
    let want: [[u8; 6]; 6] = [
        [0, 0, 0, 0, 0, 0],
        [1, 0, 0, 0, 0, 0],
        [1, 0, 1, 0, 0, 0],
        [1, 0, 1, 0, 1, 0],
        [0, 1, 1, 0, 1, 0],
        [0, 1, 0, 0, 0, 0],
    ];
    let got = tree_positions(&e, 3);
    check(got.len() == 6, format!("{} nodes", got.len()))?;
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        check(g.as_slice() == w, format!("node {i}: {g:?} != {w:?}"))?;
    }
    Ok("six position vectors match".into())
}

fn central_diff(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut a = x.to_vec();
    let mut b = x.to_vec();
    a[i] += h;
    b[i] -= h;
    (f(&a) - f(&b)) / (2.0 * h)
}

fn grad_ok(f: &dyn Fn(&[f64]) -> f64, g: &[f64], x: &[f64]) -> Result<(), String> {
    for i in 0..x.len() {
        let fd = central_diff(f, x, i, 1e-5);
        let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-3);
        check(err <= 1e-4, format!("component {i}: analytic {} vs numeric {fd}", g[i]))?;
    }
    Ok(())
}

fn loss_correctness() -> Outcome {
    let l = rank_loss(&[0.0, 0.0], &[1, 2], &[true, true]);
    let w = 1.0 / (3.5f64.ln() / 2f64.ln());
    check((w - 0.55329).abs() < 5e-6, format!("weight {w}"))?;
    let want = w * 2f64.ln();
    check((l - want).abs() <= 1e-6, format!("rank_loss {l} vs {want}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let n = rng.gen_range(2..8);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<u32> = (0..n).map(|_| rng.gen_range(1..5)).collect();
        let m: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
        grad_ok(&|q| rank_loss(q, &y, &m), &rank_loss_grad(&p, &y, &m), &p).map_err(|e| format!("rank: {e}"))?;

        let t: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
        grad_ok(&|q| bce_multilabel_loss(q, &t), &bce_multilabel_grad(&p, &t), &p).map_err(|e| format!("bce: {e}"))?;

        let truth: Vec<Option<f64>> = (0..n)
            .map(|_| rng.gen_bool(0.7).then(|| rng.gen_range(-2.0..2.0)))
            .collect();
        let means: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        grad_ok(&|q| regression_loss(q, &truth, &means), &regression_loss_grad(&p, &truth, &means), &p)
            .map_err(|e| format!("regression: {e}"))?;
    }
    Ok(format!("rank_loss = {l:.7}; 3 x 100 gradient checks"))
}

fn regression_order_pathology() -> Outcome {
    let truth = [Some(10.0), Some(13.0)];
    let outcomes = [Some(10), Some(13)];
    let b = [0, 1];
    let mse = |p: [f64; 2]| regression_loss(&p, &truth, &[0.0, 0.0]);
    let m1 = regression_select(&[14.0, 13.0], None, &b, &outcomes).map_err(|e| e.to_string())?;
    let m2 = regression_select(&[6.0, 13.0], None, &b, &outcomes).map_err(|e| e.to_string())?;
    check(m1.chosen == 1 && !m1.matched, format!("model 1 chose method {}", m1.chosen + 1))?;
    check(m2.chosen == 0 && m2.matched, format!("model 2 chose method {}", m2.chosen + 1))?;
    let (a, c) = (mse([14.0, 13.0]), mse([6.0, 13.0]));
    check(a == 8.0 && c == 8.0, format!("MSEs {a} and {c}"))?;
    Ok("model 1 picks method 2, model 2 picks method 1, both MSE 8".into())
}

fn admissible_first_scenario() -> Outcome {
    let outcomes = [Some(10), Some(12), None];
    let probs = [0.0, 1.0, 0.0];
    let scores = [2.0, 3.0, 1.0];
    let b = baseline_order(3);
    let two = two_stage_select(&probs, &scores, DEFAULT_THRESHOLD, &b, &outcomes).map_err(|e| e.to_string())?;
    let rank = rank_only_select(&scores, &b, &outcomes).map_err(|e| e.to_string())?;
    check((two.chosen, two.attempts) == (1, 1), format!("two-stage gave (M{}, {})", two.chosen + 1, two.attempts))?;
    check((rank.chosen, rank.attempts) == (0, 2), format!("rank-only gave (M{}, {})", rank.chosen + 1, rank.attempts))?;
    Ok("two-stage = (M2, 1 attempt), rank-only = (M1, 2 attempts)".into())
}

fn base_config(dir: &Path, o: Overrides) -> RunConfig {
    let mut c = RunConfig::default();
    c.apply(&Overrides {
        out_dir: Some(dir.to_path_buf()),
        ..o
    })
    .expect("valid config");
    c
}

fn check_nesting(r: &EvalReport) -> Result<(), String> {
    r.check_invariants()
}

fn learnability() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = base_config(
        dir.path(),
        Overrides {
            seed: Some(6),
            count: Some(22_000),
            limit: Some(20_000),
            holdout_fraction: Some(0.1),
            arch: Some(Arch::TreeTransformer),
            epochs: Some(2),
            ..Overrides::default()
        },
    );
    let start = Instant::now();
    let r = run_all(&cfg).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(r.holdout == 2000, format!("holdout has {} examples", r.holdout))?;
    check_nesting(&r)?;
    let two = r.policy("two-stage").ok_or("no two-stage report")?;
    let fixed = r.policy("fixed-order").ok_or("no fixed-order report")?;
    let perfect = r.policy("perfect-knowledge").ok_or("no perfect-knowledge report")?;
    check(perfect.exact == 1.0, "perfect-knowledge below 1")?;
    check(fixed.exact < perfect.exact, format!("fixed-order exact {}", fixed.exact))?;
    check(secs <= 1800.0, format!("took {secs:.0}s"))?;
    check(two.exact >= 0.9, format!("two-stage exact {:.4}", two.exact))?;
    let _ = writeln!(std::io::stderr().lock(), "{}", intrank::harness::report::summary_text(&r));
    Ok(format!(
        "two-stage exact {:.4} (within5 {:.4}, within10 {:.4}), fixed-order {:.4}, {secs:.0}s",
        two.exact, two.within5, two.within10, fixed.exact
    ))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn trends() -> Outcome {
    let exact = |arch: Arch| -> Result<Vec<(f64, usize, usize)>, String> {
        let mut out = Vec::new();
        for seed in [11u64, 12, 13] {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let cfg = base_config(
                dir.path(),
                Overrides {
                    seed: Some(seed),
                    count: Some(3_300),
                    limit: Some(3_000),
                    arch: Some(arch),
                    epochs: Some(2),
                    policies: Some(vec![Policy::RankOnly, Policy::TwoStage]),
                    ..Overrides::default()
                },
            );
            let r = run_all(&cfg).map_err(|e| e.to_string())?;
            check_nesting(&r)?;
            let two = r.policy("two-stage").ok_or("no two-stage report")?;
            let rank = r.policy("rank-only").ok_or("no rank-only report")?;
            out.push((two.exact, two.total_attempts, rank.total_attempts));
        }
        Ok(out)
    };
    let mut med = std::collections::BTreeMap::new();
    let mut attempts = (Vec::new(), Vec::new());
    for arch in Arch::ALL {
        let runs = exact(arch)?;
        med.insert(arch.name(), median(runs.iter().map(|r| r.0).collect()));
        if arch == Arch::TreeTransformer {
            attempts = (
                runs.iter().map(|r| r.1 as f64).collect(),
                runs.iter().map(|r| r.2 as f64).collect(),
            );
        }
    }
    let detail = format!(
        "median exact {}; tree-transformer attempts two-stage {} vs rank-only {}",
        med.iter().map(|(k, v)| format!("{k}={v:.4}")).collect::<Vec<_>>().join(" "),
        median(attempts.0.clone()),
        median(attempts.1.clone())
    );
    check(med["tree-transformer"] >= med["transformer"], format!("tree transformer below transformer: {detail}"))?;
    check(med["tree-lstm"] >= med["lstm"], format!("tree-lstm below lstm: {detail}"))?;
    check(median(attempts.0) < median(attempts.1), format!("two-stage does not save attempts: {detail}"))?;
    Ok(detail)
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let o = Overrides {
        seed: Some(8),
        count: Some(1_500),
        epochs: Some(1),
        embed_dim: Some(32),
        ffn_dim: Some(64),
        ..Overrides::default()
    };
    let ca = base_config(a.path(), o.clone());
    let cb = base_config(b.path(), o);
    for c in [&ca, &cb] {
        cmd_gen(c).map_err(|e| e.to_string())?;
        cmd_tokenize(c).map_err(|e| e.to_string())?;
        cmd_label(c).map_err(|e| e.to_string())?;
        cmd_train(c).map_err(|e| e.to_string())?;
        cmd_eval(c).map_err(|e| e.to_string())?;
        cmd_report(c).map_err(|e| e.to_string())?;
    }
    let mut files = 0;
    for entry in std::fs::read_dir(a.path()).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        if p.is_file() {
            let other = b.path().join(p.file_name().unwrap());
            let same = std::fs::read(&p).ok() == std::fs::read(&other).ok();
            check(same, format!("{} differs", p.display()))?;
            files += 1;
        }
    }
    Ok(format!("{files} output files byte-identical"))
}

fn tokenizer_conformance() -> Outcome {
    let table: [(i64, &str); 11] = [
        (-2, "2"),
        (-1, "1"),
        (0, "0"),
        (1, "1"),
        (2, "2"),
        (3, "CONST"),
        (9, "CONST"),
        (10, "CONST2"),
        (99, "CONST2"),
        (100, "CONST3"),
        (12345, "CONST3"),
    ];
    for (n, tier) in table {
        let sign = if n < 0 { "INT-" } else { "INT+" };
        let got = encode_int(&BigInt::from(n));
        check(got == [sign, tier], format!("{n}: {got:?}"))?;
    }
    let cfg = DatagenConfig {
        seed: 9,
        count: 2000,
        ..DatagenConfig::default()
    };
    let (pairs, _) = generate_dataset(&cfg).map_err(|e| e.to_string())?;
    let corpus: Vec<_> = pairs.iter().map(|p| p.integrand.clone()).collect();
    let once = dedup(&corpus);
    let keys: HashSet<String> = once.iter().map(dedup_key).collect();
    check(keys.len() == once.len(), "dedup left tier-equivalent integrands")?;
    let all: HashSet<String> = corpus.iter().map(dedup_key).collect();
    check(all.len() == once.len(), "dedup dropped a distinct integrand")?;
    check(dedup(&once) == once, "dedup is not idempotent")?;
    Ok(format!("11 boundary integers; {} -> {} unique integrands", corpus.len(), once.len()))
}

fn prefix_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for i in 0..10_000 {
        let ops = rng.gen_range(1..15);
        let e = random_expr(&GenConfig::elementary(ops), &mut rng).map_err(|e| e.to_string())?;
        let back = from_prefix(&to_prefix(&e)).map_err(|err| format!("#{i} {e}: {err}"))?;
        check(back == e, format!("#{i}: {e} came back as {back}"))?;
    }
    Ok("10000 expressions".into())
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("generator soundness", generator_soundness),
        ("tree positions", sin_square_positions),
        ("loss correctness", loss_correctness),
        ("regression order pathology", regression_order_pathology),
        ("two-stage vs rank-only scenario", admissible_first_scenario),
        ("end-to-end learnability", learnability),
        ("qualitative trends", trends),
        ("determinism", determinism),
        ("tokenizer conformance", tokenizer_conformance),
        ("prefix round trip", prefix_round_trip),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let r = f();
        report(i + 1, name, &r);
        if r.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
