use std::path::Path;
use std::process::Command;

fn run(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_intrank"))
        .args(args)
        .args(["--out-dir", dir.to_str().unwrap()])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

const SMALL: &[&str] = &["--count", "300", "--epochs", "1", "--embed-dim", "16", "--ffn-dim", "32", "--layers", "1"];

#[test]
fn pipeline_and_rank() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = run(&[&["all"], SMALL].concat(), dir.path());
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("two-stage"));
    let (code, text) = run(&[&["rank", "* x sin x"], SMALL].concat(), dir.path());
    assert_eq!(code, 0, "{text}");
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("1. M"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["gen", "--arch", "nope"], dir.path()).0, 1);
    assert_eq!(run(&["gen", "--holdout-fraction", "0.95", "--valid-fraction", "0.1"], dir.path()).0, 1);
    assert_eq!(run(&["eval"], dir.path()).0, 2);
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[gen]\nbogus = 1\n").unwrap();
    assert_eq!(run(&["gen", "--config", cfg.to_str().unwrap()], dir.path()).0, 1);

    assert_eq!(run(&["gen", "--count", "200"], dir.path()).0, 0);
    assert_eq!(run(&["tokenize"], dir.path()).0, 0);
    assert_eq!(run(&["label"], dir.path()).0, 0);
    let (code, text) = run(&["eval"], dir.path());
    assert_eq!(code, 2);
    assert!(text.contains("missing checkpoint"), "{text}");
    assert_eq!(run(&["rank", "* x"], dir.path()).0, 1);
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = run(&["all", "--count", "200", "--epochs", "1", "--lr", "1e300", "--policies", "rank-only"], dir.path());
    assert_eq!(code, 3, "{text}");
}
