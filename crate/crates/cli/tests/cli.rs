use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
repetitions = 2
selectors = [{ kind = "gts", max_tries = 20 }, { kind = "greedy" }]
beams = [{ b = 2, k = 16 }, { b = 4, k = 32 }]

[world]
shift_tag = "ood"
train_problems = 20
test_problems = 20
"#;

fn uvm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uvm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = uvm(dir, args);
    assert!(
        out.status.success(),
        "uvm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn compare_is_reproducible_and_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    for out in ["a", "b"] {
        ok(dir.path(), &["compare", "--config", "small.toml", "--seed", "11", "--out", out]);
    }
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/raw.csv"), read("b/raw.csv"));
    assert_eq!(read("a/summary.csv"), read("b/summary.csv"));
    for f in [
        "a/checkpoints/head_rep0.json",
        "a/checkpoints/loss_rep1.csv",
        "a/trace/rep1_gts_b4.jsonl",
        "a/trace/rep0_greedy_b2.jsonl",
    ] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let raw = String::from_utf8(read("a/raw.csv")).unwrap();
    // header plus repetitions × beams × selectors
    assert_eq!(raw.lines().count(), 1 + 2 * 2 * 2);

    ok(dir.path(), &["compare", "--config", "small.toml", "--seed", "12", "--out", "c"]);
    assert_ne!(read("a/raw.csv"), read("c/raw.csv"));
}

#[test]
fn compare_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = uvm(dir.path(), &["compare", "--out", "x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn staged_pipeline_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.toml"), SMALL).unwrap();
    let cfg = ["--config", "small.toml"];
    let run = |args: &[&str]| ok(d, &[args, &cfg[..]].concat());
    run(&["gen-world", "--seed", "5", "--out", "world.toml"]);
    run(&["build-dataset", "--world", "world.toml", "--out", "data.jsonl"]);
    run(&["train", "--world", "world.toml", "--dataset", "data.jsonl", "--out", "head.json", "--loss", "loss.csv"]);
    for sel in ["gts", "greedy"] {
        run(&["search", "--world", "world.toml", "--head", "head.json", "--selector", sel, "--b", "4", "--out", &format!("{sel}.jsonl")]);
        let report = ok(d, &["eval", "--world", "world.toml", "--paths", &format!("{sel}.jsonl")]);
        let v: serde_json::Value = serde_json::from_str(report.trim()).unwrap();
        assert_eq!(v["problems"], 20);
        let c = v["coverage"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&c));
    }
    let lines = std::fs::read_to_string(d.join("gts.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 20);
    assert!(d.join("loss.csv").is_file());
}

#[test]
fn failures_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = uvm(dir.path(), &["train", "--world", "missing.toml", "--dataset", "d.jsonl", "--out", "h.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage `train`"));

    std::fs::write(dir.path().join("bad.toml"), "repetitions = 0\n").unwrap();
    let out = uvm(dir.path(), &["compare", "--config", "bad.toml", "--seed", "1", "--out", "o"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage `compare`"));
}
