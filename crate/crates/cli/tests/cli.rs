use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_advstream")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn dims_prefix_8() {
    let o = run(&["dims", "--system", "prefix:8"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "vc=1 ldim=3");
}

#[test]
fn dims_from_file_with_tree() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys.txt");
    std::fs::write(&sys, "3\n-\n1\n2\n3\n1 2\n1 3\n2 3\n1 2 3\n").unwrap();
    let out = dir.path().join("dims.json");
    let o = run(&["dims", "--system", p(&sys), "--tree", "--out", p(&out)]);
    assert_eq!(stdout(&o).trim(), "vc=3 ldim=3");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["tree"]["depth"], 3);
}

#[test]
fn missing_required_flag_exits_1_naming_it() {
    let o = run(&["dims"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--system"));
}

#[test]
fn unknown_flag_and_subcommand_exit_1() {
    assert_eq!(run(&["dims", "--system", "prefix:4", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["dims", "--system", "prefix:4", "--trials", "0"]).status.code(), Some(1));
}

#[test]
fn help_exits_0() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("attack-interval"));
}

#[test]
fn config_file_merges_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "[dims]\nsystem = prefix:16\n").unwrap();
    let o = run(&["dims", "--config", p(&cfg)]);
    assert_eq!(stdout(&o).trim(), "vc=1 ldim=4");
    let o = run(&["dims", "--system", "prefix:8", "--config", p(&cfg)]);
    assert_eq!(stdout(&o).trim(), "vc=1 ldim=3");
}

#[test]
fn bad_config_key_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "[dims]\nsystem = prefix:8\nwidth = 3\n").unwrap();
    let o = run(&["dims", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--width"));
    let o = run(&["dims", "--config", p(&dir.path().join("missing.conf"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.conf"));
}

#[test]
fn replay_reproduces_or_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.jsonl");
    let o = run(&["attack-interval", "--n", "300", "--p", "0.01", "--seed", "4", "--transcript", p(&t)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["replay", "--transcript", p(&t), "--defender", "bernoulli:p=0.01"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("reproduced"));
    let o = run(&["replay", "--transcript", p(&t), "--defender", "bernoulli:p=0.9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn kmv_transcript_replays_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("kmv.jsonl");
    let o = run(&["attack-kmv", "--k", "16", "--rounds", "300", "--target", "single", "--transcript", p(&t)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["replay", "--transcript", p(&t), "--defender", "kmv:k=16"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["replay", "--transcript", p(&t), "--defender", "kmv:k=16", "--defender-seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path, workers: &str| {
        run(&["disc", "--system", "prefix:16", "--rounds", "20", "--trials", "30", "--seed", "9", "--workers", workers, "--out", p(out)])
    };
    assert_eq!(args(&a, "1").status.code(), Some(0));
    assert_eq!(args(&b, "3").status.code(), Some(0));
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("trial,disc\n"));
    assert_eq!(text.lines().count(), 31);
}

#[test]
fn jsonl_records_one_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.jsonl");
    let o = run(&["sketch", "--kind", "kmv", "--k", "64", "--length", "500", "--trials", "7", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 7);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["estimate"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn exhaustive_oracle_switching_clean() {
    let o = run(&["robustify", "--exhaustive", "--query", "f2", "--universe", "3", "--length", "6", "--eps", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("0 violations"));
}

#[test]
fn stream_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.txt");
    std::fs::write(&s, "# index delta\n1 1\n2 1\n2 1\n3 1\n").unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&["robustify", "--copies", "oracle", "--query", "f2", "--universe", "3", "--length", "4", "--stream", p(&s), "--trace", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = std::fs::read_to_string(&out).unwrap();
    assert_eq!(trace.lines().count(), 5);
    assert!(trace.lines().last().unwrap().starts_with("4,6.0,"));
}

#[test]
fn out_of_range_stream_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.txt");
    std::fs::write(&s, "9 1\n").unwrap();
    let o = run(&["robustify", "--copies", "oracle", "--universe", "3", "--length", "4", "--stream", p(&s)]);
    assert_eq!(o.status.code(), Some(1));
}
