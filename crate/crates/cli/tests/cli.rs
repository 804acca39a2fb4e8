use std::path::Path;
use std::process::{Command, Output};

use markov_ce::MarkovGame;

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_markov-ce"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn gen(dir: &Path, name: &str, extra: &[&str]) -> String {
    let mut args = vec!["gen", "-o", name];
    args.extend_from_slice(extra);
    let out = cli(dir, &args);
    assert!(out.status.success(), "{}", stderr(&out));
    stdout(&out).trim().to_string()
}

#[test]
fn gen_prints_stable_hash() {
    let dir = tempfile::tempdir().unwrap();
    let flags = ["--n", "2", "--H", "2", "--S", "2", "--A", "2,2", "--seed", "7"];
    let first = gen(dir.path(), "g.json", &flags);
    let second = gen(dir.path(), "h.json", &flags);
    assert_eq!(first, second);
    assert_eq!(first.len(), 64);
    let game = MarkovGame::from_json(&std::fs::read(dir.path().join("g.json")).unwrap()).unwrap();
    assert_eq!(game.hash(), first);
}

#[test]
fn gen_rejects_action_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["gen", "--n", "2", "--H", "2", "--S", "2", "--A", "2", "-o", "g.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("need one action count per player"));
}

#[test]
fn run_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "g.json", &["--n", "2", "--H", "2", "--S", "2", "--A", "2,2", "--seed", "7"]);
    let out = cli(d, &["run", "--game", "g.json", "--T", "256", "--eta", "auto", "--seed", "1", "-o", "a.bin"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
    assert!(stderr(&out).contains("max per-state regret"));

    let out = cli(d, &["eval", "--artifact", "a.bin", "--game", "g.json", "--t", "256", "--regret", "-o", "c.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("c.json")).unwrap()).unwrap();
    assert_eq!(doc["version"], 1);
    assert_eq!(doc["t"], 256);
    assert_eq!(doc["perPlayer"].as_array().unwrap().len(), 2);
    assert!(doc["ceGap"].as_f64().unwrap() >= doc["cceGap"].as_f64().unwrap());
    assert_eq!(doc["regTable"]["entries"].as_array().unwrap().len(), 8);

    let out = cli(d, &["eval", "--artifact", "a.bin", "--game", "g.json", "--t", "9999"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("out of range"));
}

#[test]
fn eval_of_zero_reward_game() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let game = MarkovGame::from_parts(2, 1, &[2, 2], 0, vec![1.0; 4], vec![0.0; 16]).unwrap();
    std::fs::write(d.join("z.json"), game.to_json()).unwrap();
    assert!(cli(d, &["run", "--game", "z.json", "--T", "16", "-o", "z.bin"]).status.success());
    let out = cli(d, &["eval", "--artifact", "z.bin", "--game", "z.json"]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["ceGap"].as_f64(), Some(0.0));
}

#[test]
fn eval_exact_single_step() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "g.json", &["--n", "2", "--H", "1", "--S", "1", "--A", "3,2", "--seed", "3"]);
    assert!(cli(d, &["run", "--game", "g.json", "--T", "64", "-o", "a.bin"]).status.success());
    let out = cli(d, &["eval", "--artifact", "a.bin", "--game", "g.json", "--exact-h1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(doc["exactH1"]["discrepancy"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn thinned_artifact_is_rejected_by_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "g.json", &["--n", "2", "--H", "2", "--S", "2", "--A", "2,2"]);
    assert!(cli(d, &["run", "--game", "g.json", "--T", "20", "--thin", "4", "-o", "a.bin"]).status.success());
    let out = cli(d, &["eval", "--artifact", "a.bin", "--game", "g.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn step_size_warning_does_not_stop_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "g.json", &["--n", "2", "--H", "2", "--S", "2", "--A", "2,2"]);
    let out = cli(d, &["run", "--game", "g.json", "--T", "8", "--eta", "0.5", "-o", "a.bin"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("η ≥ 1/(28·A_max)"));
}

#[test]
fn q_variant_memory_guard() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "g.json", &["--n", "4", "--H", "1", "--S", "1", "--A", "5,5,5,5"]);
    let out = cli(d, &["run", "--game", "g.json", "--T", "4", "--variant", "q", "-o", "a.bin"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("memory budget"));
}

#[test]
fn bench_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "g.json", &["--n", "2", "--H", "2", "--S", "2", "--A", "2,2", "--seed", "1"]);
    let out = cli(d, &["bench", "--game", "g.json", "--t-min", "64", "--t-max", "4096"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,ceGap,cceGap,boundTheorem2"));
    let rows: Vec<Vec<f64>> = lines
        .clone()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.iter().map(|r| r[0] as usize).collect::<Vec<_>>(), vec![64, 128, 256, 512, 1024, 2048, 4096]);
    assert!(rows.iter().all(|r| r[1] <= r[3]));
    assert!(text.lines().last().unwrap().starts_with("# fit slope="));

    let out = cli(d, &["bench", "--game", "g.json", "--grid", "64,128,256", "--format", "json"]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["version"], 1);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn bench_rejects_bad_grids() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen(d, "g.json", &["--n", "2", "--H", "2", "--S", "2", "--A", "2,2"]);
    let out = cli(d, &["bench", "--game", "g.json", "--t-min", "100", "--t-max", "50"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("empty grid"));
    let out = cli(d, &["bench", "--game", "g.json", "--grid", "128,64,256"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(dir.path(), &["run", "--bogus"]).status.code(), Some(2));
}
