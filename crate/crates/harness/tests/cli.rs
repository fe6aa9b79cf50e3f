use std::path::Path;
use std::process::{Command, Output};

use platoon_harness::export::{self, EpisodeRow};
use platoon_harness::runs::{EvalRow, SweepRow};

const TINY: &str = "flow_scale = 0.25\nduration = 90.0\ncalibration_episodes = 1\nepisodes = 1\n";

fn platoon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platoon")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = platoon(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_then_evaluate_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--seed", "4", "--condition", "1", "--out", s(&run)]);
    let rows: Vec<EpisodeRow> = export::read_csv(&run.join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].condition, rows[0].steps), (1, 90));
    assert!(run.join("agents.ckpt").is_file());
    assert!(run.join("calibration.csv").is_file());
    assert_eq!(platoon_harness::config::load(&run.join("config.toml")).unwrap().seed, 4);

    let ckpt = run.join("agents.ckpt");
    let eval = dir.path().join("eval");
    let out = ok(&["eval", "--config", s(&cfg), "--seed", "4", "--checkpoint", s(&ckpt), "--policy", "coor-plt,fp,rc", "--episodes", "2", "--out", s(&eval)]);
    let table: Vec<EvalRow> = export::read_csv(&eval.join("eval.csv")).unwrap();
    assert_eq!(table.len(), 3);
    assert!(table.iter().all(|r| r.episodes == 2 && r.safety_violations == 0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 4);
    let episodes: Vec<EpisodeRow> = export::read_csv(&eval.join("episodes.csv")).unwrap();
    assert_eq!(episodes.len(), 6);

    let trace = dir.path().join("trace.jsonl");
    ok(&["replay", "--config", s(&cfg), "--checkpoint", s(&ckpt), "--policy", "coor-plt", "--index", "1", "--out", s(&trace)]);
    let lines: Vec<serde_json::Value> =
        std::fs::read_to_string(&trace).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 90);
    assert_eq!(lines[89]["step"], 90);
}

#[test]
fn baselines_need_no_checkpoint_but_learned_policies_do() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let eval = dir.path().join("eval");
    ok(&["eval", "--config", s(&cfg), "--policy", "webster", "--episodes", "1", "--out", s(&eval)]);
    let table: Vec<EvalRow> = export::read_csv(&eval.join("eval.csv")).unwrap();
    assert_eq!(table.len(), 1);

    let out = platoon(&["eval", "--config", s(&cfg), "--policy", "coor-plt", "--episodes", "1", "--out", s(&eval)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing checkpoint"));
}

#[test]
fn sweep_writes_one_row_per_granularity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("sweep");
    ok(&["sweep-granularity", "--config", s(&cfg), "--granularities", "6,24", "--out", s(&out)]);
    let rows: Vec<SweepRow> = export::read_csv(&out.join("sweep.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.granularity).collect::<Vec<_>>(), [6, 24]);
    assert!(out.join("g24").join("agents.ckpt").is_file());
}

#[test]
fn bad_arguments_fail_cleanly() {
    assert!(!platoon(&["train", "--condition", "4"]).status.success());
    assert!(!platoon(&["eval", "--policy", "sumo"]).status.success());
    let out = platoon(&["train", "--policy", "webster", "--out", "/nonexistent/never"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothing to train"));
}
