//! End-to-end runs of the `robust-mm` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_robust-mm");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("ROBUST_MM_OUTPUT").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    let text = format!(
        "version = 1\nname = \"{name}\"\nseed = 5\n\
         [train]\npretrain_episodes = 50\ntrain_episodes = 400\ncheckpoint_every = 200\ncheckpoint_eval_episodes = 20\n\
         [eval]\nepisodes = 200\n{body}"
    );
    fs::write(&path, text).unwrap();
    path
}

fn train(cfg: &Path, out: &Path) -> Output {
    let o = run(&["train", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    o
}

fn strategic_run(dir: &Path) -> PathBuf {
    let cfg = config(dir, "ra", "[adversary]\nkind = \"strategic\"\n[reward]\nzeta = 0.01\n");
    let out = dir.join("ra");
    train(&cfg, &out);
    out
}

#[test]
fn train_writes_checkpoints_log_and_final_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out = strategic_run(dir.path());
    let ckpts = fs::read_dir(out.join("checkpoints")).unwrap().count();
    assert!(ckpts >= 1);
    let log = fs::read_to_string(out.join("training_log.csv")).unwrap();
    assert!(log.lines().count() >= 2, "{log}");
    for f in ["checkpoint.json", "market_maker.json", "adversary.json"] {
        assert!(out.join("final").join(f).is_file(), "{f}");
    }
    assert!(out.join("evaluation.csv").is_file());
}

#[test]
fn same_config_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "rn", "");
    train(&cfg, &dir.path().join("a"));
    train(&cfg, &dir.path().join("b"));
    let read = |d: &str, f: &str| fs::read(dir.path().join(d).join(f)).unwrap();
    for f in ["final/checkpoint.json", "training_log.csv", "evaluation.csv"] {
        assert_eq!(read("a", f), read("b", f), "{f}");
    }
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "rn", "[adversary]\nkind = \"random\"\n");
    let first = dir.path().join("first");
    train(&cfg, &first);
    let resolved = first.join("config.resolved.toml");
    let text = fs::read_to_string(&resolved).unwrap();
    assert!(text.contains("lr_critic") && text.contains("seed = 5"), "{text}");
    let second = dir.path().join("second");
    train(&resolved, &second);
    let read = |d: &Path| fs::read(d.join("final/checkpoint.json")).unwrap();
    assert_eq!(read(&first), read(&second));
}

#[test]
fn both_risk_terms_can_be_set_together() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "both", "[reward]\neta = 1.0\nzeta = 0.01\n");
    train(&cfg, &dir.path().join("both"));
}

#[test]
fn evaluate_fills_one_row_per_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = strategic_run(dir.path());
    let ckpt = out.join("final/checkpoint.json");
    let csv = dir.path().join("table.csv");
    let o = run(&[
        "evaluate",
        ckpt.to_str().unwrap(),
        "--regime",
        "fixed",
        "--regime",
        "random",
        "--regime",
        "strategic",
        "--episodes",
        "100",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    // Header plus one line per (checkpoint, regime) cell.
    assert_eq!(text.lines().count(), 4, "{text}");
    for r in ["fixed", "random", "strategic"] {
        assert!(stdout(&o).contains(r));
    }
}

#[test]
fn budget_zero_audit_is_vacuous() {
    let dir = tempfile::tempdir().unwrap();
    let out = strategic_run(dir.path());
    let ckpt = out.join("final/checkpoint.json");
    let o = run(&["audit", ckpt.to_str().unwrap(), "--budget", "0", "--episodes", "50"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).to_lowercase().contains("approximate"), "{}", stdout(&o));
}

#[test]
fn export_surface_writes_both_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = strategic_run(dir.path());
    let ckpt = out.join("final/checkpoint.json");
    let surf = dir.path().join("surface");
    let o = run(&[
        "export-surface",
        ckpt.to_str().unwrap(),
        "--out",
        surf.to_str().unwrap(),
        "--t-points",
        "3",
        "--h-points",
        "5",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mm = fs::read_to_string(surf.join("mm_surface.csv")).unwrap();
    assert_eq!(mm.lines().count(), 1 + 3 * 5);
    assert!(surf.join("adversary_surface.csv").is_file());
}

#[test]
fn solve_stage_reports_and_flags() {
    let o = run(&["solve-stage"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["solve-stage", "--h", "0"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("continuum"), "{}", stdout(&o));
}

#[test]
fn infeasible_stage_game_exits_4() {
    let o = run(&["solve-stage", "--b-range", "-5", "5"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn bad_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "version = 1\nname = \"x\"\nseed = 1\n[train]\nlr_polcy = 0.1\n").unwrap();
    let o = run(&["train", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("lr_polcy"), "{}", stderr(&o));

    let missing = dir.path().join("nope.json");
    assert_eq!(code(&run(&["evaluate", missing.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["--workers", "0", "solve-stage"])), 2);
}

#[test]
fn zero_episodes_and_mismatched_pairs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let ra = strategic_run(dir.path());
    let ra_ckpt = ra.join("final/checkpoint.json");
    assert_eq!(code(&run(&["evaluate", ra_ckpt.to_str().unwrap(), "--episodes", "0"])), 2);

    let rn_cfg = config(dir.path(), "rn", "");
    let rn = dir.path().join("rn");
    train(&rn_cfg, &rn);
    let rn_ckpt = rn.join("final/checkpoint.json");
    // Different reward parameters: the pair cannot be formed.
    let o = run(&["audit", rn_ckpt.to_str().unwrap(), "--adversary", ra_ckpt.to_str().unwrap(), "--budget", "0"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    // A fixed-regime checkpoint has no strategic adversary to audit.
    assert_eq!(code(&run(&["audit", rn_ckpt.to_str().unwrap(), "--budget", "0"])), 2);
}
