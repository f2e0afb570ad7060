use std::path::Path;
use std::process::{Command, Output};

use gpc_core::envs::{Env, EnvKind, EnvState};

const SMALL: &str = "env = \"pendulum\"\nnum_envs = 4\nepochs = 2\neval_samples = 16\neval_episode_len = 1.0\n";

fn gpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpc"))
        .args(args)
        .output()
        .expect("spawn gpc")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn train_small(dir: &Path, seed: &str) -> serde_json::Value {
    let cfg = write_config(dir, SMALL);
    let out = dir.join("out");
    let o = gpc(&["train", "--config", &cfg, "--out", path(&out), "--seed", seed]);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_str(&std::fs::read_to_string(out.join("checkpoint.json")).unwrap()).unwrap()
}

#[test]
fn train_writes_one_curve_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_small(dir.path(), "3");
    assert!(ckpt["content_hash"].as_str().unwrap().len() == 64);
    let (header, rows) = read_csv(&dir.path().join("out/training_curves.csv"));
    assert_eq!(header[..4], ["iteration", "mean_cost", "fit_loss", "policy_best_fraction"]);
    assert_eq!(rows.len(), 10);
    let resolved = std::fs::read_to_string(dir.path().join("out/resolved_config.toml")).unwrap();
    assert!(resolved.contains("num_iterations = 10"));
}

#[test]
fn same_seed_gives_the_same_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ha = train_small(a.path(), "5")["content_hash"].clone();
    let hb = train_small(b.path(), "5")["content_hash"].clone();
    assert_eq!(ha, hb);
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "env = \"pendulum\"\nnum_enviroments = 3\n");
    let o = gpc(&["train", "--config", &cfg, "--out", path(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("num_enviroments"), "{}", stderr(&o));
    assert!(!dir.path().join("out/checkpoint.json").exists());
}

#[test]
fn spc_eval_needs_no_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = gpc(&["eval", "--config", &cfg, "--mode", "spc", "--episodes", "100", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.join("eval_report.csv"));
    assert_eq!(header, ["episode", "mode", "alpha", "cost_per_step", "success", "roughness"]);
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| r[1] == "spc"));
}

#[test]
fn policy_modes_without_a_checkpoint_fail() {
    let dir = tempfile::tempdir().unwrap();
    let o = gpc(&["eval", "--env", "pendulum", "--mode", "gpc", "--out", path(dir.path())]);
    assert!(!o.status.success());
}

#[test]
fn alpha_outside_the_unit_interval_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for alpha in ["1.5", "-0.1"] {
        let o = gpc(&["eval", "--env", "pendulum", "--mode", "spc", "--alpha", alpha, "--out", path(dir.path())]);
        assert_eq!(o.status.code(), Some(2), "alpha {alpha}");
        assert!(stderr(&o).contains("alpha"));
    }
}

#[test]
fn rollout_replays_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = gpc(&["rollout", "--config", &cfg, "--mode", "spc", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.join("trajectory.csv"));
    assert_eq!(rows.len(), 200);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (q, v, u) = (col("q0"), col("v0"), col("u0"));
    let env = Env::new(EnvKind::Pendulum);
    let num = |r: &Vec<String>, i: usize| r[i].parse::<f64>().unwrap();
    for k in 0..rows.len() - 1 {
        let s = EnvState::new(&[num(&rows[k], q)], &[num(&rows[k], v)]);
        let next = env.step(&env.nominal, &s, &[num(&rows[k], u)]).unwrap();
        assert!((next.q[0] - num(&rows[k + 1], q)).abs() < 1e-9, "row {k}");
        assert!((next.v[0] - num(&rows[k + 1], v)).abs() < 1e-9, "row {k}");
    }
}

#[test]
fn bench_reports_latency_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = gpc(&["bench", "--config", &cfg, "--steps", "20", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.join("bench.csv"));
    for h in ["mode", "mean_ms", "p95_ms"] {
        assert!(header.iter().any(|x| x == h), "missing {h}");
    }
    assert_eq!(rows.len(), 3);
    let (mean, p95) = (header.iter().position(|h| h == "mean_ms").unwrap(), header.iter().position(|h| h == "p95_ms").unwrap());
    for r in &rows {
        let (m, p): (f64, f64) = (r[mean].parse().unwrap(), r[p95].parse().unwrap());
        assert!(m > 0.0 && p > 0.0);
    }
}

#[test]
fn trained_checkpoint_evaluates_in_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    train_small(dir.path(), "1");
    let ckpt = dir.path().join("out/checkpoint.json");
    for mode in ["gpc", "gpc+", "spc"] {
        let out = dir.path().join(format!("eval-{mode}"));
        let o = gpc(&["eval", "--checkpoint", path(&ckpt), "--mode", mode, "--episodes", "3", "--out", path(&out)]);
        assert!(o.status.success(), "{mode}: {}", stderr(&o));
        assert_eq!(read_csv(&out.join("eval_report.csv")).1.len(), 3);
    }
    let o = gpc(&["eval", "--checkpoint", path(&ckpt), "--env", "cartpole", "--out", path(dir.path())]);
    assert!(!o.status.success());
}
