use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn acemappo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acemappo")).args(args).output().unwrap()
}

fn last_json(bytes: &[u8]) -> serde_json::Value {
    let text = String::from_utf8_lossy(bytes);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    last_json(&out.stdout)
}

fn stderr_json(out: &Output) -> serde_json::Value {
    last_json(&out.stderr)
}

fn tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    fs::write(
        &path,
        "total_episodes = 4\n\
         [sim]\nextent_ns = 50000.0\nextent_ew = 50000.0\n\
         [env.scenario]\nteam_size = 1\n\
         [net]\nactor_hidden = [8]\ncritic_hidden = [8]\n\
         [evo]\npopulation = 2\neval_rounds = 1\nperiod = 2\n\
         [curriculum]\nwinrate_episodes = 2\nbase_opponent = \"random\"\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn train_eval_export_round_robin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let run = dir.path().join("run");
    let out = acemappo(&["train", "--config", &cfg, "--seed", "3", "--out", run.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["episodes"], 4);
    assert_eq!(summary["evolution_phases"], 2);
    let ckpt = run.join("checkpoints/policy_final.json");
    assert!(ckpt.exists());
    assert_eq!(fs::read_to_string(run.join("metrics.csv")).unwrap().lines().count(), 5);

    let out = acemappo(&["eval", "--blue", ckpt.to_str().unwrap(), "--red", "random", "--episodes", "3"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let total = v["blue_wins"].as_u64().unwrap() + v["red_wins"].as_u64().unwrap() + v["draws"].as_u64().unwrap();
    assert_eq!(total, 3);

    let traces = dir.path().join("traces");
    let out = acemappo(&[
        "export", "--blue", ckpt.to_str().unwrap(), "--red", "rule", "--out", traces.to_str().unwrap(),
        "--episodes", "2",
    ]);
    assert!(out.status.success());
    assert!(traces.join("episode_0001.csv").exists());

    let matrix = dir.path().join("rr.csv");
    let list = format!("{},rule,random", ckpt.display());
    let out = acemappo(&["round-robin", "--ckpts", &list, "--episodes", "2", "--out", matrix.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(matrix).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("policy,policy_final,rule,random"));
}

#[test]
fn same_seed_gives_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let mut logs = Vec::new();
    for name in ["a", "b"] {
        let run = dir.path().join(name);
        let out = acemappo(&["train", "--config", &cfg, "--seed", "9", "--out", run.to_str().unwrap()]);
        assert!(out.status.success());
        logs.push(fs::read(run.join("metrics.csv")).unwrap());
    }
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn ablation_flags_are_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let run = dir.path().join("ablated");
    let out = acemappo(&[
        "train", "--config", &cfg, "--seed", "1", "--out", run.to_str().unwrap(), "--ablate", "g_update",
        "--ablate", "curriculum",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["injections"], 0);
    let saved = fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(saved.contains("disable_g_update = true"));
    assert!(saved.contains("disable_curriculum = true"));
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert!(metrics.lines().skip(1).all(|l| l.split(',').nth(1) == Some("rule")));
}

#[test]
fn errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = acemappo(&["eval", "--blue", missing.to_str().unwrap(), "--red", "rule", "--episodes", "1"]);
    assert!(!out.status.success());
    let v = stderr_json(&out);
    assert_eq!(v["error"], "checkpoint");
    assert!(v["message"].is_string());

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "total_episodes = \"many\"\n").unwrap();
    let out = acemappo(&["train", "--config", bad.to_str().unwrap(), "--seed", "0"]);
    assert!(!out.status.success());
    assert_eq!(stderr_json(&out)["error"], "config_parse");

    let out = acemappo(&["eval", "--blue", "rule", "--red", "rule", "--episodes", "0"]);
    assert!(!out.status.success());
    assert_eq!(stderr_json(&out)["error"], "invalid_argument");

    let out = acemappo(&["train", "--config", "x.toml", "--seed", "0", "--ablate", "everything"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");

    assert!(acemappo(&["--help"]).status.success());
}
