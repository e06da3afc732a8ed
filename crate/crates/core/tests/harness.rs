use std::fs;

use acemappo::checkpoint::PolicyCheckpoint;
use acemappo::config::{BaseOpponent, TrainConfig};
use acemappo::harness::{export_header, export_trajectories, round_robin, train, PolicySpec, Trainer};
use acemappo::Error;

fn tiny(total: usize) -> TrainConfig {
    let mut cfg = TrainConfig { total_episodes: total, seed: 7, ..Default::default() };
    cfg.sim.extent_ns = 50_000.0;
    cfg.sim.extent_ew = 50_000.0;
    cfg.env.scenario.team_size = 1;
    cfg.net.actor_hidden = vec![16];
    cfg.net.critic_hidden = vec![16];
    cfg.evo.population = 3;
    cfg.evo.eval_rounds = 2;
    cfg.evo.period = 5;
    cfg.curriculum.winrate_episodes = 4;
    cfg.curriculum.base_opponent = BaseOpponent::Random;
    cfg
}

#[test]
fn zero_episodes_writes_only_the_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let summary = train(tiny(0), Some(dir.path())).unwrap();
    assert!(summary.metrics.is_empty());
    assert!(dir.path().join("checkpoints/policy_000000.json").exists());
    let init = PolicyCheckpoint::load(dir.path().join("checkpoints/policy_000000.json")).unwrap();
    let last = PolicyCheckpoint::load(summary.final_checkpoint.unwrap()).unwrap();
    assert_eq!(init.policy, last.policy);
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.lines().count() <= 1);
}

#[test]
fn population_phase_runs_every_period() {
    let mut cfg = tiny(20);
    cfg.evo.period = 5;
    let summary = train(cfg, None).unwrap();
    assert_eq!(summary.metrics.len(), 20);
    assert_eq!(summary.evolution_phases, 4);
    let flagged: Vec<usize> = summary.metrics.iter().filter(|m| m.evolution).map(|m| m.episode).collect();
    assert_eq!(flagged, vec![5, 10, 15, 20]);
    let injected = summary.metrics.iter().filter(|m| m.injected == Some(true)).count();
    assert_eq!(injected, summary.injections);
    for m in &summary.metrics {
        assert!((0.0..=1.0).contains(&m.rolling_win_rate));
        assert!(m.pool_size <= 50);
    }
}

#[test]
fn metrics_log_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    train(tiny(12), Some(a.path())).unwrap();
    let mut cfg = tiny(12);
    cfg.workers = 2;
    train(cfg, Some(b.path())).unwrap();
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("metrics.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let full = train(tiny(12), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut first = Trainer::new(tiny(12), Some(dir.path())).unwrap();
    first.stop_at = Some(7);
    first.save_state = true;
    let head = first.run().unwrap();
    assert_eq!(head.metrics.len(), 7);
    let rest = Trainer::resume(tiny(12), &dir.path().join("state.json"), Some(dir.path())).unwrap().run().unwrap();
    let joined: Vec<_> = head.metrics.into_iter().chain(rest.metrics).collect();
    assert_eq!(joined, full.metrics);
    let csv = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn ablations_disable_their_component() {
    let mut cfg = tiny(10);
    cfg.ablation.disable_g_update = true;
    cfg.ablation.disable_curriculum = true;
    cfg.ablation.disable_ptr = true;
    let s = train(cfg, None).unwrap();
    assert_eq!(s.injections, 0);
    assert!(s.metrics.iter().all(|m| m.opponent == "rule"));
    assert!(s.metrics.iter().all(|m| m.weight_min == 1.0 && m.weight_max == 1.0));
    assert!(s.metrics.iter().all(|m| m.elite_fitness.is_none()));
}

#[test]
fn export_writes_one_row_per_step_plus_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let files = export_trajectories(&PolicySpec::Rule, &PolicySpec::Random, 2, dir.path(), 3).unwrap();
    assert_eq!(files.len(), 2);
    let header = export_header(4, 16);
    for f in files {
        let mut r = csv::Reader::from_path(&f).unwrap();
        let h: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(h, header);
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        let last_step: usize = rows.last().unwrap()[0].parse().unwrap();
        assert_eq!(rows.len(), last_step + 1);
        assert!(rows.iter().all(|row| row.len() == header.len()));
        assert!(last_step <= 900);
    }
}

#[test]
fn export_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    export_trajectories(&PolicySpec::Random, &PolicySpec::Random, 1, a.path(), 11).unwrap();
    export_trajectories(&PolicySpec::Random, &PolicySpec::Random, 1, b.path(), 11).unwrap();
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("episode_0000.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn round_robin_accounts_for_every_game() {
    let specs = [PolicySpec::Rule, PolicySpec::Straight, PolicySpec::Random];
    let rr = round_robin(&specs, 6, 1).unwrap();
    assert_eq!(rr.labels.len(), 3);
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                assert_eq!(rr.wins[a][b] + rr.wins[b][a] + rr.draws[a][b], 6);
                assert_eq!(rr.draws[a][b], rr.draws[b][a]);
            }
            assert!((0.0..=1.0).contains(&rr.win_rate(a, b)));
        }
    }
    assert!(rr.win_rate(0, 1) > 0.9);
    let mut out = Vec::new();
    rr.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("policy,"));
}

#[test]
fn round_robin_skips_unreadable_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("missing.json");
    let specs = [PolicySpec::Rule, PolicySpec::Random, PolicySpec::Checkpoint(bad.clone())];
    let rr = round_robin(&specs, 2, 0).unwrap();
    assert_eq!(rr.labels.len(), 2);
    assert_eq!(rr.skipped.len(), 1);
    assert_eq!(rr.skipped[0].0, bad);
    assert!(matches!(round_robin(&specs[..1], 2, 0), Err(Error::InvalidArgument(_))));
    assert!(round_robin(&specs, 0, 0).is_err());
}
