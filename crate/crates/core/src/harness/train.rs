use std::collections::VecDeque;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checkpoint::{read_envelope, write_envelope, PolicyCheckpoint};
use crate::config::TrainConfig;
use crate::curriculum::{base_policy, update_center, CurriculumState, OpponentPool, RulePolicy};
use crate::env::{AirCombatEnv, Outcome};
use crate::error::{Error, Result};
use crate::evo::{evaluate_fitness, generate_offspring, select_and_inject, EvaluatedIndividual, InjectionReport};
use crate::mappo::{compute_gae, td_errors, update_step, Learner, TrainingBatch, UpdateMetrics};
use crate::net::{CriticParams, PolicyParams};
use crate::replay::{anneal_beta, compute_priority, importance_weight, normalize_weights, ReplayBuffer, Source, TrackTargets};
use crate::rng::{self, tag};
use crate::rollout::{evaluate_winrate, run_episode, Episode, NetPolicy, Policy};

const ROLLING_WINDOW: usize = 100;

/// One line of the metrics log, written after every training episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub opponent: String,
    pub opponent_difficulty: Option<f64>,
    pub outcome: String,
    pub score: f64,
    pub team_reward: f64,
    pub discounted_return: f64,
    pub length: usize,
    pub rolling_win_rate: f64,
    pub rolling_reward: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub samples: usize,
    pub weight_min: f64,
    pub weight_max: f64,
    pub beta: f64,
    pub buffer_size: usize,
    pub mu: f64,
    pub stage: u64,
    pub pool_size: usize,
    pub evolution: bool,
    pub main_fitness: Option<f64>,
    pub elite_fitness: Option<f64>,
    pub injected: Option<bool>,
    pub tau: Option<f64>,
    pub rule_win_rate: Option<f64>,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub episode: usize,
    pub learner: Learner,
    pub replay: ReplayBuffer,
    pub pool: OpponentPool,
    pub curriculum: CurriculumState,
    pub recent_scores: VecDeque<f64>,
    pub recent_rewards: VecDeque<f64>,
    pub evolution_phases: usize,
    pub injections: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub metrics: Vec<MetricsRow>,
    pub final_checkpoint: Option<PathBuf>,
    pub evolution_phases: usize,
    pub injections: usize,
}

struct RunFiles {
    dir: PathBuf,
    metrics: csv::Writer<File>,
    events: BufWriter<File>,
}

impl RunFiles {
    fn open(dir: &Path, append: bool) -> Result<Self> {
        fs::create_dir_all(dir.join("checkpoints"))?;
        let open = |name: &str| -> Result<File> {
            Ok(OpenOptions::new().create(true).write(true).append(append).truncate(!append).open(dir.join(name))?)
        };
        let metrics_file = open("metrics.csv")?;
        let write_header = !append || metrics_file.metadata()?.len() == 0;
        let metrics = csv::WriterBuilder::new().has_headers(write_header).from_writer(metrics_file);
        Ok(Self { dir: dir.to_path_buf(), metrics, events: BufWriter::new(open("events.jsonl")?) })
    }
}

/// Runs the full training loop; see [`Trainer`].
pub fn train(cfg: TrainConfig, out_dir: Option<&Path>) -> Result<RunSummary> {
    Trainer::new(cfg, out_dir)?.run()
}

/// The training loop: per episode an opponent draw, a rollout, a periodic
/// population phase with curriculum bookkeeping, replay insertion and one
/// clipped policy-gradient update.
pub struct Trainer {
    cfg: TrainConfig,
    env: AirCombatEnv,
    state: TrainerState,
    files: Option<RunFiles>,
    pub save_state: bool,
    /// Stop after this episode instead of `total_episodes`; schedules still use the total.
    pub stop_at: Option<usize>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, out_dir: Option<&Path>) -> Result<Self> {
        cfg.validate()?;
        let env = AirCombatEnv::new(cfg.sim.clone(), cfg.env.clone())?;
        let mut init = rng::stream(cfg.seed, &[tag::INIT]);
        let policy = PolicyParams::new(&cfg.net.actor_hidden, cfg.net.policy_head_gain, &mut init);
        let critic = CriticParams::new(env.global_state_dim(), &cfg.net.critic_hidden, &mut init);
        let base = base_policy(&cfg.curriculum);
        let base_difficulty = evaluate_winrate(
            &env,
            base.as_ref(),
            base.as_ref(),
            cfg.curriculum.winrate_episodes,
            rng::derive_seed(cfg.seed, &[tag::RULE_EVAL, 0]),
        )?
        .blue_score();
        let state = TrainerState {
            episode: 0,
            learner: Learner::new(policy, critic, &cfg.net),
            replay: ReplayBuffer::from_config(&cfg.replay)?,
            pool: OpponentPool::new(base_difficulty),
            curriculum: CurriculumState::new(&cfg.curriculum),
            recent_scores: VecDeque::new(),
            recent_rewards: VecDeque::new(),
            evolution_phases: 0,
            injections: 0,
        };
        let files = out_dir.map(|d| RunFiles::open(d, false)).transpose()?;
        let mut trainer = Self { cfg, env, state, files, save_state: false, stop_at: None };
        if let Some(f) = trainer.files.as_mut() {
            fs::write(f.dir.join("config.toml"), trainer.cfg.to_toml_string())?;
        }
        trainer.event(json!({"episode": 0, "event": "start", "base_difficulty": base_difficulty}))?;
        Ok(trainer)
    }

    /// Continues from a saved state; metrics and events are appended.
    pub fn resume(cfg: TrainConfig, state_path: &Path, out_dir: Option<&Path>) -> Result<Self> {
        cfg.validate()?;
        let env = AirCombatEnv::new(cfg.sim.clone(), cfg.env.clone())?;
        let state: TrainerState = read_envelope(state_path, "trainer")?;
        let files = out_dir.map(|d| RunFiles::open(d, true)).transpose()?;
        Ok(Self { cfg, env, state, files, save_state: false, stop_at: None })
    }

    pub fn state(&self) -> &TrainerState {
        &self.state
    }

    pub fn env(&self) -> &AirCombatEnv {
        &self.env
    }

    pub fn save_state_to(&self, path: &Path) -> Result<()> {
        write_envelope(path, "trainer", &self.state)
    }

    /// Runs the remaining episodes up to `total_episodes`.
    pub fn run(mut self) -> Result<RunSummary> {
        let pool = if self.cfg.workers > 0 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(self.cfg.workers)
                    .build()
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?,
            )
        } else {
            None
        };
        match pool {
            Some(p) => p.install(|| self.run_inner()),
            None => self.run_inner(),
        }
    }

    fn run_inner(&mut self) -> Result<RunSummary> {
        if self.state.episode == 0 {
            self.checkpoint("policy_000000.json")?;
        }
        let mut metrics = Vec::new();
        let last = self.stop_at.map_or(self.cfg.total_episodes, |s| s.min(self.cfg.total_episodes));
        while self.state.episode < last {
            let e = self.state.episode + 1;
            match self.episode(e) {
                Ok(row) => {
                    if let Some(f) = self.files.as_mut() {
                        f.metrics.serialize(&row)?;
                        f.metrics.flush()?;
                    }
                    metrics.push(row);
                    self.state.episode = e;
                    if self.cfg.checkpoint_every > 0 && e.is_multiple_of(self.cfg.checkpoint_every) {
                        self.checkpoint(&format!("policy_{e:06}.json"))?;
                    }
                }
                Err(err) => {
                    let _ = self.checkpoint(&format!("policy_abort_{e:06}.json"));
                    let _ = self.event(json!({"episode": e, "event": "abort", "error": err.to_string()}));
                    if let Some(f) = self.files.as_ref() {
                        let _ = self.save_state_to(&f.dir.join("state_abort.json"));
                    }
                    return Err(Error::TrainingAborted { episode: e, source: Box::new(err) });
                }
            }
        }
        let final_checkpoint = self.checkpoint("policy_final.json")?;
        if self.save_state {
            if let Some(f) = self.files.as_ref() {
                self.save_state_to(&f.dir.join("state.json"))?;
            }
        }
        if let Some(f) = self.files.as_mut() {
            f.events.flush()?;
        }
        Ok(RunSummary {
            metrics,
            final_checkpoint,
            evolution_phases: self.state.evolution_phases,
            injections: self.state.injections,
        })
    }

    fn event(&mut self, value: serde_json::Value) -> Result<()> {
        if let Some(f) = self.files.as_mut() {
            writeln!(f.events, "{value}")?;
        }
        Ok(())
    }

    fn policy_checkpoint(&self, params: &PolicyParams, label: String) -> PolicyCheckpoint {
        PolicyCheckpoint {
            label,
            episode: self.state.episode,
            seed: self.cfg.seed,
            policy: params.clone(),
            critic: Some(self.state.learner.critic.clone()),
            sim: self.cfg.sim.clone(),
            env: self.cfg.env.clone(),
        }
    }

    fn checkpoint(&mut self, name: &str) -> Result<Option<PathBuf>> {
        let Some(dir) = self.files.as_ref().map(|f| f.dir.join("checkpoints")) else { return Ok(None) };
        let path = dir.join(name);
        self.policy_checkpoint(&self.state.learner.policy, name.trim_end_matches(".json").to_string()).save(&path)?;
        self.event(json!({"episode": self.state.episode, "event": "checkpoint", "path": path}))?;
        Ok(Some(path))
    }

    fn write_pool_manifest(&mut self) -> Result<()> {
        let Some(dir) = self.files.as_ref().map(|f| f.dir.join("pool")) else { return Ok(()) };
        fs::create_dir_all(&dir)?;
        let mut entries = Vec::new();
        for entry in self.state.pool.entries() {
            let path = match &entry.kind {
                crate::curriculum::OpponentKind::Base => None,
                crate::curriculum::OpponentKind::Snapshot { params } => {
                    let path = dir.join(format!("opponent_{:04}.json", entry.id));
                    if !path.exists() {
                        self.policy_checkpoint(params, format!("opponent-{}", entry.id)).save(&path)?;
                    }
                    Some(path)
                }
            };
            entries.push(json!({
                "id": entry.id,
                "difficulty": entry.difficulty,
                "admitted_episode": entry.admitted_episode,
                "base": entry.is_base(),
                "checkpoint": path,
            }));
        }
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&entries)?)?;
        Ok(())
    }

    fn episode(&mut self, e: usize) -> Result<MetricsRow> {
        let seed = self.cfg.seed;
        let ablation = self.cfg.ablation;

        let (opponent, opponent_label, opponent_difficulty): (Box<dyn Policy>, String, Option<f64>) =
            if ablation.disable_curriculum {
                (Box::new(RulePolicy::new(self.cfg.curriculum.rule.clone())), "rule".into(), None)
            } else {
                let idx = self
                    .state
                    .pool
                    .sample_opponent(&self.state.curriculum, &mut rng::stream(seed, &[tag::OPPONENT, e as u64]))?;
                let entry = &self.state.pool.entries()[idx];
                let label = if entry.is_base() { entry.policy(&self.cfg.curriculum).label() } else { format!("pool-{}", entry.id) };
                (entry.policy(&self.cfg.curriculum), label, Some(entry.difficulty))
            };

        let learner_policy = NetPolicy::new(self.state.learner.policy.clone(), "learner");
        let fresh: Vec<Episode> = (0..self.cfg.mappo.rollout_episodes as u64)
            .into_par_iter()
            .map(|j| run_episode(&self.env, &learner_policy, opponent.as_ref(), rng::derive_seed(seed, &[tag::EPISODE, e as u64, j])))
            .collect::<Result<_>>()?;

        let mut evolution: Option<(InjectionReport, f64)> = None;
        let mut elite_episodes: Vec<Episode> = Vec::new();
        if e.is_multiple_of(self.cfg.evo.period) {
            if !ablation.disable_g_update {
                let (report, episodes) = self.population_phase(e, opponent.as_ref(), &fresh)?;
                evolution = Some((report, f64::NAN));
                elite_episodes = episodes;
            }
            let rule_score = self.curriculum_phase(e)?;
            evolution = Some(match evolution {
                Some((r, _)) => (r, rule_score),
                None => (
                    InjectionReport { elite: 0, elite_fitness: f64::NAN, main_fitness: f64::NAN, tau: f64::NAN, injected: false },
                    rule_score,
                ),
            });
            self.state.evolution_phases += 1;
        }

        for ep in &fresh {
            self.store(ep.clone(), Source::Rl)?;
        }
        for ep in elite_episodes {
            self.store(ep, Source::Ea)?;
        }

        let beta = anneal_beta(e, self.cfg.total_episodes, self.cfg.replay.beta_start, self.cfg.replay.beta_end);
        let (batch, weight_min, weight_max) = self.build_batch(e, &fresh, beta)?;
        let mut update_rng = rng::stream(seed, &[tag::UPDATE, e as u64]);
        let update = if batch.is_empty() {
            UpdateMetrics::default()
        } else {
            update_step(&mut self.state.learner, &batch, &self.cfg.mappo, &self.cfg.net, &mut update_rng)?
        };

        let gamma = self.cfg.mappo.gamma;
        let score = fresh.iter().map(|ep| ep.outcome.blue_score()).sum::<f64>() / fresh.len() as f64;
        let team_reward = fresh.iter().map(Episode::total_reward).sum::<f64>() / fresh.len() as f64;
        let discounted = fresh.iter().map(|ep| ep.discounted_return(gamma)).sum::<f64>() / fresh.len() as f64;
        push_window(&mut self.state.recent_scores, score);
        push_window(&mut self.state.recent_rewards, team_reward);
        let outcome = match fresh[0].outcome {
            Outcome::BlueWin => "blue_win",
            Outcome::RedWin => "red_win",
            Outcome::Draw => "draw",
            Outcome::Ongoing => "ongoing",
        };
        let finite = |x: f64| x.is_finite().then_some(x);
        Ok(MetricsRow {
            episode: e,
            opponent: opponent_label,
            opponent_difficulty,
            outcome: outcome.into(),
            score,
            team_reward,
            discounted_return: discounted,
            length: fresh[0].length,
            rolling_win_rate: mean(&self.state.recent_scores),
            rolling_reward: mean(&self.state.recent_rewards),
            actor_loss: update.actor_loss,
            critic_loss: update.critic_loss,
            entropy: update.entropy,
            clip_fraction: update.clip_fraction,
            approx_kl: update.approx_kl,
            samples: update.samples,
            weight_min,
            weight_max,
            beta,
            buffer_size: self.state.replay.len(),
            mu: self.state.curriculum.mu,
            stage: self.state.curriculum.stage,
            pool_size: self.state.pool.len(),
            evolution: evolution.is_some(),
            main_fitness: evolution.and_then(|(r, _)| finite(r.main_fitness)),
            elite_fitness: evolution.and_then(|(r, _)| finite(r.elite_fitness)),
            injected: evolution.and_then(|(r, _)| r.tau.is_finite().then_some(r.injected)),
            tau: evolution.and_then(|(r, _)| finite(r.tau)),
            rule_win_rate: evolution.and_then(|(_, w)| finite(w)),
        })
    }

    /// Offspring generation, fitness evaluation and conditional injection.
    /// Returns the report and the elite's trajectories.
    fn population_phase(&mut self, e: usize, opponent: &dyn Policy, fresh: &[Episode]) -> Result<(InjectionReport, Vec<Episode>)> {
        let seed = self.cfg.seed;
        let evo = &self.cfg.evo;
        let obs_batch = recent_observations(fresh, &self.state.replay, evo.entropy_batch);
        let theta = self.state.learner.policy.clone();
        let (offspring, fallbacks) =
            generate_offspring(&theta, &obs_batch, evo, &mut rng::stream(seed, &[tag::EVOLUTION, e as u64]))?;
        let seeds = |j: usize| -> Vec<u64> {
            (0..evo.eval_rounds as u64).map(|m| rng::derive_seed(seed, &[tag::FITNESS, e as u64, j as u64, m])).collect()
        };
        let gamma = self.cfg.mappo.gamma;
        let mut candidates: Vec<&PolicyParams> = offspring.iter().collect();
        candidates.push(&theta);
        let mut evaluated: Vec<EvaluatedIndividual> = candidates
            .par_iter()
            .enumerate()
            .map(|(j, p)| evaluate_fitness(&self.env, p, opponent, &seeds(j), gamma))
            .collect::<Result<_>>()?;
        let main = evaluated.pop().expect("main policy evaluated");
        let progress = e as f64 / self.cfg.total_episodes.max(1) as f64;
        let (next, report) = select_and_inject(&theta, &evaluated, main.fitness, evo, progress)?;
        let failed: usize = evaluated.iter().map(|i| i.failed_rounds).sum::<usize>() + main.failed_rounds;
        self.event(json!({
            "episode": e,
            "event": "evolution",
            "fitness": evaluated.iter().map(|i| i.fitness).collect::<Vec<_>>(),
            "main_fitness": main.fitness,
            "elite": report.elite,
            "injected": report.injected,
            "tau": report.tau,
            "entropy_fallbacks": fallbacks,
            "failed_rounds": failed,
        }))?;
        if report.injected {
            self.state.learner.set_policy(next);
            self.state.injections += 1;
            self.event(json!({"episode": e, "event": "injection", "elite_fitness": report.elite_fitness, "tau": report.tau}))?;
        }
        let elite = evaluated.swap_remove(report.elite);
        Ok((report, elite.episodes))
    }

    /// Measures the learner against the base opponent, moves the curriculum
    /// center and admits/prunes pool entries. Returns the measured score.
    fn curriculum_phase(&mut self, e: usize) -> Result<f64> {
        let base = base_policy(&self.cfg.curriculum);
        let learner = NetPolicy::new(self.state.learner.policy.clone(), "learner");
        let w = evaluate_winrate(
            &self.env,
            &learner,
            base.as_ref(),
            self.cfg.curriculum.winrate_episodes,
            rng::derive_seed(self.cfg.seed, &[tag::RULE_EVAL, e as u64]),
        )?
        .blue_score();
        if self.cfg.ablation.disable_curriculum {
            return Ok(w);
        }
        if update_center(&mut self.state.curriculum, w)? {
            let (mu, stage) = (self.state.curriculum.mu, self.state.curriculum.stage);
            self.event(json!({"episode": e, "event": "center", "mu": mu, "stage": stage}))?;
        }
        let policy = self.state.learner.policy.clone();
        let report = self.state.pool.admit_and_prune(&policy, w, &self.state.curriculum, e)?;
        if let Some(id) = report.admitted {
            self.event(json!({"episode": e, "event": "admission", "id": id, "difficulty": w}))?;
        }
        if !report.pruned.is_empty() {
            self.event(json!({"episode": e, "event": "prune", "ids": report.pruned}))?;
        }
        if report.admitted.is_some() || !report.pruned.is_empty() {
            self.write_pool_manifest()?;
        }
        if report.admitted.is_some() {
            self.checkpoint(&format!("policy_admitted_{e:06}.json"))?;
        }
        Ok(w)
    }

    /// Advantages, value targets and TD errors of every track under the
    /// current critic.
    fn targets(&self, ep: &Episode) -> Result<(Vec<TrackTargets>, Vec<f64>)> {
        let m = &self.cfg.mappo;
        let critic = &self.state.learner.critic;
        let mut targets = Vec::with_capacity(ep.tracks.len());
        let mut deltas = Vec::new();
        for (i, track) in ep.tracks.iter().enumerate() {
            let rewards: Vec<f64> = ep.track_rewards(i, m.gamma).into_iter().map(|r| r / m.reward_scale).collect();
            let mut values = track.states.iter().map(|s| critic.value(s)).collect::<Result<Vec<f64>>>()?;
            values.push(0.0);
            let mut terminals = vec![false; rewards.len()];
            if let Some(last) = terminals.last_mut() {
                *last = true;
            }
            let (advantages, returns) = compute_gae(&rewards, &values, &terminals, m.gamma, m.gae_lambda)?;
            deltas.extend(td_errors(&rewards, &values, &terminals, m.gamma)?);
            targets.push(TrackTargets { advantages, returns });
        }
        Ok((targets, deltas))
    }

    fn store(&mut self, ep: Episode, source: Source) -> Result<()> {
        let (targets, deltas) = self.targets(&ep)?;
        let ret = ep.discounted_return(self.cfg.mappo.gamma);
        let priority = if self.cfg.ablation.disable_ptr {
            1.0
        } else {
            compute_priority(&deltas, ret, source, self.state.replay.stats(), &self.cfg.replay)?
        };
        self.state.replay.insert(ep, source, priority, ret, targets)?;
        Ok(())
    }

    /// Fresh trajectories at unit weight plus replayed ones with normalized
    /// importance weights (unit weights when prioritization is disabled).
    fn build_batch(&self, e: usize, fresh: &[Episode], beta: f64) -> Result<(TrainingBatch, f64, f64)> {
        let mut batch = TrainingBatch::default();
        for ep in fresh {
            let (targets, _) = self.targets(ep)?;
            append(&mut batch, ep, &targets, 1.0);
        }
        let n_replay = (self.cfg.replay.replay_ratio * fresh.len() as f64).round() as usize;
        if n_replay > 0 && !self.state.replay.is_empty() {
            let mut rng = rng::stream(self.cfg.seed, &[tag::REPLAY, e as u64]);
            let replay = &self.state.replay;
            let (draws, weights) = if self.cfg.ablation.disable_ptr {
                let draws = replay.sample_uniform(n_replay, &mut rng)?;
                let w = vec![1.0; draws.len()];
                (draws, w)
            } else {
                let draws = replay.sample_batch(n_replay, &mut rng)?;
                let mut w: Vec<f64> = draws.iter().map(|d| importance_weight(replay.len(), d.probability, beta)).collect();
                normalize_weights(&mut w);
                (draws, w)
            };
            for (draw, w) in draws.iter().zip(weights) {
                let stored = replay.get(draw.index).expect("drawn index is stored");
                if self.cfg.mappo.recompute_replay_advantages {
                    let (targets, _) = self.targets(&stored.episode)?;
                    append(&mut batch, &stored.episode, &targets, w);
                } else {
                    append(&mut batch, &stored.episode, &stored.targets, w);
                }
            }
        }
        let (lo, hi) = batch.weights.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &w| (lo.min(w), hi.max(w)));
        Ok((batch, if lo.is_finite() { lo } else { 0.0 }, hi))
    }
}

fn append(batch: &mut TrainingBatch, ep: &Episode, targets: &[TrackTargets], weight: f64) {
    for (track, t) in ep.tracks.iter().zip(targets) {
        batch.obs.extend(track.obs.iter().cloned());
        batch.states.extend(track.states.iter().cloned());
        batch.actions.extend(&track.actions);
        batch.old_logp.extend(&track.logp);
        batch.advantages.extend(&t.advantages);
        batch.returns.extend(&t.returns);
        batch.weights.extend(std::iter::repeat_n(weight, track.len()));
    }
}

/// Up to `n` observations, newest first: fresh episodes, then the replay
/// buffer from its most recent entry backwards.
fn recent_observations(fresh: &[Episode], replay: &ReplayBuffer, n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let episodes = fresh.iter().rev().chain(replay.entries().iter().rev().map(|s| &s.episode));
    'outer: for ep in episodes {
        for track in &ep.tracks {
            for obs in track.obs.iter().rev() {
                if out.len() >= n {
                    break 'outer;
                }
                out.push(obs.clone());
            }
        }
    }
    out
}

fn push_window(window: &mut VecDeque<f64>, x: f64) {
    window.push_back(x);
    while window.len() > ROLLING_WINDOW {
        window.pop_front();
    }
}

fn mean(window: &VecDeque<f64>) -> f64 {
    if window.is_empty() {
        0.0
    } else {
        window.iter().sum::<f64>() / window.len() as f64
    }
}
