//! Opponent pool with measured difficulties, curriculum-centered opponent
//! sampling, and the heuristic baseline policy.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::airsim::TacticalAction;
use crate::config::{BaseOpponent, CurriculumConfig, RuleConfig};
use crate::env::{AirCombatEnv, Observation, ObservationScale};
use crate::error::{Error, Result};
use crate::net::PolicyParams;
use crate::rollout::{evaluate_winrate, NetPolicy, Policy, RandomPolicy};
use crate::rng::SimRng;

/// Deterministic decision tree: evade incoming missiles, fire when the enemy
/// is on the nose and in range, otherwise point at the enemy and manage
/// altitude and closure.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RulePolicy {
    pub cfg: RuleConfig,
}

impl RulePolicy {
    pub fn new(cfg: RuleConfig) -> Self {
        Self { cfg }
    }
}

pub fn rule_policy_action(obs: &Observation, cfg: &RuleConfig) -> usize {
    let aligned = cfg.aligned_bearing_deg.to_radians();
    let action = if obs.threat && obs.threat_distance < cfg.evade_trigger {
        TacticalAction::Notch
    } else if obs.enemy_bearing.abs() < aligned && obs.enemy_distance < cfg.fire_range && obs.missiles > 0.0 {
        TacticalAction::Fire
    } else if obs.enemy_bearing >= aligned {
        TacticalAction::TurnRight
    } else if obs.enemy_bearing <= -aligned {
        TacticalAction::TurnLeft
    } else if obs.enemy_altitude_delta > cfg.altitude_tolerance {
        TacticalAction::Climb
    } else if obs.enemy_altitude_delta < -cfg.altitude_tolerance {
        TacticalAction::Dive
    } else if obs.enemy_distance < cfg.min_range {
        TacticalAction::Decelerate
    } else if obs.closing_speed < 0.0 {
        TacticalAction::Accelerate
    } else {
        TacticalAction::Straight
    };
    action.index()
}

impl Policy for RulePolicy {
    fn act(&self, obs: &Observation, _scale: &ObservationScale, _rng: &mut SimRng) -> Result<(usize, f64)> {
        Ok((rule_policy_action(obs, &self.cfg), 0.0))
    }

    fn label(&self) -> String {
        "rule".into()
    }
}

/// The fixed reference opponent named by the config.
pub fn base_policy(cfg: &CurriculumConfig) -> Box<dyn Policy> {
    match cfg.base_opponent {
        BaseOpponent::Rule => Box::new(RulePolicy::new(cfg.rule.clone())),
        BaseOpponent::Random => Box::new(RandomPolicy),
    }
}

/// Blue's score (draws half) for `policy` against the base opponent.
pub fn opponent_difficulty(
    env: &AirCombatEnv,
    policy: &dyn Policy,
    cfg: &CurriculumConfig,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    let base = base_policy(cfg);
    Ok(evaluate_winrate(env, policy, base.as_ref(), episodes, seed)?.blue_score())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpponentKind {
    Base,
    Snapshot { params: PolicyParams },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpponentEntry {
    pub id: u64,
    pub kind: OpponentKind,
    pub difficulty: f64,
    pub admitted_episode: usize,
}

impl OpponentEntry {
    pub fn is_base(&self) -> bool {
        matches!(self.kind, OpponentKind::Base)
    }

    pub fn policy(&self, cfg: &CurriculumConfig) -> Box<dyn Policy> {
        match &self.kind {
            OpponentKind::Base => base_policy(cfg),
            OpponentKind::Snapshot { params } => Box::new(NetPolicy::new(params.clone(), format!("pool-{}", self.id))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub mu: f64,
    pub stage: u64,
    pub sigma: f64,
    pub step: f64,
    pub threshold: f64,
    pub mu_max: f64,
    pub capacity: usize,
}

impl CurriculumState {
    pub fn new(cfg: &CurriculumConfig) -> Self {
        Self {
            mu: cfg.mu_init,
            stage: 0,
            sigma: cfg.sigma,
            step: cfg.step,
            threshold: cfg.threshold,
            mu_max: cfg.mu_max,
            capacity: cfg.pool_capacity,
        }
    }
}

/// Advances the center by one step when the win rate strictly beats the
/// threshold, capped at `mu_max`. The stage counts actual moves.
pub fn update_center(state: &mut CurriculumState, winrate: f64) -> Result<bool> {
    if !(0.0..=1.0).contains(&winrate) {
        return Err(Error::InvalidArgument(format!("win rate {winrate} outside [0, 1]")));
    }
    let indicator = if winrate > state.threshold { 1.0 } else { 0.0 };
    let next = state.mu_max.min(state.mu + state.step * indicator);
    let moved = next != state.mu;
    if moved {
        state.mu = next;
        state.stage += 1;
    }
    Ok(moved)
}

/// Unnormalized sampling weight of an opponent with difficulty `d`.
pub fn opponent_weight(d: f64, mu: f64, sigma: f64) -> f64 {
    if !(0.0..=1.0).contains(&d) {
        return 0.0;
    }
    (-(d - mu).powi(2) / (2.0 * sigma * sigma)).exp()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdmitReport {
    pub admitted: Option<u64>,
    pub pruned: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpponentPool {
    entries: Vec<OpponentEntry>,
    next_id: u64,
}

impl OpponentPool {
    /// A pool holding only the base opponent at the given difficulty.
    pub fn new(base_difficulty: f64) -> Self {
        let base = OpponentEntry { id: 0, kind: OpponentKind::Base, difficulty: base_difficulty.clamp(0.0, 1.0), admitted_episode: 0 };
        Self { entries: vec![base], next_id: 1 }
    }

    pub fn entries(&self) -> &[OpponentEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sampling probabilities over the pool.
    pub fn probabilities(&self, state: &CurriculumState) -> Vec<f64> {
        let w: Vec<f64> = self.entries.iter().map(|e| opponent_weight(e.difficulty, state.mu, state.sigma)).collect();
        let total: f64 = w.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return vec![1.0 / self.entries.len() as f64; self.entries.len()];
        }
        w.into_iter().map(|x| x / total).collect()
    }

    /// Index of an opponent drawn from the truncated Gaussian around the center.
    pub fn sample_opponent(&self, state: &CurriculumState, rng: &mut impl Rng) -> Result<usize> {
        if self.entries.is_empty() {
            return Err(Error::EmptyPool);
        }
        let probs = self.probabilities(state);
        let dist = WeightedIndex::new(&probs).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(dist.sample(rng))
    }

    /// Admits a frozen copy when `winrate` beats the threshold, then trims
    /// the pool back to capacity by removing the entries farthest from the
    /// center (never the base opponent; older first on ties).
    pub fn admit_and_prune(
        &mut self,
        candidate: &PolicyParams,
        winrate: f64,
        state: &CurriculumState,
        episode: usize,
    ) -> Result<AdmitReport> {
        if !(0.0..=1.0).contains(&winrate) {
            return Err(Error::InvalidArgument(format!("win rate {winrate} outside [0, 1]")));
        }
        let mut report = AdmitReport::default();
        if winrate > state.threshold {
            let id = self.next_id;
            self.next_id += 1;
            self.entries.push(OpponentEntry {
                id,
                kind: OpponentKind::Snapshot { params: candidate.clone() },
                difficulty: winrate,
                admitted_episode: episode,
            });
            report.admitted = Some(id);
        }
        while self.entries.len() > state.capacity.max(1) {
            let mut victim: Option<usize> = None;
            for (i, e) in self.entries.iter().enumerate() {
                if e.is_base() {
                    continue;
                }
                let gap = (e.difficulty - state.mu).abs();
                if victim.is_none_or(|v| gap > (self.entries[v].difficulty - state.mu).abs()) {
                    victim = Some(i);
                }
            }
            let Some(v) = victim else { break };
            report.pruned.push(self.entries.remove(v).id);
        }
        Ok(report)
    }
}
