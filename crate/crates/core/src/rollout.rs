//! Policies as seen by the environment loop, and the episode runner that
//! records the blue team's trajectories.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::airsim::{Battlefield, Team};
use crate::env::{AirCombatEnv, Observation, ObservationScale, Outcome, RewardTerms, StepResult, ACTION_COUNT};
use crate::error::{Error, Result};
use crate::net::PolicyParams;
use crate::rng::{self, SimRng};

/// Anything that maps a local observation to a tactical command.
pub trait Policy: Send + Sync {
    /// Returns the chosen action and its log-probability under this policy.
    fn act(&self, obs: &Observation, scale: &ObservationScale, rng: &mut SimRng) -> Result<(usize, f64)>;

    fn label(&self) -> String;
}

/// Stochastic policy backed by the shared actor network.
#[derive(Debug, Clone)]
pub struct NetPolicy {
    pub params: PolicyParams,
    pub name: String,
}

impl NetPolicy {
    pub fn new(params: PolicyParams, name: impl Into<String>) -> Self {
        Self { params, name: name.into() }
    }
}

impl Policy for NetPolicy {
    fn act(&self, obs: &Observation, scale: &ObservationScale, rng: &mut SimRng) -> Result<(usize, f64)> {
        self.params.sample(&obs.normalized(scale), rng)
    }

    fn label(&self) -> String {
        self.name.clone()
    }
}

/// Uniform over all commands.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn act(&self, _obs: &Observation, _scale: &ObservationScale, rng: &mut SimRng) -> Result<(usize, f64)> {
        Ok((rng.gen_range(0..ACTION_COUNT), -(ACTION_COUNT as f64).ln()))
    }

    fn label(&self) -> String {
        "random".into()
    }
}

/// Holds the current flight path forever.
#[derive(Debug, Clone, Copy, Default)]
pub struct StraightPolicy;

impl Policy for StraightPolicy {
    fn act(&self, _obs: &Observation, _scale: &ObservationScale, _rng: &mut SimRng) -> Result<(usize, f64)> {
        Ok((0, 0.0))
    }

    fn label(&self) -> String {
        "straight".into()
    }
}

/// Steps of one blue agent while it was alive (steps `0..len`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentTrack {
    pub agent: usize,
    /// Normalized local observations.
    pub obs: Vec<Vec<f64>>,
    /// Critic inputs.
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub logp: Vec<f64>,
}

impl AgentTrack {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// One episode from the blue team's side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub seed: u64,
    pub outcome: Outcome,
    pub length: usize,
    pub tracks: Vec<AgentTrack>,
    /// `rewards[t][i]`: reward of blue agent `i` after step `t`, including
    /// the settled result for agents that died earlier.
    pub rewards: Vec<Vec<f64>>,
    pub terms: Vec<Vec<RewardTerms>>,
}

impl Episode {
    /// Team reward per step (sum over blue agents).
    pub fn team_rewards(&self) -> Vec<f64> {
        self.rewards.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.team_rewards().iter().sum()
    }

    /// Discounted team return from the first step.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        self.team_rewards().iter().rev().fold(0.0, |acc, r| r + gamma * acc)
    }

    /// Per-step rewards for one track. Rewards arriving after the agent died
    /// are discounted back onto its last step.
    pub fn track_rewards(&self, track: usize, gamma: f64) -> Vec<f64> {
        let len = self.tracks[track].len();
        let mut out: Vec<f64> = self.rewards[..len].iter().map(|r| r[track]).collect();
        if let Some(last) = out.last_mut() {
            let mut discount = 1.0;
            for r in &self.rewards[len..] {
                discount *= gamma;
                *last += discount * r[track];
            }
        }
        out
    }

    pub fn transitions(&self) -> usize {
        self.tracks.iter().map(AgentTrack::len).sum()
    }
}

/// State handed to an episode observer: the battlefield before the first
/// step (no actions), then after each step.
pub struct Frame<'a> {
    pub battlefield: &'a Battlefield,
    pub actions: Option<&'a [usize]>,
    pub result: Option<&'a StepResult>,
}

pub fn run_episode(env: &AirCombatEnv, blue: &dyn Policy, red: &dyn Policy, seed: u64) -> Result<Episode> {
    run_episode_observed(env, blue, red, seed, &mut |_| {})
}

/// Plays one episode to termination, recording blue's trajectories.
pub fn run_episode_observed(
    env: &AirCombatEnv,
    blue: &dyn Policy,
    red: &dyn Policy,
    seed: u64,
    observer: &mut dyn FnMut(&Frame),
) -> Result<Episode> {
    let (mut bf, mut obs) = env.reset(seed)?;
    let scale = env.scale();
    let mut blue_rng = rng::stream(seed, &[rng::tag::ACTION, 0]);
    let mut red_rng = rng::stream(seed, &[rng::tag::ACTION, 1]);
    let blue_ids: Vec<usize> = bf.team_members(Team::Blue).collect();
    let mut tracks: Vec<AgentTrack> =
        blue_ids.iter().map(|&agent| AgentTrack { agent, ..Default::default() }).collect();
    let mut rewards = Vec::new();
    let mut terms = Vec::new();
    observer(&Frame { battlefield: &bf, actions: None, result: None });
    loop {
        let mut actions = vec![0; bf.aircraft.len()];
        for id in 0..bf.aircraft.len() {
            let Some(o) = &obs[id] else { continue };
            let (policy, rng) = match bf.aircraft[id].team {
                Team::Blue => (blue, &mut blue_rng),
                Team::Red => (red, &mut red_rng),
            };
            let (a, logp) = policy.act(o, &scale, rng)?;
            if a >= ACTION_COUNT {
                return Err(Error::MalformedAction(format!("{} chose action {a}", policy.label())));
            }
            actions[id] = a;
            if let Some(slot) = blue_ids.iter().position(|&b| b == id) {
                let t = &mut tracks[slot];
                t.obs.push(o.normalized(&scale).to_vec());
                t.states.push(env.global_state(&bf, id));
                t.actions.push(a);
                t.logp.push(logp);
            }
        }
        let result = env.step(&mut bf, &actions)?;
        rewards.push(blue_ids.iter().map(|&id| result.rewards[id]).collect());
        terms.push(blue_ids.iter().map(|&id| result.terms[id]).collect());
        observer(&Frame { battlefield: &bf, actions: Some(&actions), result: Some(&result) });
        if result.terminal {
            return Ok(Episode { seed, outcome: result.outcome, length: bf.step, tracks, rewards, terms });
        }
        obs = result.observations;
    }
}

/// Win/loss/draw tally from blue's side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinCounts {
    pub blue: usize,
    pub red: usize,
    pub draws: usize,
}

impl WinCounts {
    pub fn episodes(&self) -> usize {
        self.blue + self.red + self.draws
    }

    /// Blue's score with draws counted as half a win.
    pub fn blue_score(&self) -> f64 {
        if self.episodes() == 0 {
            return 0.0;
        }
        (self.blue as f64 + 0.5 * self.draws as f64) / self.episodes() as f64
    }

    pub fn record(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::BlueWin => self.blue += 1,
            Outcome::RedWin => self.red += 1,
            _ => self.draws += 1,
        }
    }
}

/// Plays `episodes` seeded episodes of `blue` against `red` in parallel.
pub fn evaluate_winrate(
    env: &AirCombatEnv,
    blue: &dyn Policy,
    red: &dyn Policy,
    episodes: usize,
    seed: u64,
) -> Result<WinCounts> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("win-rate evaluation needs at least one episode".into()));
    }
    let outcomes: Vec<Result<Outcome>> = (0..episodes as u64)
        .into_par_iter()
        .map(|i| Ok(run_episode(env, blue, red, rng::derive_seed(seed, &[rng::tag::EVAL, i]))?.outcome))
        .collect();
    let mut counts = WinCounts::default();
    for o in outcomes {
        counts.record(o?);
    }
    Ok(counts)
}
