//! Run configuration.
//!
//! A single TOML document carries every tunable constant. Every section and
//! every field is optional; omitted values take the defaults below, so an
//! empty file is a valid configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flight, missile and battlefield constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// North-south extent in meters (the x axis).
    pub extent_ns: f64,
    /// East-west extent in meters (the y axis).
    pub extent_ew: f64,
    pub altitude_min: f64,
    pub altitude_max: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Maximum heading rate, degrees per second.
    pub turn_rate_deg: f64,
    /// Maximum vertical speed, m/s.
    pub climb_rate: f64,
    /// Maximum longitudinal acceleration, m/s².
    pub acceleration: f64,
    pub turn_small_deg: f64,
    pub turn_large_deg: f64,
    /// Use the large turn magnitude for actions 1 and 2.
    pub turn_large: bool,
    /// Altitude change requested by a climb or dive command.
    pub altitude_step: f64,
    /// Speed change requested by an accelerate or decelerate command.
    pub speed_step: f64,
    /// Duration of one leg of the S-turn weave, seconds.
    pub weave_period: f64,
    pub gravity: f64,
    pub max_missiles: u32,
    pub missile_speed: f64,
    pub missile_lifetime: f64,
    pub kill_radius: f64,
    /// Target radial speed (along the missile line of sight) below which the
    /// seeker sits in the Doppler notch.
    pub notch_radial_speed: f64,
    /// Continuous time in the notch after which the seeker drops lock.
    pub notch_dwell: f64,
    /// Decision step, seconds.
    pub dt: f64,
    /// Episode length in decision steps.
    pub max_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            extent_ns: 200_000.0,
            extent_ew: 100_000.0,
            altitude_min: 100.0,
            altitude_max: 20_000.0,
            speed_min: 100.0,
            speed_max: 400.0,
            turn_rate_deg: 10.0,
            climb_rate: 50.0,
            acceleration: 10.0,
            turn_small_deg: 30.0,
            turn_large_deg: 60.0,
            turn_large: false,
            altitude_step: 1000.0,
            speed_step: 50.0,
            weave_period: 6.0,
            gravity: 9.81,
            max_missiles: 4,
            missile_speed: 1000.0,
            missile_lifetime: 60.0,
            kill_radius: 300.0,
            notch_radial_speed: 60.0,
            notch_dwell: 2.0,
            dt: 1.0,
            max_steps: 900,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("extent_ns", self.extent_ns),
            ("extent_ew", self.extent_ew),
            ("speed_min", self.speed_min),
            ("turn_rate_deg", self.turn_rate_deg),
            ("climb_rate", self.climb_rate),
            ("acceleration", self.acceleration),
            ("missile_speed", self.missile_speed),
            ("missile_lifetime", self.missile_lifetime),
            ("kill_radius", self.kill_radius),
            ("weave_period", self.weave_period),
            ("gravity", self.gravity),
            ("dt", self.dt),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!("sim.{name} must be positive, got {value}")));
            }
        }
        if self.speed_max < self.speed_min {
            return Err(Error::InvalidConfig("sim.speed_max < sim.speed_min".into()));
        }
        if self.altitude_max <= self.altitude_min {
            return Err(Error::InvalidConfig("sim.altitude_max <= sim.altitude_min".into()));
        }
        if self.max_missiles > 4 {
            return Err(Error::InvalidConfig("sim.max_missiles may not exceed 4".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("sim.max_steps must be at least 1".into()));
        }
        if self.notch_dwell < 0.0 || self.notch_radial_speed < 0.0 {
            return Err(Error::InvalidConfig("sim notch parameters must be non-negative".into()));
        }
        Ok(())
    }

    pub fn turn_rate(&self) -> f64 {
        self.turn_rate_deg.to_radians()
    }

    pub fn turn_magnitude(&self) -> f64 {
        if self.turn_large {
            self.turn_large_deg.to_radians()
        } else {
            self.turn_small_deg.to_radians()
        }
    }
}

/// Reward weights and distance scales of the composite reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w_result: f64,
    pub w_advantage: f64,
    pub w_threat: f64,
    pub win_reward: f64,
    /// Engagement distance scale of the advantage term.
    pub d_max: f64,
    /// Missile threat distance scale.
    pub d_safe: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_result: 0.3,
            w_advantage: 0.4,
            w_threat: 0.3,
            win_reward: 1000.0,
            d_max: 100_000.0,
            d_safe: 20_000.0,
        }
    }
}

/// Initial deployment of both teams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub team_size: usize,
    /// Distance of the spawn line from its boundary, as a fraction of extent_ns.
    pub spawn_margin: f64,
    /// Lateral offsets are drawn within this fraction of extent_ew around the centerline.
    pub lateral_spread: f64,
    /// Red spawns mirror blue's lateral offsets.
    pub mirror_spawns: bool,
    pub initial_altitude: f64,
    pub initial_speed: f64,
    pub initial_missiles: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            team_size: 2,
            spawn_margin: 0.1,
            lateral_spread: 0.5,
            mirror_spawns: true,
            initial_altitude: 3000.0,
            initial_speed: 180.0,
            initial_missiles: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub scenario: ScenarioConfig,
    pub reward: RewardWeights,
}

impl EnvConfig {
    pub fn validate(&self, sim: &SimConfig) -> Result<()> {
        let s = &self.scenario;
        if !(s.team_size == 1 || s.team_size == 2) {
            return Err(Error::InvalidConfig(format!(
                "env.scenario.team_size must be 1 or 2, got {}",
                s.team_size
            )));
        }
        if !(0.0..0.5).contains(&s.spawn_margin) || !(0.0..=1.0).contains(&s.lateral_spread) {
            return Err(Error::InvalidConfig("env.scenario spawn fractions out of range".into()));
        }
        if s.initial_missiles > sim.max_missiles {
            return Err(Error::InvalidConfig("initial_missiles exceeds sim.max_missiles".into()));
        }
        if s.initial_speed < sim.speed_min || s.initial_speed > sim.speed_max {
            return Err(Error::InvalidConfig("initial_speed outside the speed band".into()));
        }
        if s.initial_altitude <= sim.altitude_min || s.initial_altitude >= sim.altitude_max {
            return Err(Error::InvalidConfig("initial_altitude outside the altitude band".into()));
        }
        let r = &self.reward;
        for (name, value) in [
            ("w_result", r.w_result),
            ("w_advantage", r.w_advantage),
            ("w_threat", r.w_threat),
            ("d_max", r.d_max),
            ("d_safe", r.d_safe),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!("env.reward.{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_grad_norm: f64,
    /// Init gain of the final policy layer.
    pub policy_head_gain: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![64, 64],
            critic_hidden: vec![128, 128],
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            max_grad_norm: 0.5,
            policy_head_gain: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
    /// Recompute values and advantages of replayed trajectories with the current critic.
    pub recompute_replay_advantages: bool,
    /// Training episodes collected between updates.
    pub rollout_episodes: usize,
    /// Divides rewards before they reach the learner (1.0 leaves them untouched).
    pub reward_scale: f64,
}

impl Default for MappoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs: 4,
            minibatch: 256,
            entropy_coef: 0.01,
            normalize_advantages: true,
            recompute_replay_advantages: true,
            rollout_episodes: 1,
            reward_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    pub capacity: usize,
    /// Priority exponent of the sampling distribution.
    pub kappa: f64,
    pub alpha_td: f64,
    pub alpha_return: f64,
    pub alpha_source: f64,
    pub priority_floor: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Replayed trajectories per fresh trajectory in each update.
    pub replay_ratio: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            capacity: 512,
            kappa: 0.6,
            alpha_td: 0.5,
            alpha_return: 0.3,
            alpha_source: 0.2,
            priority_floor: 1e-3,
            beta_start: 0.4,
            beta_end: 1.0,
            replay_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvoConfig {
    pub population: usize,
    /// Training episodes between evolution phases.
    pub period: usize,
    pub eval_rounds: usize,
    /// Fitness margin the elite must exceed before injection.
    pub margin: f64,
    pub mutation_std: f64,
    pub entropy_step: f64,
    pub entropy_eps: f64,
    pub entropy_batch: usize,
    pub tau_init: f64,
    pub tau_final: f64,
}

impl Default for EvoConfig {
    fn default() -> Self {
        Self {
            population: 5,
            period: 20,
            eval_rounds: 10,
            margin: 5.0,
            mutation_std: 0.02,
            entropy_step: 0.05,
            entropy_eps: 1e-8,
            entropy_batch: 256,
            tau_init: 0.5,
            tau_final: 0.1,
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population == 0 || self.eval_rounds == 0 || self.period == 0 {
            return Err(Error::InvalidConfig("evo.population, eval_rounds and period must be >= 1".into()));
        }
        if self.margin < 0.0 || self.mutation_std < 0.0 || self.entropy_step < 0.0 {
            return Err(Error::InvalidConfig("evo margin, mutation_std and entropy_step must be >= 0".into()));
        }
        if self.entropy_eps <= 0.0 {
            return Err(Error::InvalidConfig("evo.entropy_eps must be > 0".into()));
        }
        for tau in [self.tau_init, self.tau_final] {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::InvalidConfig("evo tau endpoints must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// Thresholds of the heuristic baseline opponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleConfig {
    pub fire_range: f64,
    pub evade_trigger: f64,
    /// Bearing below which the enemy counts as "on the nose", degrees.
    pub aligned_bearing_deg: f64,
    /// Altitude difference beyond which the rule policy matches the enemy's altitude.
    pub altitude_tolerance: f64,
    /// Below this range the rule policy bleeds speed instead of closing.
    pub min_range: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            fire_range: 20_000.0,
            evade_trigger: 15_000.0,
            aligned_bearing_deg: 10.0,
            altitude_tolerance: 1000.0,
            min_range: 8_000.0,
        }
    }
}

/// Opponent the pool is seeded with and never prunes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseOpponent {
    Rule,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    pub sigma: f64,
    pub mu_init: f64,
    pub step: f64,
    pub threshold: f64,
    pub mu_max: f64,
    pub pool_capacity: usize,
    /// Episodes used to measure win rate against the rule policy.
    pub winrate_episodes: usize,
    pub base_opponent: BaseOpponent,
    pub rule: RuleConfig,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            sigma: 0.15,
            mu_init: 0.3,
            step: 0.01,
            threshold: 0.5,
            mu_max: 0.8,
            pool_capacity: 50,
            winrate_episodes: 20,
            base_opponent: BaseOpponent::Rule,
            rule: RuleConfig::default(),
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidConfig("curriculum.sigma must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.mu_max) || !(0.0..=self.mu_max).contains(&self.mu_init) {
            return Err(Error::InvalidConfig("curriculum mu_init/mu_max out of range".into()));
        }
        if self.pool_capacity == 0 || self.winrate_episodes == 0 {
            return Err(Error::InvalidConfig("curriculum pool_capacity and winrate_episodes must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub disable_g_update: bool,
    pub disable_ptr: bool,
    pub disable_curriculum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub total_episodes: usize,
    pub seed: u64,
    pub checkpoint_every: usize,
    /// Worker threads for evaluation episodes (0 = one per core). Results do not depend on it.
    pub workers: usize,
    pub ablation: Ablation,
    pub sim: SimConfig,
    pub env: EnvConfig,
    pub net: NetConfig,
    pub mappo: MappoConfig,
    pub replay: ReplayConfig,
    pub evo: EvoConfig,
    pub curriculum: CurriculumConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_episodes: 1000,
            seed: 0,
            checkpoint_every: 100,
            workers: 0,
            ablation: Ablation::default(),
            sim: SimConfig::default(),
            env: EnvConfig::default(),
            net: NetConfig::default(),
            mappo: MappoConfig::default(),
            replay: ReplayConfig::default(),
            evo: EvoConfig::default(),
            curriculum: CurriculumConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: TrainConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.env.validate(&self.sim)?;
        let m = &self.mappo;
        if !(0.0..1.0).contains(&m.gamma) || !(0.0..=1.0).contains(&m.gae_lambda) {
            return Err(Error::InvalidConfig("mappo gamma must lie in [0,1), gae_lambda in [0,1]".into()));
        }
        if !(m.clip_eps > 0.0) || m.epochs == 0 || m.minibatch == 0 || m.rollout_episodes == 0 {
            return Err(Error::InvalidConfig("mappo clip_eps, epochs, minibatch, rollout_episodes must be positive".into()));
        }
        if !(m.reward_scale > 0.0) {
            return Err(Error::InvalidConfig("mappo.reward_scale must be > 0".into()));
        }
        let r = &self.replay;
        if r.capacity == 0 || !(0.0..=1.0).contains(&r.kappa) || !(r.priority_floor > 0.0) {
            return Err(Error::InvalidConfig("replay capacity, kappa or priority_floor out of range".into()));
        }
        if !(0.4..=1.0).contains(&r.beta_start) || !(0.4..=1.0).contains(&r.beta_end) || r.replay_ratio < 0.0 {
            return Err(Error::InvalidConfig("replay beta endpoints must lie in [0.4, 1]".into()));
        }
        if self.net.actor_hidden.is_empty() || self.net.critic_hidden.is_empty() {
            return Err(Error::InvalidConfig("net hidden layer lists may not be empty".into()));
        }
        self.evo.validate()?;
        self.curriculum.validate()?;
        Ok(())
    }
}
