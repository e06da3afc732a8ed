//! Prioritized trajectory replay with an evolutionary-source bonus.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ReplayConfig;
use crate::error::{Error, Result};
use crate::rollout::Episode;

/// Which process produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Rl,
    Ea,
}

/// Advantages and value targets of one agent track, as computed when the
/// trajectory was stored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackTargets {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTrajectory {
    pub episode: Episode,
    source: Source,
    pub priority: f64,
    /// Discounted team return of the episode.
    pub ret: f64,
    pub targets: Vec<TrackTargets>,
}

impl StoredTrajectory {
    pub fn source(&self) -> Source {
        self.source
    }
}

/// Running mean and variance (Welford) of inserted returns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl ReturnStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Sample variance, undefined below two observations.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.m2 / (self.count - 1) as f64)
    }

    /// Z-score of `x`; zero when the spread is undefined or zero.
    pub fn z_score(&self, x: f64) -> f64 {
        match self.variance() {
            Some(v) if v > 0.0 => (x - self.mean) / v.sqrt(),
            _ => 0.0,
        }
    }
}

/// Priority of a trajectory: weighted mean absolute TD error, return Z-score
/// against the buffer, and a bonus for evolutionary trajectories, floored.
pub fn compute_priority(
    td_errors: &[f64],
    episode_return: f64,
    source: Source,
    stats: &ReturnStats,
    cfg: &ReplayConfig,
) -> Result<f64> {
    if td_errors.is_empty() {
        return Err(Error::InvalidArgument("priority of an empty trajectory".into()));
    }
    let mean_abs = td_errors.iter().map(|d| d.abs()).sum::<f64>() / td_errors.len() as f64;
    let bonus = if source == Source::Ea { 1.0 } else { 0.0 };
    let p = cfg.alpha_td * mean_abs + cfg.alpha_return * stats.z_score(episode_return) + cfg.alpha_source * bonus;
    if !p.is_finite() {
        return Err(Error::NonFinite { location: "trajectory priority".into() });
    }
    Ok(p.max(cfg.priority_floor))
}

/// Raw importance weight `(n * q)^-beta`.
pub fn importance_weight(buffer_len: usize, probability: f64, beta: f64) -> f64 {
    (buffer_len as f64 * probability).powf(-beta)
}

/// Divides every weight by the largest one.
pub fn normalize_weights(weights: &mut [f64]) {
    let max = weights.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        weights.iter_mut().for_each(|w| *w /= max);
    }
}

pub fn anneal_beta(step: usize, total_steps: usize, start: f64, end: f64) -> f64 {
    if total_steps == 0 {
        return end;
    }
    let frac = (step.min(total_steps)) as f64 / total_steps as f64;
    start + (end - start) * frac
}

/// One draw from the buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub index: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    pub capacity: usize,
    pub kappa: f64,
    entries: Vec<StoredTrajectory>,
    stats: ReturnStats,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, kappa: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&kappa) {
            return Err(Error::InvalidConfig(format!("replay kappa {kappa} outside [0, 1]")));
        }
        Ok(Self { capacity, kappa, entries: Vec::new(), stats: ReturnStats::default() })
    }

    pub fn from_config(cfg: &ReplayConfig) -> Result<Self> {
        Self::new(cfg.capacity, cfg.kappa)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stats(&self) -> &ReturnStats {
        &self.stats
    }

    pub fn entries(&self) -> &[StoredTrajectory] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> Option<&StoredTrajectory> {
        self.entries.get(index)
    }

    /// Stores a trajectory; at capacity the lowest-priority entry (oldest on
    /// ties, possibly the new one) is evicted. Returns the evicted entry.
    pub fn insert(
        &mut self,
        episode: Episode,
        source: Source,
        priority: f64,
        ret: f64,
        targets: Vec<TrackTargets>,
    ) -> Result<Option<StoredTrajectory>> {
        if !(priority > 0.0) || !priority.is_finite() {
            return Err(Error::InvalidArgument(format!("priority {priority} must be positive and finite")));
        }
        if !ret.is_finite() {
            return Err(Error::NonFinite { location: "trajectory return".into() });
        }
        self.stats.push(ret);
        self.entries.push(StoredTrajectory { episode, source, priority, ret, targets });
        if self.entries.len() <= self.capacity {
            return Ok(None);
        }
        let mut victim = 0;
        for (i, e) in self.entries.iter().enumerate() {
            if e.priority < self.entries[victim].priority {
                victim = i;
            }
        }
        Ok(Some(self.entries.remove(victim)))
    }

    /// Sampling distribution `q ∝ P^kappa`.
    pub fn probabilities(&self) -> Vec<f64> {
        let powered: Vec<f64> = self.entries.iter().map(|e| e.priority.powf(self.kappa)).collect();
        let total: f64 = powered.iter().sum();
        powered.into_iter().map(|p| p / total).collect()
    }

    /// Draws `n` entries with replacement from the priority distribution.
    pub fn sample_batch(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<Draw>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let probs = self.probabilities();
        let dist = WeightedIndex::new(&probs).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok((0..n)
            .map(|_| {
                let index = dist.sample(rng);
                Draw { index, probability: probs[index] }
            })
            .collect())
    }

    /// Uniform draws with replacement (prioritization disabled).
    pub fn sample_uniform(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<Draw>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let q = 1.0 / self.entries.len() as f64;
        Ok((0..n).map(|_| Draw { index: rng.gen_range(0..self.entries.len()), probability: q }).collect())
    }
}
