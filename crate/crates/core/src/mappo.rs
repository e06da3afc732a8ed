//! MAPPO learning core: advantage estimation, the importance-weighted clipped
//! actor loss and critic loss, and the minibatch update.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{MappoConfig, NetConfig};
use crate::error::{Error, Result};
use crate::net::{clip_grad_norm, entropy, entropy_logit_gradient, softmax, Adam, CriticParams, PolicyParams};

/// Generalized advantage estimation over one agent's track.
///
/// `values` carries one extra bootstrap entry. `terminals[t]` marks that the
/// state after step `t` is terminal: its value is not bootstrapped and the
/// advantage sum stops there.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    terminals: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} outside [0, 1)")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 1]")));
    }
    let n = rewards.len();
    if values.len() != n + 1 || terminals.len() != n {
        return Err(Error::ShapeMismatch { expected: n + 1, actual: values.len() });
    }
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let live = if terminals[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        running = delta + gamma * lambda * live * running;
        advantages[t] = running;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}

/// One-step temporal-difference errors (the `lambda = 0` advantages).
pub fn td_errors(rewards: &[f64], values: &[f64], terminals: &[bool], gamma: f64) -> Result<Vec<f64>> {
    Ok(compute_gae(rewards, values, terminals, gamma, 0.0)?.0)
}

/// Flattened actor/critic training samples with per-sample replay weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingBatch {
    pub obs: Vec<Vec<f64>>,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub old_logp: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TrainingBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for (name, len) in [
            ("obs", self.obs.len()),
            ("states", self.states.len()),
            ("old_logp", self.old_logp.len()),
            ("advantages", self.advantages.len()),
            ("returns", self.returns.len()),
            ("weights", self.weights.len()),
        ] {
            if len != n {
                return Err(Error::InvalidArgument(format!("batch field {name} has {len} entries, expected {n}")));
            }
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument("replay weights must be strictly positive".into()));
        }
        if self.old_logp.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidArgument("behavior log-probabilities must be finite".into()));
        }
        if self.advantages.iter().chain(&self.returns).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { location: "advantages or returns".into() });
        }
        Ok(())
    }

    pub fn select(&self, idx: &[usize]) -> TrainingBatch {
        TrainingBatch {
            obs: idx.iter().map(|&i| self.obs[i].clone()).collect(),
            states: idx.iter().map(|&i| self.states[i].clone()).collect(),
            actions: idx.iter().map(|&i| self.actions[i]).collect(),
            old_logp: idx.iter().map(|&i| self.old_logp[i]).collect(),
            advantages: idx.iter().map(|&i| self.advantages[i]).collect(),
            returns: idx.iter().map(|&i| self.returns[i]).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    pub fn extend(&mut self, other: TrainingBatch) {
        self.obs.extend(other.obs);
        self.states.extend(other.states);
        self.actions.extend(other.actions);
        self.old_logp.extend(other.old_logp);
        self.advantages.extend(other.advantages);
        self.returns.extend(other.returns);
        self.weights.extend(other.weights);
    }

    /// Zero-mean, unit-variance advantages.
    pub fn normalize_advantages(&mut self) {
        let n = self.advantages.len();
        if n < 2 {
            return;
        }
        let mean = self.advantages.iter().sum::<f64>() / n as f64;
        let var = self.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt() + 1e-8;
        self.advantages.iter_mut().for_each(|a| *a = (*a - mean) / std);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActorStats {
    pub loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

fn clip_ratio(ratio: f64, eps: f64) -> f64 {
    ratio.clamp(1.0 - eps, 1.0 + eps)
}

/// Weighted clipped surrogate, negated, minus `entropy_coef` times the mean
/// entropy; returns the loss, its parameter gradient and diagnostics.
pub fn actor_objective(
    policy: &PolicyParams,
    batch: &TrainingBatch,
    clip_eps: f64,
    entropy_coef: f64,
) -> Result<(ActorStats, Vec<f64>)> {
    if !(clip_eps > 0.0) {
        return Err(Error::InvalidArgument("clip epsilon must be positive".into()));
    }
    if batch.old_logp.contains(&f64::NEG_INFINITY) {
        return Err(Error::InvalidArgument("old log-probability of -inf".into()));
    }
    if batch.advantages.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite { location: "advantages".into() });
    }
    let n = batch.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty actor batch".into()));
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = vec![0.0; policy.len()];
    let mut stats = ActorStats::default();
    let mut surrogate = 0.0;
    for i in 0..n {
        let cache = policy.0.forward(&batch.obs[i])?;
        let probs = softmax(cache.output());
        let a = batch.actions[i];
        let logp = probs[a].ln();
        let ratio = (logp - batch.old_logp[i]).exp();
        let adv = batch.advantages[i];
        let w = batch.weights[i];
        let unclipped = ratio * adv;
        let clipped = clip_ratio(ratio, clip_eps) * adv;
        surrogate += w * unclipped.min(clipped);
        let h = entropy(&probs);
        stats.entropy += h * inv_n;
        if (ratio - 1.0).abs() > clip_eps {
            stats.clip_fraction += inv_n;
        }
        stats.approx_kl += ((ratio - 1.0) - (logp - batch.old_logp[i])) * inv_n;

        // d(-w min(.)/n)/d logp, nonzero only where the unclipped branch is active.
        let d_logp = if unclipped <= clipped { -w * unclipped * inv_n } else { 0.0 };
        let ent_grad = entropy_logit_gradient(&probs);
        let d_logits: Vec<f64> = (0..probs.len())
            .map(|k| {
                let onehot = if k == a { 1.0 } else { 0.0 };
                d_logp * (onehot - probs[k]) - entropy_coef * inv_n * ent_grad[k]
            })
            .collect();
        policy.0.backward(&cache, &d_logits, &mut grad)?;
    }
    stats.loss = -surrogate * inv_n - entropy_coef * stats.entropy;
    if !stats.loss.is_finite() {
        return Err(Error::NonFinite { location: "actor loss".into() });
    }
    Ok((stats, grad))
}

/// Importance-weighted clipped actor loss (no entropy bonus).
pub fn actor_loss(policy: &PolicyParams, batch: &TrainingBatch, clip_eps: f64) -> Result<f64> {
    Ok(actor_objective(policy, batch, clip_eps, 0.0)?.0.loss)
}

/// Importance-weighted squared value error and its gradient.
pub fn critic_objective(critic: &CriticParams, batch: &TrainingBatch) -> Result<(f64, Vec<f64>)> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty critic batch".into()));
    }
    if batch.weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidArgument("replay weights must be strictly positive".into()));
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = vec![0.0; critic.len()];
    let mut loss = 0.0;
    for i in 0..n {
        let cache = critic.0.forward(&batch.states[i])?;
        let err = cache.output()[0] - batch.returns[i];
        loss += batch.weights[i] * err * err;
        critic.0.backward(&cache, &[2.0 * batch.weights[i] * err * inv_n], &mut grad)?;
    }
    let loss = loss * inv_n;
    if !loss.is_finite() {
        return Err(Error::NonFinite { location: "critic loss".into() });
    }
    Ok((loss, grad))
}

pub fn critic_loss(critic: &CriticParams, states: &[Vec<f64>], returns: &[f64], weights: &[f64]) -> Result<f64> {
    let batch = TrainingBatch {
        states: states.to_vec(),
        returns: returns.to_vec(),
        weights: weights.to_vec(),
        actions: vec![0; states.len()],
        ..Default::default()
    };
    Ok(critic_objective(critic, &batch)?.0)
}

/// Unweighted reference losses (plain MAPPO).
pub mod plain {
    use super::*;

    pub fn critic_loss(critic: &CriticParams, states: &[Vec<f64>], returns: &[f64]) -> Result<f64> {
        let mut loss = 0.0;
        for (s, r) in states.iter().zip(returns) {
            let err = critic.value(s)? - r;
            loss += err * err;
        }
        Ok(loss / states.len() as f64)
    }

    pub fn actor_loss(
        policy: &PolicyParams,
        obs: &[Vec<f64>],
        actions: &[usize],
        old_logp: &[f64],
        advantages: &[f64],
        clip_eps: f64,
    ) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..obs.len() {
            let probs = policy.forward(&obs[i])?;
            let ratio = (probs[actions[i]].ln() - old_logp[i]).exp();
            let adv = advantages[i];
            total += (ratio * adv).min(clip_ratio(ratio, clip_eps) * adv);
        }
        Ok(-total / obs.len() as f64)
    }
}

/// Actor and critic with their optimizer states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub policy: PolicyParams,
    pub critic: CriticParams,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
}

impl Learner {
    pub fn new(policy: PolicyParams, critic: CriticParams, net: &NetConfig) -> Self {
        let actor_opt = Adam::new(policy.len(), net.actor_lr, net.adam_beta1, net.adam_beta2, net.adam_eps);
        let critic_opt = Adam::new(critic.len(), net.critic_lr, net.adam_beta1, net.adam_beta2, net.adam_eps);
        Self { policy, critic, actor_opt, critic_opt }
    }

    /// Replaces the policy (after a soft update), keeping optimizer moments.
    pub fn set_policy(&mut self, policy: PolicyParams) {
        self.policy = policy;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
    pub samples: usize,
    pub minibatches: usize,
}

/// Runs `epochs` passes of shuffled minibatch gradient steps on the actor
/// and critic losses. On any non-finite value the learner is left unchanged.
pub fn update_step(
    learner: &mut Learner,
    batch: &TrainingBatch,
    cfg: &MappoConfig,
    net: &NetConfig,
    rng: &mut impl Rng,
) -> Result<UpdateMetrics> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("update needs a non-empty batch".into()));
    }
    batch.validate()?;
    let mut batch = batch.clone();
    if cfg.normalize_advantages {
        batch.normalize_advantages();
    }
    let snapshot = learner.clone();
    let result = run_epochs(learner, &batch, cfg, net, rng);
    if result.is_err() {
        *learner = snapshot;
    }
    result
}

fn run_epochs(
    learner: &mut Learner,
    batch: &TrainingBatch,
    cfg: &MappoConfig,
    net: &NetConfig,
    rng: &mut impl Rng,
) -> Result<UpdateMetrics> {
    let mut metrics = UpdateMetrics { samples: batch.len(), ..Default::default() };
    let mut order: Vec<usize> = (0..batch.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            let mb = batch.select(chunk);
            let (stats, mut actor_grad) = actor_objective(&learner.policy, &mb, cfg.clip_eps, cfg.entropy_coef)?;
            let (closs, mut critic_grad) = critic_objective(&learner.critic, &mb)?;
            metrics.actor_grad_norm += clip_grad_norm(&mut actor_grad, net.max_grad_norm);
            metrics.critic_grad_norm += clip_grad_norm(&mut critic_grad, net.max_grad_norm);
            learner.actor_opt.step(&mut learner.policy.0.params, &actor_grad);
            learner.critic_opt.step(&mut learner.critic.0.params, &critic_grad);
            if learner.policy.params().iter().chain(learner.critic.params()).any(|p| !p.is_finite()) {
                return Err(Error::NonFinite { location: "parameters after optimizer step".into() });
            }
            metrics.actor_loss += stats.loss;
            metrics.critic_loss += closs;
            metrics.entropy += stats.entropy;
            metrics.clip_fraction += stats.clip_fraction;
            metrics.approx_kl += stats.approx_kl;
            metrics.minibatches += 1;
        }
    }
    let k = metrics.minibatches.max(1) as f64;
    metrics.actor_loss /= k;
    metrics.critic_loss /= k;
    metrics.entropy /= k;
    metrics.clip_fraction /= k;
    metrics.approx_kl /= k;
    metrics.actor_grad_norm /= k;
    metrics.critic_grad_norm /= k;
    Ok(metrics)
}
