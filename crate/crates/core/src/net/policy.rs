use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::env::{ACTION_COUNT, OBS_DIM};
use crate::error::{Error, Result};

/// Shared actor: local observation to a categorical distribution over the
/// tactical commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams(pub Mlp);

/// Centralized critic: global state to a scalar value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticParams(pub Mlp);

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input).chain(hidden.iter().copied()).chain(std::iter::once(output)).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Shannon entropy of a probability vector (0 log 0 taken as 0).
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// `d H / d logits` for a softmax distribution: `-p_k (log p_k + H)`.
pub fn entropy_logit_gradient(probs: &[f64]) -> Vec<f64> {
    let h = entropy(probs);
    probs.iter().map(|&p| if p > 0.0 { -p * (p.ln() + h) } else { 0.0 }).collect()
}

impl PolicyParams {
    pub fn new(hidden: &[usize], head_gain: f64, rng: &mut impl Rng) -> Self {
        Self(Mlp::orthogonal_init(&layer_sizes(OBS_DIM, hidden, ACTION_COUNT), 1.0, head_gain, rng))
    }

    pub fn zeros(hidden: &[usize]) -> Self {
        Self(Mlp::zeros(&layer_sizes(OBS_DIM, hidden, ACTION_COUNT)))
    }

    pub fn params(&self) -> &[f64] {
        &self.0.params
    }

    pub fn params_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0.params
    }

    pub fn len(&self) -> usize {
        self.0.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.params.is_empty()
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        Ok(Self(Mlp::from_params(&self.0.sizes, params)?))
    }

    pub fn logits(&self, obs: &[f64]) -> Result<Vec<f64>> {
        if self.0.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite { location: "policy parameters".into() });
        }
        Ok(self.0.forward(obs)?.output().to_vec())
    }

    /// Action probabilities for one normalized observation.
    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(obs)?))
    }

    pub fn entropy(&self, obs: &[f64]) -> Result<f64> {
        Ok(entropy(&self.forward(obs)?))
    }

    /// Mean entropy over a batch and its gradient with respect to the parameters.
    pub fn entropy_gradient(&self, batch: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("entropy gradient needs a non-empty batch".into()));
        }
        let n = batch.len() as f64;
        let mut grad = vec![0.0; self.len()];
        let mut total = 0.0;
        for obs in batch {
            let cache = self.0.forward(obs)?;
            let probs = softmax(cache.output());
            total += entropy(&probs);
            let g: Vec<f64> = entropy_logit_gradient(&probs).into_iter().map(|x| x / n).collect();
            self.0.backward(&cache, &g, &mut grad)?;
        }
        Ok((total / n, grad))
    }

    /// Batch-mean entropy gradient scaled to `g / (||g|| + eps)`.
    pub fn entropy_ascent_direction(&self, batch: &[Vec<f64>], eps: f64) -> Result<Vec<f64>> {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument("entropy direction needs eps > 0".into()));
        }
        let (_, grad) = self.entropy_gradient(batch)?;
        let len = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !len.is_finite() {
            return Err(Error::NonFinite { location: "entropy gradient".into() });
        }
        Ok(grad.into_iter().map(|g| g / (len + eps)).collect())
    }

    /// Draws an action and returns it with its log-probability.
    pub fn sample(&self, obs: &[f64], rng: &mut impl Rng) -> Result<(usize, f64)> {
        let logits = self.logits(obs)?;
        let logp = log_softmax(&logits);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (a, lp) in logp.iter().enumerate() {
            acc += lp.exp();
            if u < acc {
                return Ok((a, *lp));
            }
        }
        let last = logp.len() - 1;
        Ok((last, logp[last]))
    }
}

impl CriticParams {
    pub fn new(input: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        Self(Mlp::orthogonal_init(&layer_sizes(input, hidden, 1), 1.0, 1.0, rng))
    }

    pub fn zeros(input: usize, hidden: &[usize]) -> Self {
        Self(Mlp::zeros(&layer_sizes(input, hidden, 1)))
    }

    pub fn params(&self) -> &[f64] {
        &self.0.params
    }

    pub fn len(&self) -> usize {
        self.0.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.params.is_empty()
    }

    pub fn value(&self, state: &[f64]) -> Result<f64> {
        Ok(self.0.forward(state)?.output()[0])
    }
}
