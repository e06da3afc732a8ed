//! Population phase: entropy-regularized mutation around the main policy,
//! fitness evaluation, elite selection and conditional soft injection.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::EvoConfig;
use crate::env::AirCombatEnv;
use crate::error::{Error, Result};
use crate::net::PolicyParams;
use crate::rollout::{run_episode, Episode, NetPolicy, Policy};

/// Offspring `theta + xi + eta * g / (|g| + eps)` with `xi ~ N(0, sigma^2 I)`
/// and `g` the batch entropy gradient. Returns the offspring and how many of
/// them fell back to pure Gaussian mutation.
pub fn generate_offspring(
    theta: &PolicyParams,
    obs_batch: &[Vec<f64>],
    cfg: &EvoConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<PolicyParams>, usize)> {
    if cfg.population == 0 {
        return Err(Error::InvalidArgument("population must be >= 1".into()));
    }
    let direction = if cfg.entropy_step == 0.0 || obs_batch.is_empty() {
        None
    } else {
        theta.entropy_ascent_direction(obs_batch, cfg.entropy_eps).ok()
    };
    let fallbacks = if direction.is_none() && cfg.entropy_step != 0.0 { cfg.population } else { 0 };
    let mut out = Vec::with_capacity(cfg.population);
    for _ in 0..cfg.population {
        let params: Vec<f64> = theta
            .params()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let xi = cfg.mutation_std * rng.sample::<f64, _>(StandardNormal);
                let drift = direction.as_ref().map_or(0.0, |d| cfg.entropy_step * d[i]);
                p + xi + drift
            })
            .collect();
        out.push(theta.with_params(params)?);
    }
    Ok((out, fallbacks))
}

/// Fitness and the trajectories gathered while measuring it.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedIndividual {
    pub params: PolicyParams,
    pub fitness: f64,
    pub episodes: Vec<Episode>,
    pub failed_rounds: usize,
}

/// Mean of per-episode discounted team returns.
pub fn fitness_of(episodes: &[Episode], gamma: f64) -> f64 {
    episodes.iter().map(|e| e.discounted_return(gamma)).sum::<f64>() / episodes.len() as f64
}

/// Plays one episode per seed against `opponent`. Failed rounds are dropped;
/// the call fails only when every round does.
pub fn evaluate_fitness(
    env: &AirCombatEnv,
    params: &PolicyParams,
    opponent: &dyn Policy,
    seeds: &[u64],
    gamma: f64,
) -> Result<EvaluatedIndividual> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("fitness needs at least one round".into()));
    }
    let policy = NetPolicy::new(params.clone(), "candidate");
    let results: Vec<Result<Episode>> =
        seeds.par_iter().map(|&seed| run_episode(env, &policy, opponent, seed)).collect();
    let failed_rounds = results.iter().filter(|r| r.is_err()).count();
    let episodes: Vec<Episode> = results.into_iter().filter_map(|r| r.ok()).collect();
    if episodes.is_empty() {
        return Err(Error::AllRoundsFailed);
    }
    Ok(EvaluatedIndividual { params: params.clone(), fitness: fitness_of(&episodes, gamma), episodes, failed_rounds })
}

/// Linear interpolation from `tau_init` to `tau_final` over training progress.
pub fn tau_schedule(progress: f64, tau_init: f64, tau_final: f64) -> f64 {
    let p = progress.clamp(0.0, 1.0);
    (1.0 - p) * tau_init + p * tau_final
}

/// `(1 - tau) * current + tau * elite`, coordinate-wise.
pub fn soft_update(current: &PolicyParams, elite: &PolicyParams, tau: f64) -> Result<PolicyParams> {
    if current.len() != elite.len() {
        return Err(Error::ShapeMismatch { expected: current.len(), actual: elite.len() });
    }
    let mixed = current.params().iter().zip(elite.params()).map(|(a, b)| (1.0 - tau) * a + tau * b).collect();
    current.with_params(mixed)
}

/// Index of the fittest individual, lowest index on ties.
pub fn elite_index(population: &[EvaluatedIndividual]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, ind) in population.iter().enumerate() {
        if best.is_none_or(|b| ind.fitness > population[b].fitness) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionReport {
    pub elite: usize,
    pub elite_fitness: f64,
    pub main_fitness: f64,
    pub tau: f64,
    pub injected: bool,
}

/// Blends the elite into the main policy when it beats the main policy's
/// fitness by more than the margin. The elite index is reported either way
/// so its trajectories can be replayed.
pub fn select_and_inject(
    theta: &PolicyParams,
    population: &[EvaluatedIndividual],
    main_fitness: f64,
    cfg: &EvoConfig,
    progress: f64,
) -> Result<(PolicyParams, InjectionReport)> {
    let elite = elite_index(population).ok_or(Error::InvalidArgument("empty population".into()))?;
    let tau = tau_schedule(progress, cfg.tau_init, cfg.tau_final);
    let elite_fitness = population[elite].fitness;
    let injected = elite_fitness > main_fitness + cfg.margin;
    let next = if injected { soft_update(theta, &population[elite].params, tau)? } else { theta.clone() };
    Ok((next, InjectionReport { elite, elite_fitness, main_fitness, tau, injected }))
}
