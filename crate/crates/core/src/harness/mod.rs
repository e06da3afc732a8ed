//! Training orchestration, evaluation suites and trajectory export.

mod eval;
mod export;
mod train;

pub use eval::{round_robin, RoundRobin};
pub use export::{export_header, export_trajectories};
pub use train::{train, MetricsRow, RunSummary, Trainer, TrainerState};

pub use crate::rollout::{evaluate_winrate, WinCounts};

use std::path::PathBuf;
use std::str::FromStr;

use crate::checkpoint::PolicyCheckpoint;
use crate::config::{EnvConfig, RuleConfig, SimConfig};
use crate::curriculum::RulePolicy;
use crate::env::AirCombatEnv;
use crate::error::Result;
use crate::rollout::{NetPolicy, Policy, RandomPolicy, StraightPolicy};

/// A policy named on the command line: a built-in or a checkpoint path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySpec {
    Rule,
    Random,
    Straight,
    Checkpoint(PathBuf),
}

impl FromStr for PolicySpec {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "rule" => PolicySpec::Rule,
            "random" => PolicySpec::Random,
            "straight" => PolicySpec::Straight,
            path => PolicySpec::Checkpoint(PathBuf::from(path)),
        })
    }
}

pub struct LoadedPolicy {
    pub label: String,
    pub policy: Box<dyn Policy>,
    pub checkpoint: Option<PolicyCheckpoint>,
}

pub fn load_policy(spec: &PolicySpec) -> Result<LoadedPolicy> {
    Ok(match spec {
        PolicySpec::Rule => {
            LoadedPolicy { label: "rule".into(), policy: Box::new(RulePolicy::new(RuleConfig::default())), checkpoint: None }
        }
        PolicySpec::Random => LoadedPolicy { label: "random".into(), policy: Box::new(RandomPolicy), checkpoint: None },
        PolicySpec::Straight => {
            LoadedPolicy { label: "straight".into(), policy: Box::new(StraightPolicy), checkpoint: None }
        }
        PolicySpec::Checkpoint(path) => {
            let ckpt = PolicyCheckpoint::load(path)?;
            let label = path.file_stem().map_or_else(|| ckpt.label.clone(), |s| s.to_string_lossy().into_owned());
            LoadedPolicy {
                policy: Box::new(NetPolicy::new(ckpt.policy.clone(), label.clone())),
                label,
                checkpoint: Some(ckpt),
            }
        }
    })
}

/// Environment for a match: taken from the first checkpoint that carries
/// one, defaults otherwise.
pub fn match_env(policies: &[&LoadedPolicy]) -> Result<AirCombatEnv> {
    let (sim, env) = policies
        .iter()
        .find_map(|p| p.checkpoint.as_ref().map(|c| (c.sim.clone(), c.env.clone())))
        .unwrap_or_else(|| (SimConfig::default(), EnvConfig::default()));
    AirCombatEnv::new(sim, env)
}
