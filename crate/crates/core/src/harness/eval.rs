use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use super::{load_policy, match_env, LoadedPolicy, PolicySpec};
use crate::error::{Error, Result};
use crate::rollout::{evaluate_winrate, WinCounts};
use crate::rng;

/// Pairwise results. `wins[a][b]` counts games `a` won against `b`;
/// `draws[a][b]` is symmetric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRobin {
    pub labels: Vec<String>,
    pub episodes: usize,
    pub wins: Vec<Vec<usize>>,
    pub draws: Vec<Vec<usize>>,
    /// Inputs that could not be loaded, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

impl RoundRobin {
    pub fn win_rate(&self, a: usize, b: usize) -> f64 {
        self.wins[a][b] as f64 / self.episodes as f64
    }

    /// Matrix of win rates with a header row and a label column.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["policy".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for a in 0..self.labels.len() {
            let mut row = vec![self.labels[a].clone()];
            row.extend((0..self.labels.len()).map(|b| self.win_rate(a, b).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Plays every pair (including each policy against itself). Within a pair,
/// even-numbered games put the first policy on the blue side and odd ones
/// the second.
pub fn round_robin(specs: &[PolicySpec], episodes: usize, seed: u64) -> Result<RoundRobin> {
    if specs.len() < 2 {
        return Err(Error::InvalidArgument("round robin needs at least two policies".into()));
    }
    if episodes == 0 {
        return Err(Error::InvalidArgument("round robin needs at least one episode per pair".into()));
    }
    let mut loaded: Vec<LoadedPolicy> = Vec::new();
    let mut skipped = Vec::new();
    for spec in specs {
        match load_policy(spec) {
            Ok(p) => loaded.push(p),
            Err(e) => {
                let path = match spec {
                    PolicySpec::Checkpoint(p) => p.clone(),
                    _ => PathBuf::new(),
                };
                skipped.push((path, e.to_string()));
            }
        }
    }
    if loaded.is_empty() {
        return Err(Error::InvalidArgument("no policy could be loaded".into()));
    }
    let env = match_env(&loaded.iter().collect::<Vec<_>>())?;
    let n = loaded.len();
    let mut wins = vec![vec![0; n]; n];
    let mut draws = vec![vec![0; n]; n];
    for a in 0..n {
        for b in a..n {
            let first_blue = episodes.div_ceil(2);
            let pair_seed = rng::derive_seed(seed, &[a as u64, b as u64]);
            let ab = evaluate_winrate(&env, loaded[a].policy.as_ref(), loaded[b].policy.as_ref(), first_blue, pair_seed)?;
            let ba = if episodes > first_blue {
                evaluate_winrate(
                    &env,
                    loaded[b].policy.as_ref(),
                    loaded[a].policy.as_ref(),
                    episodes - first_blue,
                    rng::derive_seed(pair_seed, &[1]),
                )?
            } else {
                WinCounts::default()
            };
            if a == b {
                // Self-play: credit the blue side.
                wins[a][a] = ab.blue + ba.blue;
                draws[a][a] = ab.draws + ba.draws;
            } else {
                wins[a][b] = ab.blue + ba.red;
                wins[b][a] = ab.red + ba.blue;
                draws[a][b] = ab.draws + ba.draws;
                draws[b][a] = draws[a][b];
            }
        }
    }
    Ok(RoundRobin { labels: loaded.into_iter().map(|p| p.label).collect(), episodes, wins, draws, skipped })
}
