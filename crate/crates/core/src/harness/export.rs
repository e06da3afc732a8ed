use std::fs::{self, File};
use std::path::{Path, PathBuf};

use super::{load_policy, match_env, PolicySpec};
use crate::airsim::Team;
use crate::error::{Error, Result};
use crate::rng;
use crate::rollout::{run_episode_observed, Frame};

/// Column names of an exported episode for `n_aircraft` aircraft and
/// `missile_slots` missile slots (one per possible launch).
pub fn export_header(n_aircraft: usize, missile_slots: usize) -> Vec<String> {
    let mut h = vec!["step".to_string(), "sim_time".to_string()];
    for i in 0..n_aircraft {
        for f in ["id", "team", "x", "y", "z", "v", "theta", "phi", "psi", "missiles", "alive"] {
            h.push(format!("a{i}_{f}"));
        }
    }
    for k in 0..missile_slots {
        for f in ["id", "x", "y", "z", "target", "active"] {
            h.push(format!("m{k}_{f}"));
        }
    }
    for i in 0..n_aircraft {
        for f in ["action", "r_result", "r_advantage", "r_threat", "reward"] {
            h.push(format!("a{i}_{f}"));
        }
    }
    h
}

fn frame_row(frame: &Frame, missile_slots: usize) -> Vec<String> {
    let bf = frame.battlefield;
    let mut row = vec![bf.step.to_string(), bf.sim_time.to_string()];
    for (i, a) in bf.aircraft.iter().enumerate() {
        let team = match a.team {
            Team::Blue => "blue",
            Team::Red => "red",
        };
        row.push(i.to_string());
        row.push(team.to_string());
        for v in [a.x, a.y, a.z, a.v, a.theta, a.phi, a.psi] {
            row.push(v.to_string());
        }
        row.push(a.missiles.to_string());
        row.push(a.alive.to_string());
    }
    for k in 0..missile_slots {
        match bf.missiles.get(k) {
            Some(m) => {
                row.push(m.id.to_string());
                row.extend(m.position.iter().map(f64::to_string));
                row.push(m.target.to_string());
                row.push(m.active.to_string());
            }
            None => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
    }
    for i in 0..bf.aircraft.len() {
        match (frame.actions, frame.result) {
            (Some(actions), Some(result)) if result.acted[i] => {
                let t = &result.terms[i];
                row.push(actions[i].to_string());
                row.extend([t.result, t.advantage, t.threat, result.rewards[i]].iter().map(f64::to_string));
            }
            (Some(_), Some(result)) => {
                // Dead aircraft still receive the settled result.
                let t = &result.terms[i];
                row.push(String::new());
                row.extend([t.result, t.advantage, t.threat, result.rewards[i]].iter().map(f64::to_string));
            }
            _ => row.extend(std::iter::repeat_n(String::new(), 5)),
        }
    }
    row
}

/// Writes one CSV per episode (`episode_0000.csv`, ...) into `out_dir`.
pub fn export_trajectories(
    blue: &PolicySpec,
    red: &PolicySpec,
    episodes: usize,
    out_dir: &Path,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("export needs at least one episode".into()));
    }
    let blue = load_policy(blue)?;
    let red = load_policy(red)?;
    let env = match_env(&[&blue, &red])?;
    fs::create_dir_all(out_dir)?;
    let paths: Vec<PathBuf> = (0..episodes).map(|i| out_dir.join(format!("episode_{i:04}.csv"))).collect();
    let mut files = Vec::with_capacity(episodes);
    for p in &paths {
        files.push(File::create(p).map_err(|e| Error::Checkpoint { path: p.clone(), message: e.to_string() })?);
    }
    let slots = env.n_aircraft() * env.cfg.scenario.initial_missiles.min(env.sim.max_missiles) as usize;
    let header = export_header(env.n_aircraft(), slots);
    for (i, file) in files.into_iter().enumerate() {
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&header)?;
        let mut failure: Option<Error> = None;
        let ep_seed = rng::derive_seed(seed, &[rng::tag::EVAL, i as u64]);
        run_episode_observed(&env, blue.policy.as_ref(), red.policy.as_ref(), ep_seed, &mut |frame| {
            if failure.is_none() {
                if let Err(e) = w.write_record(frame_row(frame, slots)) {
                    failure = Some(e.into());
                }
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        w.flush()?;
    }
    Ok(paths)
}
