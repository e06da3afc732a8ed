//! Decentralized multi-agent wrapper around the battlefield: per-agent
//! observations, joint-action stepping, composite rewards and termination.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::airsim::{
    apply_command_and_step, dot, norm, sub, AircraftState, Battlefield, KillEvent, LaunchOutcome,
    ManeuverContext, TacticalAction, Team,
};
use crate::config::{EnvConfig, RewardWeights, SimConfig};
use crate::error::{Error, Result};
use crate::rng;

pub const OBS_DIM: usize = 19;
pub const ACTION_COUNT: usize = TacticalAction::COUNT;
/// Per-enemy features in the critic's global state.
pub const ENEMY_FEATURES: usize = 4;

/// Raw (unnormalized) local observation of one aircraft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub v: f64,
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
    pub missiles: f64,
    /// Distance to the nearest living enemy.
    pub enemy_distance: f64,
    /// Bearing of that enemy relative to the nose, positive to the right.
    pub enemy_bearing: f64,
    /// Enemy speed minus own speed.
    pub enemy_speed_delta: f64,
    /// Enemy altitude minus own altitude.
    pub enemy_altitude_delta: f64,
    pub closing_speed: f64,
    /// Angle off the enemy's tail: 0 when sitting at its six.
    pub aspect: f64,
    pub threat_distance: f64,
    pub threat_bearing: f64,
    pub threat_closing_speed: f64,
    pub threat_altitude_delta: f64,
    pub threat: bool,
}

impl Observation {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        [
            self.x,
            self.y,
            self.z,
            self.v,
            self.theta,
            self.phi,
            self.psi,
            self.missiles,
            self.enemy_distance,
            self.enemy_bearing,
            self.enemy_speed_delta,
            self.enemy_altitude_delta,
            self.closing_speed,
            self.aspect,
            self.threat_distance,
            self.threat_bearing,
            self.threat_closing_speed,
            self.threat_altitude_delta,
            if self.threat { 1.0 } else { 0.0 },
        ]
    }

    /// Network input: positions over the field extent, speeds over `v_max`,
    /// angles over pi, distances over `D_max`, altitudes over the ceiling.
    pub fn normalized(&self, scale: &ObservationScale) -> [f64; OBS_DIM] {
        let s = scale;
        [
            self.x / s.extent_ns,
            self.y / s.extent_ew,
            self.z / s.altitude,
            self.v / s.speed,
            self.theta / PI,
            self.phi / PI,
            self.psi / PI,
            self.missiles / s.missiles,
            self.enemy_distance / s.distance,
            self.enemy_bearing / PI,
            self.enemy_speed_delta / s.speed,
            self.enemy_altitude_delta / s.altitude,
            self.closing_speed / s.speed,
            self.aspect / PI,
            self.threat_distance / s.distance,
            self.threat_bearing / PI,
            self.threat_closing_speed / s.speed,
            self.threat_altitude_delta / s.altitude,
            if self.threat { 1.0 } else { 0.0 },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationScale {
    pub extent_ns: f64,
    pub extent_ew: f64,
    pub altitude: f64,
    pub speed: f64,
    pub distance: f64,
    pub missiles: f64,
}

impl ObservationScale {
    pub fn new(sim: &SimConfig, reward: &RewardWeights) -> Self {
        Self {
            extent_ns: sim.extent_ns,
            extent_ew: sim.extent_ew,
            altitude: sim.altitude_max,
            speed: sim.speed_max,
            distance: reward.d_max,
            missiles: sim.max_missiles.max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ongoing,
    BlueWin,
    RedWin,
    Draw,
}

impl Outcome {
    /// Result sign from `team`'s point of view.
    pub fn result_for(self, team: Team) -> f64 {
        match (self, team) {
            (Outcome::BlueWin, Team::Blue) | (Outcome::RedWin, Team::Red) => 1.0,
            (Outcome::BlueWin, Team::Red) | (Outcome::RedWin, Team::Blue) => -1.0,
            _ => 0.0,
        }
    }

    /// Win credit for blue: 1 for a win, 0.5 for a draw, 0 for a loss.
    pub fn blue_score(self) -> f64 {
        match self {
            Outcome::BlueWin => 1.0,
            Outcome::Draw => 0.5,
            _ => 0.0,
        }
    }
}

/// The three reward components before weighting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    pub result: f64,
    pub advantage: f64,
    pub threat: f64,
}

impl RewardTerms {
    pub fn total(&self, w: &RewardWeights) -> f64 {
        w.w_result * self.result + w.w_advantage * self.advantage + w.w_threat * self.threat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    /// Observation per aircraft; `None` once it is dead.
    pub observations: Vec<Option<Observation>>,
    pub terms: Vec<RewardTerms>,
    pub rewards: Vec<f64>,
    /// Aircraft that were alive (and acted) during this step.
    pub acted: Vec<bool>,
    pub terminal: bool,
    pub outcome: Outcome,
    pub kills: Vec<KillEvent>,
    pub launches: Vec<Option<LaunchOutcome>>,
}

/// Angle between own velocity and the line of sight to the enemy, in [0, pi].
pub fn compute_ata(own: &AircraftState, enemy: &AircraftState) -> Result<f64> {
    let v = own.velocity();
    let los = sub(enemy.position(), own.position());
    let (nv, nl) = (norm(v), norm(los));
    if !(nv > 0.0 && nl > 0.0) {
        return Err(Error::InvalidArgument("ATA needs non-zero velocity and distance".into()));
    }
    Ok((dot(v, los) / (nv * nl)).clamp(-1.0, 1.0).acos())
}

fn relative_bearing(own: &AircraftState, point: [f64; 3]) -> f64 {
    let d = sub(point, own.position());
    crate::airsim::wrap_angle(d[1].atan2(d[0]) - own.psi)
}

/// Tactical advantage: (1 - ATA/pi) * exp(-d / D_max).
pub fn advantage_reward(ata: f64, distance: f64, d_max: f64) -> f64 {
    (1.0 - ata / PI) * (-distance / d_max).exp()
}

/// Missile threat penalty: -exp(-d_m / D_safe) when a missile is inbound.
pub fn threat_reward(threat: bool, missile_distance: f64, d_safe: f64) -> f64 {
    if threat {
        -(-missile_distance / d_safe).exp()
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct AirCombatEnv {
    pub sim: SimConfig,
    pub cfg: EnvConfig,
}

impl AirCombatEnv {
    pub fn new(sim: SimConfig, cfg: EnvConfig) -> Result<Self> {
        sim.validate()?;
        cfg.validate(&sim)?;
        Ok(Self { sim, cfg })
    }

    pub fn team_size(&self) -> usize {
        self.cfg.scenario.team_size
    }

    pub fn n_aircraft(&self) -> usize {
        2 * self.team_size()
    }

    pub fn scale(&self) -> ObservationScale {
        ObservationScale::new(&self.sim, &self.cfg.reward)
    }

    pub fn weights(&self) -> &RewardWeights {
        &self.cfg.reward
    }

    /// Length of the critic's global state vector.
    pub fn global_state_dim(&self) -> usize {
        self.team_size() * (OBS_DIM + ENEMY_FEATURES) + 1
    }

    /// Deploys blue along the southern spawn line heading north and red along
    /// the northern one heading south, with seeded lateral offsets.
    pub fn reset(&self, seed: u64) -> Result<(Battlefield, Vec<Option<Observation>>)> {
        let sc = &self.cfg.scenario;
        if !(sc.team_size == 1 || sc.team_size == 2) {
            return Err(Error::InvalidConfig(format!("team size {} not supported", sc.team_size)));
        }
        let mut rng = rng::stream(seed, &[rng::tag::INIT]);
        let ew = self.sim.extent_ew;
        let mut lateral = || ew * (0.5 + sc.lateral_spread * (rng.gen::<f64>() - 0.5));
        let blue_y: Vec<f64> = (0..sc.team_size).map(|_| lateral()).collect();
        let red_y: Vec<f64> = if sc.mirror_spawns {
            blue_y.clone()
        } else {
            (0..sc.team_size).map(|_| lateral()).collect()
        };
        let make = |team: Team, x: f64, y: f64, psi: f64| AircraftState {
            team,
            x,
            y,
            z: sc.initial_altitude,
            v: sc.initial_speed,
            theta: 0.0,
            phi: 0.0,
            psi,
            missiles: sc.initial_missiles,
            alive: true,
        };
        let south = sc.spawn_margin * self.sim.extent_ns;
        let north = (1.0 - sc.spawn_margin) * self.sim.extent_ns;
        let mut aircraft: Vec<AircraftState> =
            blue_y.iter().map(|&y| make(Team::Blue, south, y, 0.0)).collect();
        aircraft.extend(red_y.iter().map(|&y| make(Team::Red, north, y, PI)));
        let bf = Battlefield::new(&self.sim, aircraft);
        let obs = self.observe_all(&bf);
        Ok((bf, obs))
    }

    fn observe_all(&self, bf: &Battlefield) -> Vec<Option<Observation>> {
        (0..bf.aircraft.len())
            .map(|id| bf.aircraft[id].alive.then(|| self.raw_observation(bf, id)))
            .collect()
    }

    pub fn build_observation(&self, bf: &Battlefield, id: usize) -> Result<Observation> {
        let a = bf.aircraft.get(id).ok_or(Error::InvalidArgument(format!("no aircraft {id}")))?;
        if !a.alive {
            return Err(Error::DeadAircraft(id));
        }
        Ok(self.raw_observation(bf, id))
    }

    /// Observation geometry without the liveness check (used for the step in
    /// which an aircraft dies).
    fn raw_observation(&self, bf: &Battlefield, id: usize) -> Observation {
        let own = &bf.aircraft[id];
        let pos = own.position();
        let vel = own.velocity();
        let d_max = self.cfg.reward.d_max;

        let (enemy_distance, enemy_bearing, enemy_speed_delta, enemy_altitude_delta, closing_speed, aspect) =
            match bf.nearest_enemy(id) {
                Some(e) => {
                    let enemy = &bf.aircraft[e];
                    let los = sub(enemy.position(), pos);
                    let d = norm(los);
                    let evel = enemy.velocity();
                    let (closing, aspect) = if d > 0.0 {
                        let u = los.map(|c| c / d);
                        let closing = dot(sub(vel, evel), u);
                        let aspect = if enemy.v > 0.0 {
                            (dot(evel, u) / enemy.v).clamp(-1.0, 1.0).acos()
                        } else {
                            0.0
                        };
                        (closing, aspect)
                    } else {
                        (0.0, 0.0)
                    };
                    (d, relative_bearing(own, enemy.position()), enemy.v - own.v, enemy.z - own.z, closing, aspect)
                }
                None => (d_max, PI, 0.0, 0.0, 0.0, 0.0),
            };

        let (threat_distance, threat_bearing, threat_closing_speed, threat_altitude_delta, threat) =
            match bf.nearest_threat(id) {
                Some(m) => {
                    let missile = &bf.missiles[m];
                    let los = sub(missile.position, pos);
                    let d = norm(los);
                    let closing = if d > 0.0 {
                        dot(sub(missile.velocity, vel), los) / -d
                    } else {
                        missile.speed
                    };
                    (d, relative_bearing(own, missile.position), closing, missile.position[2] - own.z, true)
                }
                // Benign sentinel: farthest distance, directly behind, not closing.
                None => (d_max, PI, 0.0, 0.0, false),
            };

        Observation {
            x: own.x,
            y: own.y,
            z: own.z,
            v: own.v,
            theta: own.theta,
            phi: own.phi,
            psi: own.psi,
            missiles: own.missiles as f64,
            enemy_distance,
            enemy_bearing,
            enemy_speed_delta,
            enemy_altitude_delta,
            closing_speed,
            aspect,
            threat_distance,
            threat_bearing,
            threat_closing_speed,
            threat_altitude_delta,
            threat,
        }
    }

    /// Reward components of aircraft `id` evaluated on the post-transition battlefield.
    pub fn reward_terms(&self, after: &Battlefield, id: usize, outcome: Outcome) -> RewardTerms {
        let w = &self.cfg.reward;
        let own = &after.aircraft[id];
        let result = outcome.result_for(own.team) * w.win_reward;
        let advantage = match after.nearest_enemy(id) {
            Some(e) => {
                let enemy = &after.aircraft[e];
                let d = norm(sub(enemy.position(), own.position()));
                match compute_ata(own, enemy) {
                    Ok(ata) => advantage_reward(ata, d, w.d_max),
                    // Co-located aircraft: treat as nose-on at zero range.
                    Err(_) => 1.0,
                }
            }
            None => 0.0,
        };
        let threat = match after.nearest_threat(id) {
            Some(m) => threat_reward(true, norm(sub(after.missiles[m].position, own.position())), w.d_safe),
            None => 0.0,
        };
        RewardTerms { result, advantage, threat }
    }

    /// Weighted composite reward of one agent for a transition.
    pub fn compute_reward(
        &self,
        _before: &Battlefield,
        _joint_action: &[usize],
        after: &Battlefield,
        id: usize,
        outcome: Outcome,
    ) -> f64 {
        self.reward_terms(after, id, outcome).total(&self.cfg.reward)
    }

    /// Critic input for `agent`: its own observation, its teammates' (zeros
    /// when dead), true enemy kinematics and the remaining-time fraction.
    pub fn global_state(&self, bf: &Battlefield, agent: usize) -> Vec<f64> {
        let scale = self.scale();
        let team = bf.aircraft[agent].team;
        let mut out = Vec::with_capacity(self.global_state_dim());
        let push_obs = |id: usize, out: &mut Vec<f64>| {
            if bf.aircraft[id].alive || id == agent {
                out.extend(self.raw_observation(bf, id).normalized(&scale));
            } else {
                out.extend([0.0; OBS_DIM]);
            }
        };
        push_obs(agent, &mut out);
        for mate in bf.team_members(team).filter(|&m| m != agent).collect::<Vec<_>>() {
            push_obs(mate, &mut out);
        }
        for e in bf.team_members(team.opponent()).collect::<Vec<_>>() {
            let a = &bf.aircraft[e];
            if a.alive {
                out.extend([a.x / scale.extent_ns, a.y / scale.extent_ew, a.z / scale.altitude, a.v / scale.speed]);
            } else {
                out.extend([0.0; ENEMY_FEATURES]);
            }
        }
        let remaining = 1.0 - bf.step as f64 / self.sim.max_steps as f64;
        out.push(remaining.max(0.0));
        out
    }

    fn maneuver_context(&self, bf: &Battlefield, id: usize) -> ManeuverContext {
        let own = &bf.aircraft[id];
        let beam_target = bf
            .nearest_threat(id)
            .map(|m| bf.missiles[m].position)
            .or_else(|| bf.nearest_enemy(id).map(|e| bf.aircraft[e].position()));
        let beam_bearing = beam_target.and_then(|p| {
            let d = sub(p, own.position());
            (d[0] != 0.0 || d[1] != 0.0).then(|| d[1].atan2(d[0]))
        });
        ManeuverContext { sim_time: bf.sim_time, beam_bearing }
    }

    /// Applies one joint action (one index per aircraft; entries of dead
    /// aircraft are ignored), steps missiles, resolves kills, and scores.
    pub fn step(&self, bf: &mut Battlefield, joint_actions: &[usize]) -> Result<StepResult> {
        let n = bf.aircraft.len();
        if joint_actions.len() != n {
            return Err(Error::MalformedAction(format!("expected {n} actions, got {}", joint_actions.len())));
        }
        let acted: Vec<bool> = bf.aircraft.iter().map(|a| a.alive).collect();
        let mut commands = vec![None; n];
        for id in 0..n {
            if acted[id] {
                commands[id] = Some(TacticalAction::try_from(joint_actions[id]).map_err(|_| {
                    Error::MalformedAction(format!("action {} for aircraft {id}", joint_actions[id]))
                })?);
            }
        }
        let dt = self.sim.dt;
        let contexts: Vec<ManeuverContext> = (0..n).map(|id| self.maneuver_context(bf, id)).collect();
        for id in 0..n {
            if let Some(cmd) = commands[id] {
                bf.aircraft[id] = apply_command_and_step(&bf.aircraft[id], cmd, &contexts[id], dt, &self.sim)?;
            }
        }
        bf.step_missiles(dt, &self.sim)?;
        let mut launches = vec![None; n];
        for id in 0..n {
            if commands[id] == Some(TacticalAction::Fire) {
                launches[id] = Some(match bf.nearest_enemy(id) {
                    Some(target) => bf.spawn_missile(id, target, &self.sim),
                    None => LaunchOutcome::NoTarget,
                });
            }
        }
        bf.sim_time += dt;
        bf.step += 1;
        let kills = bf.check_outcomes(&self.sim);

        let blue = bf.survivors(Team::Blue);
        let red = bf.survivors(Team::Red);
        let outcome = if blue == 0 && red == 0 {
            Outcome::Draw
        } else if red == 0 {
            Outcome::BlueWin
        } else if blue == 0 {
            Outcome::RedWin
        } else if bf.step >= self.sim.max_steps {
            match blue.cmp(&red) {
                std::cmp::Ordering::Greater => Outcome::BlueWin,
                std::cmp::Ordering::Less => Outcome::RedWin,
                std::cmp::Ordering::Equal => Outcome::Draw,
            }
        } else {
            Outcome::Ongoing
        };
        let terminal = outcome != Outcome::Ongoing;

        // Shaping applies to aircraft that acted this step; the settled
        // result goes to every member of a team.
        let terms: Vec<RewardTerms> = (0..n)
            .map(|id| {
                let t = self.reward_terms(bf, id, outcome);
                if acted[id] {
                    t
                } else {
                    RewardTerms { result: t.result, advantage: 0.0, threat: 0.0 }
                }
            })
            .collect();
        let rewards = terms.iter().map(|t| t.total(&self.cfg.reward)).collect();
        Ok(StepResult {
            observations: self.observe_all(bf),
            terms,
            rewards,
            acted,
            terminal,
            outcome,
            kills,
            launches,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn env(team_size: usize) -> AirCombatEnv {
        let cfg = EnvConfig {
            scenario: ScenarioConfig { team_size, ..Default::default() },
            ..Default::default()
        };
        AirCombatEnv::new(SimConfig::default(), cfg).unwrap()
    }

    fn aircraft(team: Team, x: f64, y: f64, psi: f64) -> AircraftState {
        AircraftState { team, x, y, z: 3000.0, v: 200.0, theta: 0.0, phi: 0.0, psi, missiles: 4, alive: true }
    }

    #[test]
    fn reset_places_teams_per_scenario() {
        let e = env(2);
        let (bf, obs) = e.reset(3).unwrap();
        assert_eq!(bf.aircraft.len(), 4);
        for a in &bf.aircraft {
            assert_eq!((a.z, a.v, a.missiles), (3000.0, 180.0, 4));
            assert!(a.alive);
        }
        assert!(bf.aircraft[0].x < 0.5 * e.sim.extent_ns && bf.aircraft[2].x > 0.5 * e.sim.extent_ns);
        assert!(obs.iter().all(|o| o.is_some()));
        let (again, _) = e.reset(3).unwrap();
        assert_eq!(bf, again);
    }

    #[test]
    fn reset_offsets_vary_with_seed() {
        let e = env(2);
        let ys: Vec<f64> = (0..100).map(|s| e.reset(s).unwrap().0.aircraft[0].y).collect();
        let distinct = ys.iter().enumerate().filter(|(i, y)| ys[..*i].iter().all(|o| o != *y)).count();
        assert_eq!(distinct, 100);
        let mean = ys.iter().sum::<f64>() / 100.0;
        assert!((mean - 50_000.0).abs() < 5_000.0);
    }

    #[test]
    fn team_size_is_validated() {
        let cfg = EnvConfig { scenario: ScenarioConfig { team_size: 3, ..Default::default() }, ..Default::default() };
        assert!(AirCombatEnv::new(SimConfig::default(), cfg).is_err());
    }

    #[test]
    fn observation_without_threat_uses_sentinel() {
        let e = env(1);
        let (bf, _) = e.reset(0).unwrap();
        let o = e.build_observation(&bf, 0).unwrap();
        assert_eq!(o.to_array().len(), OBS_DIM);
        assert!(!o.threat);
        assert_eq!(
            (o.threat_distance, o.threat_bearing, o.threat_closing_speed, o.threat_altitude_delta),
            (e.cfg.reward.d_max, PI, 0.0, 0.0)
        );
        // Enemy dead ahead at co-altitude.
        assert_eq!(o.enemy_altitude_delta, 0.0);
        assert!(o.enemy_bearing.abs() < 1e-12);
        assert!(o.closing_speed > 0.0);
    }

    #[test]
    fn nearest_enemy_feeds_the_relative_block() {
        let e = env(2);
        let bf = Battlefield::new(
            &e.sim,
            vec![
                aircraft(Team::Blue, 50_000.0, 50_000.0, 0.0),
                aircraft(Team::Blue, 40_000.0, 50_000.0, 0.0),
                aircraft(Team::Red, 100_000.0, 50_000.0, PI),
                aircraft(Team::Red, 60_000.0, 50_000.0, PI),
            ],
        );
        let o = e.build_observation(&bf, 0).unwrap();
        assert!((o.enemy_distance - 10_000.0).abs() < 1e-9);
        let mut dead = bf.clone();
        dead.aircraft[0].alive = false;
        assert!(matches!(e.build_observation(&dead, 0), Err(Error::DeadAircraft(0))));
    }

    #[test]
    fn threat_block_tracks_incoming_missile() {
        let e = env(1);
        let mut bf = Battlefield::new(
            &e.sim,
            vec![aircraft(Team::Blue, 50_000.0, 50_000.0, 0.0), aircraft(Team::Red, 70_000.0, 50_000.0, PI)],
        );
        bf.spawn_missile(1, 0, &e.sim);
        let o = e.build_observation(&bf, 0).unwrap();
        assert!(o.threat);
        assert!((o.threat_distance - 20_000.0).abs() < 1e-9);
        assert!((o.threat_closing_speed - 1200.0).abs() < 1e-9);
        assert!(o.threat_bearing.abs() < 1e-12);
    }

    #[test]
    fn ata_reference_geometries() {
        let own = aircraft(Team::Blue, 0.0, 0.0, 0.0);
        let ahead = aircraft(Team::Red, 1000.0, 0.0, 0.0);
        let behind = aircraft(Team::Red, -1000.0, 0.0, 0.0);
        let east = aircraft(Team::Red, 0.0, 1000.0, 0.0);
        assert!(compute_ata(&own, &ahead).unwrap().abs() < 1e-12);
        assert!((compute_ata(&own, &behind).unwrap() - PI).abs() < 1e-12);
        assert!((compute_ata(&own, &east).unwrap() - PI / 2.0).abs() < 1e-12);
        assert!(compute_ata(&own, &own).is_err());
    }

    #[test]
    fn reward_reference_values() {
        let w = RewardWeights::default();
        let shaping = RewardTerms { result: 0.0, advantage: advantage_reward(0.0, 0.0, w.d_max), threat: 0.0 };
        assert!((shaping.total(&w) - 0.4).abs() < 1e-15);
        let win = RewardTerms { result: 1000.0, advantage: advantage_reward(PI, 5000.0, w.d_max), threat: 0.0 };
        assert!((win.total(&w) - 300.0).abs() < 1e-12);
        let threatened = RewardTerms { result: 0.0, advantage: 0.0, threat: threat_reward(true, w.d_safe, w.d_safe) };
        assert!((threatened.total(&w) - (-0.3 * (-1f64).exp())).abs() < 1e-15);
        assert!((threatened.total(&w) + 0.11036).abs() < 1e-5);
    }

    #[test]
    fn advantage_monotonicity() {
        let d_max = 100_000.0;
        for i in 0..50 {
            let d = i as f64 * 2000.0;
            let a = i as f64 * PI / 60.0;
            assert!(advantage_reward(0.3, d, d_max) > advantage_reward(0.3, d + 1.0, d_max));
            assert!(advantage_reward(a, 5000.0, d_max) > advantage_reward(a + 0.01, 5000.0, d_max));
        }
    }

    fn endgame(e: &AirCombatEnv, blue_alive: [bool; 2], red_alive: [bool; 2], step: usize) -> Battlefield {
        let mut bf = Battlefield::new(
            &e.sim,
            vec![
                aircraft(Team::Blue, 50_000.0, 30_000.0, 0.0),
                aircraft(Team::Blue, 50_000.0, 70_000.0, 0.0),
                aircraft(Team::Red, 150_000.0, 30_000.0, PI),
                aircraft(Team::Red, 150_000.0, 70_000.0, PI),
            ],
        );
        bf.aircraft[0].alive = blue_alive[0];
        bf.aircraft[1].alive = blue_alive[1];
        bf.aircraft[2].alive = red_alive[0];
        bf.aircraft[3].alive = red_alive[1];
        bf.step = step;
        bf
    }

    #[test]
    fn termination_rules() {
        let e = env(2);
        let last = e.sim.max_steps - 1;

        let mut bf = endgame(&e, [true, true], [true, true], 0);
        let r = e.step(&mut bf, &[0; 4]).unwrap();
        assert!(!r.terminal && r.outcome == Outcome::Ongoing);

        let mut bf = endgame(&e, [true, true], [false, true], 10);
        bf.aircraft[3].z = 50.0; // dives into the ground this step
        let r = e.step(&mut bf, &[0; 4]).unwrap();
        assert_eq!(r.outcome, Outcome::BlueWin);
        assert!(r.terminal);
        assert_eq!(r.terms[0].result, 1000.0);
        assert_eq!(r.terms[1].result, 1000.0);
        assert_eq!(r.terms[2].result, -1000.0);
        assert_eq!(r.terms[2].advantage, 0.0);

        let mut bf = endgame(&e, [true, true], [true, false], last);
        assert_eq!(e.step(&mut bf, &[0; 4]).unwrap().outcome, Outcome::BlueWin);
        let mut bf = endgame(&e, [true, false], [true, false], last);
        assert_eq!(e.step(&mut bf, &[0; 4]).unwrap().outcome, Outcome::Draw);
        let mut bf = endgame(&e, [false, true], [true, true], last);
        assert_eq!(e.step(&mut bf, &[0; 4]).unwrap().outcome, Outcome::RedWin);
    }

    #[test]
    fn malformed_actions_are_rejected_dead_entries_ignored() {
        let e = env(2);
        let (mut bf, _) = e.reset(0).unwrap();
        assert!(matches!(e.step(&mut bf, &[0; 3]), Err(Error::MalformedAction(_))));
        assert!(matches!(e.step(&mut bf, &[0, 0, 0, 12]), Err(Error::MalformedAction(_))));
        bf.aircraft[3].alive = false;
        let r = e.step(&mut bf, &[0, 0, 0, 12]).unwrap();
        assert!(!r.acted[3] && r.observations[3].is_none());
    }

    #[test]
    fn fire_launches_at_nearest_enemy() {
        let e = env(1);
        let (mut bf, _) = e.reset(0).unwrap();
        let r = e.step(&mut bf, &[9, 0]).unwrap();
        assert_eq!(r.launches[0], Some(LaunchOutcome::Launched(0)));
        assert_eq!(bf.aircraft[0].missiles, 3);
        assert!(r.observations[1].unwrap().threat);
    }

    #[test]
    fn global_state_dimension() {
        for size in [1, 2] {
            let e = env(size);
            let (bf, _) = e.reset(1).unwrap();
            for id in 0..bf.aircraft.len() {
                assert_eq!(e.global_state(&bf, id).len(), e.global_state_dim());
            }
        }
        assert_eq!(env(2).global_state_dim(), 47);
    }
}
