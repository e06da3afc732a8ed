//! Point-mass flight and missile kinematics.
//!
//! Ground frame: `x` points north, `y` points east, `z` is altitude. Heading
//! `psi` is measured from north towards east, so a positive heading change is
//! a right turn. Pitch `theta` is the flight-path angle.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

pub type Vec3 = [f64; 3];

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Team {
    Blue,
    Red,
}

impl Team {
    pub fn opponent(self) -> Team {
        match self {
            Team::Blue => Team::Red,
            Team::Red => Team::Blue,
        }
    }
}

/// The ten tactical commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TacticalAction {
    Straight,
    TurnLeft,
    TurnRight,
    Climb,
    Dive,
    Accelerate,
    Decelerate,
    Weave,
    Notch,
    Fire,
}

impl TacticalAction {
    pub const COUNT: usize = 10;

    pub const ALL: [TacticalAction; 10] = [
        TacticalAction::Straight,
        TacticalAction::TurnLeft,
        TacticalAction::TurnRight,
        TacticalAction::Climb,
        TacticalAction::Dive,
        TacticalAction::Accelerate,
        TacticalAction::Decelerate,
        TacticalAction::Weave,
        TacticalAction::Notch,
        TacticalAction::Fire,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl TryFrom<usize> for TacticalAction {
    type Error = Error;

    fn try_from(index: usize) -> Result<Self> {
        Self::ALL.get(index).copied().ok_or(Error::UnknownCommand(index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AircraftState {
    pub team: Team,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub v: f64,
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
    pub missiles: u32,
    pub alive: bool,
}

impl AircraftState {
    pub fn position(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    pub fn velocity(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.psi.sin_cos();
        [self.v * ct * cp, self.v * ct * sp, self.v * st]
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.z, self.v, self.theta, self.phi, self.psi]
            .iter()
            .all(|c| c.is_finite())
    }
}

/// Situational input some commands need beyond the aircraft's own state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ManeuverContext {
    pub sim_time: f64,
    /// Absolute bearing (radians from north) to the object a notch should beam.
    pub beam_bearing: Option<f64>,
}

/// Advances one aircraft `dt` seconds under a tactical command.
///
/// Each command sets a heading, vertical-speed and speed target which is
/// tracked at the configured bounded rates. `Straight` keeps the current
/// flight path exactly; every command other than climb and dive levels off.
pub fn apply_command_and_step(
    state: &AircraftState,
    action: TacticalAction,
    ctx: &ManeuverContext,
    dt: f64,
    cfg: &SimConfig,
) -> Result<AircraftState> {
    if !state.alive {
        return Err(Error::AircraftNotAlive);
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }

    let turn = cfg.turn_magnitude();
    let heading_target = match action {
        TacticalAction::TurnLeft => state.psi - turn,
        TacticalAction::TurnRight => state.psi + turn,
        TacticalAction::Weave => {
            let leg = (ctx.sim_time / cfg.weave_period).floor() as i64;
            if leg.rem_euclid(2) == 0 {
                state.psi + turn
            } else {
                state.psi - turn
            }
        }
        TacticalAction::Notch => match ctx.beam_bearing {
            Some(bearing) => {
                let a = wrap_angle(bearing + FRAC_PI_2);
                let b = wrap_angle(bearing - FRAC_PI_2);
                if wrap_angle(a - state.psi).abs() <= wrap_angle(b - state.psi).abs() {
                    a
                } else {
                    b
                }
            }
            None => state.psi,
        },
        _ => state.psi,
    };
    let max_turn = cfg.turn_rate() * dt;
    let heading_change = wrap_angle(heading_target - state.psi).clamp(-max_turn, max_turn);

    let speed_target = match action {
        TacticalAction::Accelerate => state.v + cfg.speed_step,
        TacticalAction::Decelerate => state.v - cfg.speed_step,
        _ => state.v,
    };
    let max_dv = cfg.acceleration * dt;
    let v_new = (state.v + (speed_target - state.v).clamp(-max_dv, max_dv))
        .clamp(cfg.speed_min, cfg.speed_max);
    let v_mean = 0.5 * (state.v + v_new);

    let theta_new = match action {
        TacticalAction::Straight => state.theta,
        TacticalAction::Climb | TacticalAction::Dive => {
            let requested = cfg.altitude_step.min(cfg.climb_rate * dt) / dt;
            let vz = if action == TacticalAction::Climb { requested } else { -requested };
            (vz / v_mean).clamp(-1.0, 1.0).asin()
        }
        _ => 0.0,
    };

    let horizontal = v_mean * theta_new.cos();
    let psi_end = state.psi + heading_change;
    let (dx, dy) = if heading_change == 0.0 {
        let (s, c) = state.psi.sin_cos();
        (horizontal * c * dt, horizontal * s * dt)
    } else {
        // Exact arc for a constant turn rate.
        let omega = heading_change / dt;
        let r = horizontal / omega;
        (r * (psi_end.sin() - state.psi.sin()), r * (state.psi.cos() - psi_end.cos()))
    };
    let omega = heading_change / dt;

    Ok(AircraftState {
        x: state.x + dx,
        y: state.y + dy,
        z: state.z + v_mean * theta_new.sin() * dt,
        v: v_new,
        theta: theta_new.clamp(-FRAC_PI_2, FRAC_PI_2),
        phi: wrap_angle((v_new * omega / cfg.gravity).atan()),
        psi: wrap_angle(psi_end),
        ..*state
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissileEnd {
    Hit,
    Expired,
    TargetLost,
    Notched,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissileState {
    pub id: usize,
    pub shooter: usize,
    pub target: usize,
    pub position: Vec3,
    pub velocity: Vec3,
    pub speed: f64,
    pub time_of_flight: f64,
    /// Continuous time the target has spent in the seeker's Doppler notch.
    pub notch_time: f64,
    pub active: bool,
    pub end: Option<MissileEnd>,
}

impl MissileState {
    fn deactivate(&mut self, end: MissileEnd) {
        self.active = false;
        self.end = Some(end);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cause", rename_all = "snake_case")]
pub enum KillCause {
    Missile { missile: usize, shooter: usize },
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KillEvent {
    pub victim: usize,
    pub cause: KillCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaunchOutcome {
    Launched(usize),
    /// The shooter had no missile left (a wasted action).
    EmptyRail,
    NoTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Battlefield {
    pub extent_ns: f64,
    pub extent_ew: f64,
    pub altitude_min: f64,
    pub altitude_max: f64,
    /// All aircraft; blue occupies the first `team_size` slots.
    pub aircraft: Vec<AircraftState>,
    pub missiles: Vec<MissileState>,
    pub launches: Vec<u32>,
    pub sim_time: f64,
    pub step: usize,
}

impl Battlefield {
    pub fn new(cfg: &SimConfig, aircraft: Vec<AircraftState>) -> Self {
        let launches = vec![0; aircraft.len()];
        Self {
            extent_ns: cfg.extent_ns,
            extent_ew: cfg.extent_ew,
            altitude_min: cfg.altitude_min,
            altitude_max: cfg.altitude_max,
            aircraft,
            missiles: Vec::new(),
            launches,
            sim_time: 0.0,
            step: 0,
        }
    }

    pub fn team_members(&self, team: Team) -> impl Iterator<Item = usize> + '_ {
        self.aircraft
            .iter()
            .enumerate()
            .filter(move |(_, a)| a.team == team)
            .map(|(i, _)| i)
    }

    pub fn survivors(&self, team: Team) -> usize {
        self.aircraft.iter().filter(|a| a.team == team && a.alive).count()
    }

    /// Nearest living aircraft of the opposing team.
    pub fn nearest_enemy(&self, id: usize) -> Option<usize> {
        let own = &self.aircraft[id];
        let pos = own.position();
        self.aircraft
            .iter()
            .enumerate()
            .filter(|(_, a)| a.alive && a.team != own.team)
            .map(|(i, a)| (i, norm(sub(a.position(), pos))))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    /// Nearest active missile guiding on `id`.
    pub fn nearest_threat(&self, id: usize) -> Option<usize> {
        let pos = self.aircraft[id].position();
        self.missiles
            .iter()
            .enumerate()
            .filter(|(_, m)| m.active && m.target == id)
            .map(|(i, m)| (i, norm(sub(m.position, pos))))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    /// Launches a missile from `shooter` at `target`.
    pub fn spawn_missile(&mut self, shooter: usize, target: usize, cfg: &SimConfig) -> LaunchOutcome {
        let Some(target_state) = self.aircraft.get(target).copied() else {
            return LaunchOutcome::NoTarget;
        };
        let shooter_state = self.aircraft[shooter];
        if !shooter_state.alive || !target_state.alive || target_state.team == shooter_state.team {
            return LaunchOutcome::NoTarget;
        }
        if shooter_state.missiles == 0 || self.launches[shooter] >= cfg.max_missiles {
            return LaunchOutcome::EmptyRail;
        }
        let los = sub(target_state.position(), shooter_state.position());
        let d = norm(los);
        let velocity = if d > 0.0 {
            los.map(|c| c / d * cfg.missile_speed)
        } else {
            shooter_state.velocity()
        };
        let id = self.missiles.len();
        self.missiles.push(MissileState {
            id,
            shooter,
            target,
            position: shooter_state.position(),
            velocity,
            speed: cfg.missile_speed,
            time_of_flight: 0.0,
            notch_time: 0.0,
            active: true,
            end: None,
        });
        self.aircraft[shooter].missiles -= 1;
        self.launches[shooter] += 1;
        LaunchOutcome::Launched(id)
    }

    /// Advances every active missile under pure pursuit.
    ///
    /// A missile whose target died or that reached its lifetime deactivates.
    /// The seeker drops lock once the target has held its radial speed below
    /// `notch_radial_speed` for `notch_dwell` seconds. A missile that can reach
    /// its target within the step is placed on it.
    pub fn step_missiles(&mut self, dt: f64, cfg: &SimConfig) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidTimeStep(dt));
        }
        for m in self.missiles.iter_mut().filter(|m| m.active) {
            let target = &self.aircraft[m.target];
            if !target.alive {
                m.deactivate(MissileEnd::TargetLost);
                continue;
            }
            if m.time_of_flight >= cfg.missile_lifetime {
                m.deactivate(MissileEnd::Expired);
                continue;
            }
            let los = sub(target.position(), m.position);
            let dist = norm(los);
            if dist > 0.0 {
                let radial = dot(target.velocity(), los) / dist;
                if radial.abs() < cfg.notch_radial_speed {
                    m.notch_time += dt;
                } else {
                    m.notch_time = 0.0;
                }
                if m.notch_time >= cfg.notch_dwell && cfg.notch_radial_speed > 0.0 {
                    m.deactivate(MissileEnd::Notched);
                    continue;
                }
            }
            let flight = dt.min(cfg.missile_lifetime - m.time_of_flight);
            let travel = m.speed * flight;
            if dist <= travel {
                m.position = target.position();
            } else {
                let dir = los.map(|c| c / dist);
                m.position = [
                    m.position[0] + dir[0] * travel,
                    m.position[1] + dir[1] * travel,
                    m.position[2] + dir[2] * travel,
                ];
                m.velocity = dir.map(|c| c * m.speed);
            }
            m.time_of_flight += flight;
            let remaining = norm(sub(target.position(), m.position));
            if m.time_of_flight >= cfg.missile_lifetime && remaining > cfg.kill_radius {
                m.deactivate(MissileEnd::Expired);
            }
        }
        Ok(())
    }

    pub fn out_of_bounds(&self, a: &AircraftState) -> bool {
        a.x < 0.0
            || a.x > self.extent_ns
            || a.y < 0.0
            || a.y > self.extent_ew
            || a.z < self.altitude_min
            || a.z > self.altitude_max
    }

    /// Resolves missile hits and boundary crossings, marking victims dead.
    pub fn check_outcomes(&mut self, cfg: &SimConfig) -> Vec<KillEvent> {
        let mut events = Vec::new();
        for m in self.missiles.iter_mut().filter(|m| m.active) {
            let target = &mut self.aircraft[m.target];
            if target.alive && norm(sub(target.position(), m.position)) <= cfg.kill_radius {
                target.alive = false;
                m.deactivate(MissileEnd::Hit);
                events.push(KillEvent {
                    victim: m.target,
                    cause: KillCause::Missile { missile: m.id, shooter: m.shooter },
                });
            }
        }
        for id in 0..self.aircraft.len() {
            let a = self.aircraft[id];
            if a.alive && self.out_of_bounds(&a) {
                self.aircraft[id].alive = false;
                events.push(KillEvent { victim: id, cause: KillCause::Boundary });
            }
        }
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(psi: f64, v: f64) -> AircraftState {
        AircraftState {
            team: Team::Blue,
            x: 50_000.0,
            y: 50_000.0,
            z: 3000.0,
            v,
            theta: 0.0,
            phi: 0.0,
            psi,
            missiles: 4,
            alive: true,
        }
    }

    fn two_ship(cfg: &SimConfig) -> Battlefield {
        let blue = level(0.0, 180.0);
        let red = AircraftState { team: Team::Red, x: 80_000.0, psi: PI, ..blue };
        Battlefield::new(cfg, vec![blue, red])
    }

    #[test]
    fn straight_flight_displaces_along_heading() {
        let cfg = SimConfig::default();
        let psi = 0.3;
        let s = level(psi, 180.0);
        let next = apply_command_and_step(&s, TacticalAction::Straight, &ManeuverContext::default(), 1.0, &cfg).unwrap();
        assert!((next.x - s.x - 180.0 * psi.cos()).abs() < 1e-9);
        assert!((next.y - s.y - 180.0 * psi.sin()).abs() < 1e-9);
        assert_eq!(next.z, s.z);
    }

    #[test]
    fn climb_gains_altitude_and_dive_loses_it() {
        let cfg = SimConfig::default();
        let s = level(0.0, 180.0);
        let ctx = ManeuverContext::default();
        let up = apply_command_and_step(&s, TacticalAction::Climb, &ctx, 1.0, &cfg).unwrap();
        let down = apply_command_and_step(&s, TacticalAction::Dive, &ctx, 1.0, &cfg).unwrap();
        assert!(up.z > 3000.0);
        assert!(down.z < 3000.0);
        assert!((up.z - 3000.0 - cfg.climb_rate).abs() < 1e-9);
    }

    #[test]
    fn acceleration_saturates_at_speed_bound() {
        let cfg = SimConfig::default();
        let s = level(0.0, cfg.speed_max);
        let next = apply_command_and_step(&s, TacticalAction::Accelerate, &ManeuverContext::default(), 1.0, &cfg).unwrap();
        assert_eq!(next.v, cfg.speed_max);
        let slow = level(0.0, cfg.speed_min);
        let next = apply_command_and_step(&slow, TacticalAction::Decelerate, &ManeuverContext::default(), 1.0, &cfg).unwrap();
        assert_eq!(next.v, cfg.speed_min);
    }

    #[test]
    fn turns_are_rate_limited_and_signed() {
        let cfg = SimConfig::default();
        let s = level(0.0, 200.0);
        let ctx = ManeuverContext::default();
        let right = apply_command_and_step(&s, TacticalAction::TurnRight, &ctx, 1.0, &cfg).unwrap();
        let left = apply_command_and_step(&s, TacticalAction::TurnLeft, &ctx, 1.0, &cfg).unwrap();
        assert!((right.psi - 10f64.to_radians()).abs() < 1e-12);
        assert!((left.psi + 10f64.to_radians()).abs() < 1e-12);
        assert!(right.y > s.y && left.y < s.y);
        assert!(right.phi > 0.0 && left.phi < 0.0);
        // Arc length along the turn equals speed times time.
        let chord = ((right.x - s.x).powi(2) + (right.y - s.y).powi(2)).sqrt();
        let half = 5f64.to_radians();
        assert!((chord - 200.0 * half.sin() / half).abs() < 1e-9);
    }

    #[test]
    fn notch_turns_towards_the_nearer_beam() {
        let cfg = SimConfig::default();
        let s = level(0.2, 200.0);
        let ctx = ManeuverContext { sim_time: 0.0, beam_bearing: Some(0.0) };
        let next = apply_command_and_step(&s, TacticalAction::Notch, &ctx, 1.0, &cfg).unwrap();
        assert!(next.psi > s.psi);
        let mut state = s;
        for _ in 0..20 {
            state = apply_command_and_step(&state, TacticalAction::Notch, &ctx, 1.0, &cfg).unwrap();
        }
        assert!((state.psi - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn weave_alternates_direction() {
        let cfg = SimConfig::default();
        let s = level(0.0, 200.0);
        let first = ManeuverContext { sim_time: 0.0, beam_bearing: None };
        let second = ManeuverContext { sim_time: cfg.weave_period, beam_bearing: None };
        let a = apply_command_and_step(&s, TacticalAction::Weave, &first, 1.0, &cfg).unwrap();
        let b = apply_command_and_step(&s, TacticalAction::Weave, &second, 1.0, &cfg).unwrap();
        assert!(a.psi > 0.0 && b.psi < 0.0);
    }

    #[test]
    fn rejects_dead_aircraft_bad_dt_and_unknown_command() {
        let cfg = SimConfig::default();
        let mut s = level(0.0, 200.0);
        assert!(apply_command_and_step(&s, TacticalAction::Straight, &ManeuverContext::default(), 0.0, &cfg).is_err());
        s.alive = false;
        assert!(matches!(
            apply_command_and_step(&s, TacticalAction::Straight, &ManeuverContext::default(), 1.0, &cfg),
            Err(Error::AircraftNotAlive)
        ));
        assert!(matches!(TacticalAction::try_from(10), Err(Error::UnknownCommand(10))));
        assert_eq!(TacticalAction::try_from(9).unwrap(), TacticalAction::Fire);
    }

    #[test]
    fn launch_decrements_and_empty_rail_is_a_no_op() {
        let cfg = SimConfig::default();
        let mut bf = two_ship(&cfg);
        assert_eq!(bf.spawn_missile(0, 1, &cfg), LaunchOutcome::Launched(0));
        assert_eq!(bf.aircraft[0].missiles, 3);
        assert_eq!(bf.spawn_missile(0, 1, &cfg), LaunchOutcome::Launched(1));
        assert_eq!(bf.missiles.iter().filter(|m| m.active).count(), 2);
        assert_ne!(bf.missiles[0].id, bf.missiles[1].id);

        bf.aircraft[0].missiles = 0;
        let before = bf.clone();
        assert_eq!(bf.spawn_missile(0, 1, &cfg), LaunchOutcome::EmptyRail);
        assert_eq!(bf, before);

        bf.aircraft[0].missiles = 2;
        bf.aircraft[1].alive = false;
        let before = bf.clone();
        assert_eq!(bf.spawn_missile(0, 1, &cfg), LaunchOutcome::NoTarget);
        assert_eq!(bf, before);
    }

    #[test]
    fn pursuit_closes_distance() {
        let cfg = SimConfig::default();
        let mut bf = two_ship(&cfg);
        // Red flies away from a missile 1000 m behind it.
        bf.aircraft[1].psi = 0.0;
        bf.aircraft[1].x = 60_000.0;
        bf.missiles.push(MissileState {
            id: 0,
            shooter: 0,
            target: 1,
            position: [59_000.0, 50_000.0, 3000.0],
            velocity: [480.0, 0.0, 0.0],
            speed: 480.0,
            time_of_flight: 0.0,
            notch_time: 0.0,
            active: true,
            end: None,
        });
        let d0 = norm(sub(bf.missiles[0].position, bf.aircraft[1].position()));
        bf.aircraft[1] = apply_command_and_step(&bf.aircraft[1], TacticalAction::Straight, &ManeuverContext::default(), 0.5, &cfg).unwrap();
        bf.step_missiles(0.5, &cfg).unwrap();
        let d1 = norm(sub(bf.missiles[0].position, bf.aircraft[1].position()));
        assert!(d1 < d0);
        assert!(bf.missiles[0].active);
    }

    #[test]
    fn expiry_and_dead_target_deactivate() {
        let cfg = SimConfig::default();
        let mut bf = two_ship(&cfg);
        bf.spawn_missile(0, 1, &cfg);
        bf.missiles[0].time_of_flight = cfg.missile_lifetime;
        bf.step_missiles(1.0, &cfg).unwrap();
        assert!(!bf.missiles[0].active);
        assert_eq!(bf.missiles[0].end, Some(MissileEnd::Expired));

        let mut bf = two_ship(&cfg);
        bf.spawn_missile(0, 1, &cfg);
        bf.aircraft[1].alive = false;
        bf.step_missiles(1.0, &cfg).unwrap();
        assert_eq!(bf.missiles[0].end, Some(MissileEnd::TargetLost));
        // Inactive missiles are never stepped again.
        let frozen = bf.missiles[0];
        bf.step_missiles(1.0, &cfg).unwrap();
        assert_eq!(bf.missiles[0], frozen);
    }

    #[test]
    fn beaming_target_breaks_lock_after_dwell() {
        let cfg = SimConfig::default();
        let mut bf = two_ship(&cfg);
        bf.spawn_missile(0, 1, &cfg);
        // Red flies due east, perpendicular to the north-south line of sight.
        bf.aircraft[1].psi = FRAC_PI_2;
        bf.step_missiles(1.0, &cfg).unwrap();
        assert!(bf.missiles[0].active);
        bf.step_missiles(1.0, &cfg).unwrap();
        assert_eq!(bf.missiles[0].end, Some(MissileEnd::Notched));
    }

    #[test]
    fn outcomes_resolve_hits_and_boundaries() {
        let cfg = SimConfig::default();
        let mut bf = two_ship(&cfg);
        assert!(bf.check_outcomes(&cfg).is_empty());

        bf.spawn_missile(0, 1, &cfg);
        let red = bf.aircraft[1].position();
        bf.missiles[0].position = [red[0] - (cfg.kill_radius - 1.0), red[1], red[2]];
        let events = bf.check_outcomes(&cfg);
        assert_eq!(events, vec![KillEvent { victim: 1, cause: KillCause::Missile { missile: 0, shooter: 0 } }]);
        assert!(!bf.aircraft[1].alive);
        assert_eq!(bf.missiles[0].end, Some(MissileEnd::Hit));

        let mut bf = two_ship(&cfg);
        bf.aircraft[0].y = 201_000.0;
        let events = bf.check_outcomes(&cfg);
        assert_eq!(events, vec![KillEvent { victim: 0, cause: KillCause::Boundary }]);
        bf.aircraft[1].z = cfg.altitude_min - 1.0;
        assert_eq!(bf.check_outcomes(&cfg)[0].cause, KillCause::Boundary);
        // Dead aircraft are not killed twice.
        assert!(bf.check_outcomes(&cfg).is_empty());
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn state() -> impl Strategy<Value = AircraftState> {
            (
                0.0..200_000.0f64,
                0.0..100_000.0f64,
                100.0..20_000.0f64,
                100.0..400.0f64,
                -1.2..1.2f64,
                -PI..PI,
            )
                .prop_map(|(x, y, z, v, theta, psi)| AircraftState {
                    team: Team::Blue,
                    x,
                    y,
                    z,
                    v,
                    theta,
                    phi: 0.0,
                    psi: wrap_angle(psi),
                    missiles: 4,
                    alive: true,
                })
        }

        proptest! {
            #[test]
            fn straight_flight_is_exactly_integrable(s in state(), dt in 0.01..5.0f64) {
                let cfg = SimConfig::default();
                let ctx = ManeuverContext::default();
                let once = apply_command_and_step(&s, TacticalAction::Straight, &ctx, 2.0 * dt, &cfg).unwrap();
                let half = apply_command_and_step(&s, TacticalAction::Straight, &ctx, dt, &cfg).unwrap();
                let twice = apply_command_and_step(&half, TacticalAction::Straight, &ctx, dt, &cfg).unwrap();
                for (a, b) in [(once.x, twice.x), (once.y, twice.y), (once.z, twice.z)] {
                    prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
                }
            }

            #[test]
            fn every_command_keeps_state_finite_and_in_range(
                s in state(),
                cmd in 0usize..10,
                t in 0.0..900.0f64,
                bearing in proptest::option::of(-PI..PI),
            ) {
                let cfg = SimConfig::default();
                let ctx = ManeuverContext { sim_time: t, beam_bearing: bearing };
                let action = TacticalAction::try_from(cmd).unwrap();
                let next = apply_command_and_step(&s, action, &ctx, 1.0, &cfg).unwrap();
                prop_assert!(next.is_finite());
                prop_assert!(next.v >= cfg.speed_min && next.v <= cfg.speed_max);
                prop_assert!(next.theta.abs() <= FRAC_PI_2);
                prop_assert!(next.psi > -PI && next.psi <= PI);
                prop_assert!(next.phi > -PI && next.phi <= PI);
                prop_assert_eq!(next.missiles, s.missiles);
            }
        }
    }
}
