use serde::{Deserialize, Serialize};

use super::{snapshot_count, ExperimentSpec, MobilityArea, MobilityLogic, RadioConfig, UeSpec};
use crate::FORMAT_VERSION;

/// Closest distance used for path loss.
pub const MIN_DISTANCE_M: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityState {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// Next waypoint to reach (waypoint logic only).
    pub next_waypoint: usize,
}

impl MobilityState {
    pub fn initial(ue: &UeSpec) -> Self {
        let velocity = match ue.mobility_logic {
            MobilityLogic::Static => [0.0; 3],
            MobilityLogic::LinearBounce => velocity_vector(ue.speed, ue.direction, ue.elevation),
            MobilityLogic::Waypoint { ref points } => {
                points.first().map_or([0.0; 3], |wp| toward(ue.initial_position, *wp, ue.speed))
            }
        };
        Self {
            position: ue.initial_position,
            velocity,
            next_waypoint: 0,
        }
    }

    pub fn speed(&self) -> f64 {
        norm(self.velocity)
    }
}

/// Velocity for `speed` m/s along azimuth `direction` and `elevation`, both in degrees.
pub fn velocity_vector(speed: f64, direction_deg: f64, elevation_deg: f64) -> [f64; 3] {
    let (az, el) = (direction_deg.to_radians(), elevation_deg.to_radians());
    [speed * el.cos() * az.cos(), speed * el.cos() * az.sin(), speed * el.sin()]
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn toward(from: [f64; 3], to: [f64; 3], speed: f64) -> [f64; 3] {
    let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let len = norm(d);
    if len == 0.0 {
        return [0.0; 3];
    }
    [d[0] / len * speed, d[1] / len * speed, d[2] / len * speed]
}

/// Advances one UE by `dt` seconds. Linear motion reflects specularly off the
/// area walls (any number of times per step); waypoint motion stops at the last point.
pub fn step_mobility(state: &MobilityState, logic: &MobilityLogic, area: &MobilityArea, dt: f64) -> MobilityState {
    match logic {
        MobilityLogic::Static => state.clone(),
        MobilityLogic::LinearBounce => {
            let mut next = state.clone();
            for i in 0..3 {
                let (p, v) = reflect(state.position[i], state.velocity[i], area.min[i], area.max[i], dt);
                next.position[i] = p;
                next.velocity[i] = v;
            }
            next
        }
        MobilityLogic::Waypoint { points } => step_waypoints(state, points, dt),
    }
}

fn reflect(x: f64, v: f64, lo: f64, hi: f64, dt: f64) -> (f64, f64) {
    let width = hi - lo;
    if v == 0.0 || width <= 0.0 {
        return (x.clamp(lo, hi), v);
    }
    let u = x - lo + v * dt;
    let k = (u / width).floor();
    let r = u - k * width;
    if (k as i64).rem_euclid(2) == 0 {
        ((lo + r).clamp(lo, hi), v)
    } else {
        ((hi - r).clamp(lo, hi), -v)
    }
}

fn step_waypoints(state: &MobilityState, points: &[[f64; 3]], dt: f64) -> MobilityState {
    let speed = state.speed();
    let mut pos = state.position;
    let mut idx = state.next_waypoint;
    let mut budget = speed * dt;
    while idx < points.len() && budget > 0.0 {
        let target = points[idx];
        let d = norm([target[0] - pos[0], target[1] - pos[1], target[2] - pos[2]]);
        if d <= budget {
            pos = target;
            budget -= d;
            idx += 1;
        } else {
            let f = budget / d;
            for i in 0..3 {
                pos[i] += (target[i] - pos[i]) * f;
            }
            budget = 0.0;
        }
    }
    // Skip waypoints that coincide with the current position.
    while idx < points.len() && points[idx] == pos {
        idx += 1;
    }
    let velocity = if idx < points.len() { toward(pos, points[idx], speed) } else { [0.0; 3] };
    MobilityState {
        position: pos,
        velocity,
        next_waypoint: idx,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: [f64; 3],
    pub speed: f64,
}

/// Positions at t = 0, dt, 2 dt, ...: ⌈duration / dt⌉ + 1 samples.
pub fn trajectory(ue: &UeSpec, duration: f64, dt: f64) -> Vec<TrajectorySample> {
    let n = snapshot_count(duration, dt);
    let mut state = MobilityState::initial(ue);
    let mut out = Vec::with_capacity(n + 1);
    out.push(TrajectorySample {
        t: 0.0,
        position: state.position,
        speed: state.speed(),
    });
    for i in 1..=n {
        state = step_mobility(&state, &ue.mobility_logic, &ue.mobility_area, dt);
        out.push(TrajectorySample {
            t: i as f64 * dt,
            position: state.position,
            speed: state.speed(),
        });
    }
    out
}

/// Euclidean distance to the cell antenna, floored at `MIN_DISTANCE_M`.
pub fn distance_to_antenna(position: [f64; 3], radio: &RadioConfig) -> f64 {
    let a = radio.antenna_position;
    norm([position[0] - a[0], position[1] - a[1], position[2] - a[2]]).max(MIN_DISTANCE_M)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UePreview {
    pub id: String,
    pub mobility_area: MobilityArea,
    pub mobility_logic: MobilityLogic,
    pub samples: Vec<TrajectorySample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewDocument {
    pub format_version: u32,
    pub duration: f64,
    pub snapshot_interval: f64,
    pub antenna_position: [f64; 3],
    pub ues: Vec<UePreview>,
}

/// Trajectories of every UE, sampled exactly as the run loop samples them.
pub fn preview_document(spec: &ExperimentSpec) -> PreviewDocument {
    PreviewDocument {
        format_version: FORMAT_VERSION,
        duration: spec.duration,
        snapshot_interval: spec.snapshot_interval,
        antenna_position: spec.radio.antenna_position,
        ues: spec
            .ues
            .iter()
            .map(|ue| UePreview {
                id: ue.id.clone(),
                mobility_area: ue.mobility_area,
                mobility_logic: ue.mobility_logic.clone(),
                samples: trajectory(ue, spec.duration, spec.snapshot_interval),
            })
            .collect(),
    }
}
