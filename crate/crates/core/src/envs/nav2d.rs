//! Planar point mass that must reach a goal hidden directly behind a
//! circular obstacle. The scene is mirror-symmetric about `y = 0`, so the
//! two ways around the obstacle are equally good.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DomainParams, Env, EnvKind, EnvSpec, EnvState, MAX_DOF};

pub const START: [f64; 2] = [-1.0, 0.0];
pub const GOAL: [f64; 2] = [1.0, 0.0];
pub const OBSTACLE_CENTER: [f64; 2] = [0.0, 0.0];
pub const OBSTACLE_RADIUS: f64 = 0.3;
/// Clearance beyond the obstacle radius where the penalty starts.
pub const OBSTACLE_MARGIN: f64 = 0.1;
const OBSTACLE_WEIGHT: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nav2dParams {
    pub mass: f64,
    /// Linear velocity drag coefficient.
    pub drag: f64,
    pub gain: f64,
}

impl Default for Nav2dParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            drag: 0.5,
            gain: 1.0,
        }
    }
}

pub fn env() -> Env {
    Env {
        spec: EnvSpec {
            kind: EnvKind::Nav2d,
            dof: 2,
            action_dim: 2,
            obs_dim: 4,
            action_limits: vec![2.0, 2.0],
            physics_dt: 0.01,
            control_hz: 50.0,
            horizon: 1.0,
            num_knots: 5,
            episode_len: 4.0,
            initial_state: "p = (-1, 0) + N(0, 0.1^2 I), v = 0".into(),
        },
        nominal: DomainParams::Nav2d(Nav2dParams::default()),
    }
}

pub(super) fn accel(p: &Nav2dParams, _q: &[f64; MAX_DOF], v: &[f64; MAX_DOF], u: &[f64]) -> [f64; MAX_DOF] {
    [
        (p.gain * u[0] - p.drag * v[0]) / p.mass,
        (p.gain * u[1] - p.drag * v[1]) / p.mass,
        0.0,
    ]
}

pub fn distance_to_goal(s: &EnvState) -> f64 {
    (s.q[0] - GOAL[0]).hypot(s.q[1] - GOAL[1])
}

/// Quadratic penalty that is zero outside `radius + margin` and has a
/// continuous first derivative at the boundary.
pub fn obstacle_penalty(s: &EnvState) -> f64 {
    let d = (s.q[0] - OBSTACLE_CENTER[0]).hypot(s.q[1] - OBSTACLE_CENTER[1]);
    let violation = (OBSTACLE_RADIUS + OBSTACLE_MARGIN - d).max(0.0);
    OBSTACLE_WEIGHT * violation * violation
}

fn goal_error(s: &EnvState) -> f64 {
    let (dx, dy) = (s.q[0] - GOAL[0], s.q[1] - GOAL[1]);
    dx * dx + dy * dy + 0.1 * (s.v[0] * s.v[0] + s.v[1] * s.v[1])
}

pub(super) fn running_cost(s: &EnvState, u: &[f64]) -> f64 {
    goal_error(s) + 0.01 * (u[0] * u[0] + u[1] * u[1]) + obstacle_penalty(s)
}

pub(super) fn terminal_cost(s: &EnvState) -> f64 {
    10.0 * goal_error(s) + obstacle_penalty(s)
}

pub(super) fn observe(s: &EnvState) -> Vec<f64> {
    vec![s.q[0] - GOAL[0], s.q[1] - GOAL[1], s.v[0], s.v[1]]
}

pub(super) fn sample_initial<R: Rng + ?Sized>(rng: &mut R) -> EnvState {
    let noise = Normal::new(0.0, 0.1).expect("valid std");
    EnvState::new(
        &[START[0] + noise.sample(rng), START[1] + noise.sample(rng)],
        &[0.0, 0.0],
    )
}

/// Which side of the obstacle a path passes: `+1` above (`y > 0`), `-1`
/// below, judged at the path point closest to the obstacle centre.
pub fn homotopy_class(path: &[EnvState]) -> i8 {
    let closest = path
        .iter()
        .min_by(|a, b| {
            let da = (a.q[0] - OBSTACLE_CENTER[0]).hypot(a.q[1] - OBSTACLE_CENTER[1]);
            let db = (b.q[0] - OBSTACLE_CENTER[0]).hypot(b.q[1] - OBSTACLE_CENTER[1]);
            da.total_cmp(&db)
        })
        .expect("non-empty path");
    if closest.q[1] >= OBSTACLE_CENTER[1] {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spc::ActionSequence;

    fn mirror(s: &EnvState) -> EnvState {
        let mut m = *s;
        m.q[1] = -m.q[1];
        m.v[1] = -m.v[1];
        m
    }

    #[test]
    fn goal_at_rest_costs_nothing() {
        let env = env();
        let s = EnvState::new(&GOAL, &[0.0, 0.0]);
        assert_eq!(env.running_cost(&s, &[0.0, 0.0]), 0.0);
        assert!(env.at_goal(&s));
    }

    #[test]
    fn mirrored_plans_cost_the_same() {
        let env = env();
        let start = EnvState::new(&START, &[0.0, 0.0]);
        let up = ActionSequence::from_knots(vec![1.0, 0.8, 1.0, 0.2, 0.5, -0.6, 0.5, -0.4, 0.2, 0.0], 5, 2, 50).unwrap();
        let mut down_knots = up.knots().to_vec();
        for k in down_knots.iter_mut().skip(1).step_by(2) {
            *k = -*k;
        }
        let down = ActionSequence::from_knots(down_knots, 5, 2, 50).unwrap();
        let a = env.rollout_cost(&env.nominal, &start, &up);
        let b = env.rollout_cost(&env.nominal, &start, &down);
        assert_eq!(a, b);
        let s = EnvState::new(&[0.1, 0.25], &[0.3, -0.2]);
        assert_eq!(env.running_cost(&s, &[0.5, 0.5]), env.running_cost(&mirror(&s), &[0.5, -0.5]));
    }

    #[test]
    fn penalty_is_zero_outside_margin() {
        assert_eq!(obstacle_penalty(&EnvState::new(&[0.0, 0.41], &[0.0, 0.0])), 0.0);
        assert!(obstacle_penalty(&EnvState::new(&[0.0, 0.2], &[0.0, 0.0])) > 0.0);
    }

    #[test]
    fn homotopy_class_by_side() {
        let above: Vec<_> = (0..5).map(|i| EnvState::new(&[-0.5 + 0.25 * i as f64, 0.4], &[0.0; 2])).collect();
        let below: Vec<_> = above.iter().map(mirror).collect();
        assert_eq!(homotopy_class(&above), 1);
        assert_eq!(homotopy_class(&below), -1);
    }
}
