//! Cart with an unactuated serial double pendulum (point masses at the link
//! tips). Coordinates are `q = [x, phi1, phi2]` with absolute link angles
//! measured from upright.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{wrap_angle, DomainParams, Env, EnvKind, EnvSpec, EnvState, MAX_DOF};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleCartPoleParams {
    pub cart_mass: f64,
    pub mass1: f64,
    pub mass2: f64,
    pub length1: f64,
    pub length2: f64,
    /// Viscous damping on both link angles.
    pub damping: f64,
    pub gain: f64,
    pub gravity: f64,
}

impl Default for DoubleCartPoleParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            mass1: 0.1,
            mass2: 0.1,
            length1: 0.5,
            length2: 0.5,
            damping: 0.0,
            gain: 1.0,
            gravity: 9.81,
        }
    }
}

pub fn env() -> Env {
    Env {
        spec: EnvSpec {
            kind: EnvKind::DoubleCartpole,
            dof: 3,
            action_dim: 1,
            obs_dim: 8,
            action_limits: vec![10.0],
            physics_dt: 0.01,
            control_hz: 50.0,
            horizon: 0.8,
            num_knots: 10,
            episode_len: 4.0,
            initial_state:
                "x ~ N(0, 0.05^2), phi1, phi2 ~ pi + N(0, 0.1^2), velocities ~ N(0, 0.05^2)".into(),
        },
        nominal: DomainParams::DoubleCartpole(DoubleCartPoleParams::default()),
    }
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> [f64; 3] {
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = r[row];
        }
        *o = det(mc) / d;
    }
    out
}

pub(super) fn accel(p: &DoubleCartPoleParams, q: &[f64; MAX_DOF], v: &[f64; MAX_DOF], u: &[f64]) -> [f64; MAX_DOF] {
    let (s1, c1) = q[1].sin_cos();
    let (s2, c2) = q[2].sin_cos();
    let (sd, cd) = (q[1] - q[2]).sin_cos();
    let (mc, m1, m2, l1, l2, g) = (p.cart_mass, p.mass1, p.mass2, p.length1, p.length2, p.gravity);
    let m12 = m1 + m2;
    let (w1, w2) = (v[1], v[2]);
    let mass = [
        [mc + m12, m12 * l1 * c1, m2 * l2 * c2],
        [m12 * l1 * c1, m12 * l1 * l1, m2 * l1 * l2 * cd],
        [m2 * l2 * c2, m2 * l1 * l2 * cd, m2 * l2 * l2],
    ];
    let rhs = [
        p.gain * u[0] + m12 * l1 * s1 * w1 * w1 + m2 * l2 * s2 * w2 * w2,
        -m2 * l1 * l2 * sd * w2 * w2 + m12 * g * l1 * s1 - p.damping * w1,
        m2 * l1 * l2 * sd * w1 * w1 + m2 * g * l2 * s2 - p.damping * w2,
    ];
    solve3(mass, rhs)
}

pub(super) fn running_cost(s: &EnvState, u: &[f64]) -> f64 {
    let e1 = wrap_angle(s.q[1]);
    let e2 = wrap_angle(s.q[2]);
    let vel = s.v[0] * s.v[0] + s.v[1] * s.v[1] + s.v[2] * s.v[2];
    e1 * e1 + e2 * e2 + 0.1 * s.q[0] * s.q[0] + 0.01 * vel + 0.001 * u[0] * u[0]
}

pub(super) fn terminal_cost(s: &EnvState) -> f64 {
    let e1 = wrap_angle(s.q[1]);
    let e2 = wrap_angle(s.q[2]);
    let vel = s.v[0] * s.v[0] + s.v[1] * s.v[1] + s.v[2] * s.v[2];
    10.0 * (e1 * e1 + e2 * e2 + 0.1 * s.q[0] * s.q[0] + 0.01 * vel)
}

pub(super) fn observe(s: &EnvState) -> Vec<f64> {
    vec![
        s.q[1].sin(),
        s.q[1].cos(),
        s.q[2].sin(),
        s.q[2].cos(),
        s.q[0],
        s.v[0],
        s.v[1],
        s.v[2],
    ]
}

pub(super) fn sample_initial<R: Rng + ?Sized>(rng: &mut R) -> EnvState {
    let small = Normal::new(0.0, 0.05).expect("valid std");
    let angle = Normal::new(PI, 0.1).expect("valid std");
    EnvState::new(
        &[small.sample(rng), angle.sample(rng), angle.sample(rng)],
        &[small.sample(rng), small.sample(rng), small.sample(rng)],
    )
}

/// Mechanical energy with the potential measured from the hanging rest
/// configuration, so it is non-negative.
pub fn energy(p: &DoubleCartPoleParams, s: &EnvState) -> f64 {
    let (mc, m1, m2, l1, l2, g) = (p.cart_mass, p.mass1, p.mass2, p.length1, p.length2, p.gravity);
    let (s1, c1) = s.q[1].sin_cos();
    let (s2, c2) = s.q[2].sin_cos();
    let (xd, w1, w2) = (s.v[0], s.v[1], s.v[2]);
    let (p1x, p1y) = (xd + l1 * c1 * w1, -l1 * s1 * w1);
    let (p2x, p2y) = (p1x + l2 * c2 * w2, p1y - l2 * s2 * w2);
    let kinetic = 0.5 * mc * xd * xd + 0.5 * m1 * (p1x * p1x + p1y * p1y) + 0.5 * m2 * (p2x * p2x + p2y * p2y);
    let potential = g * (m1 * l1 * (1.0 + c1) + m2 * (l1 * (1.0 + c1) + l2 * (1.0 + c2)));
    kinetic + potential
}
