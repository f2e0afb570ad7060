use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Zero-order-hold action sequence stored as knots in normalized `[-1, 1]`
/// actuator units.
///
/// Control step `t` of a horizon of `H` steps is held at knot
/// `floor(t * num_knots / H)`, so knot boundaries sit at evenly spaced
/// fractions of the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSequence {
    /// Row-major `(num_knots, action_dim)`.
    knots: Vec<f64>,
    num_knots: usize,
    action_dim: usize,
    horizon_steps: usize,
}

impl ActionSequence {
    pub fn zeros(num_knots: usize, action_dim: usize, horizon_steps: usize) -> Self {
        assert!(num_knots >= 1 && action_dim >= 1, "empty action sequence");
        Self {
            knots: vec![0.0; num_knots * action_dim],
            num_knots,
            action_dim,
            horizon_steps,
        }
    }

    pub fn from_knots(
        knots: Vec<f64>,
        num_knots: usize,
        action_dim: usize,
        horizon_steps: usize,
    ) -> Result<Self> {
        if num_knots == 0 || action_dim == 0 {
            return Err(Error::InvalidArgument("action sequence needs at least one knot".into()));
        }
        Error::check_len("knot matrix", num_knots * action_dim, knots.len())?;
        Ok(Self {
            knots,
            num_knots,
            action_dim,
            horizon_steps,
        })
    }

    /// Same shape as `self` with new knot values.
    pub fn with_knots(&self, knots: Vec<f64>) -> Result<Self> {
        Self::from_knots(knots, self.num_knots, self.action_dim, self.horizon_steps)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knots_mut(&mut self) -> &mut [f64] {
        &mut self.knots
    }

    pub fn into_knots(self) -> Vec<f64> {
        self.knots
    }

    pub fn num_knots(&self) -> usize {
        self.num_knots
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn horizon_steps(&self) -> usize {
        self.horizon_steps
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn knot(&self, j: usize) -> &[f64] {
        &self.knots[j * self.action_dim..(j + 1) * self.action_dim]
    }

    pub fn knot_index(&self, step: usize) -> usize {
        if self.horizon_steps == 0 {
            return 0;
        }
        (step * self.num_knots / self.horizon_steps).min(self.num_knots - 1)
    }

    /// Normalized action held at control step `step`.
    pub fn action_at(&self, step: usize) -> &[f64] {
        self.knot(self.knot_index(step))
    }

    /// Action applied at the current control step.
    pub fn first_action(&self) -> &[f64] {
        self.knot(0)
    }

    pub fn clamp(&mut self) {
        for k in &mut self.knots {
            *k = k.clamp(-1.0, 1.0);
        }
    }

    pub fn clamped(mut self) -> Self {
        self.clamp();
        self
    }

    /// Advances the plan by one control step.
    ///
    /// The held signal is shifted left by one step with its last value
    /// repeated, then projected back onto the knots by averaging the steps
    /// each knot covers. With equal-length segments of length `s`, knot `j`
    /// becomes `((s - 1) u_j + u_{j+1}) / s`.
    pub fn shifted(&self) -> Self {
        let h = self.horizon_steps;
        if h <= 1 {
            return self.clone();
        }
        let d = self.action_dim;
        let mut sums = vec![0.0; self.knots.len()];
        let mut counts = vec![0usize; self.num_knots];
        for t in 0..h {
            let src = self.action_at((t + 1).min(h - 1));
            let j = self.knot_index(t);
            counts[j] += 1;
            for (s, &v) in sums[j * d..(j + 1) * d].iter_mut().zip(src) {
                *s += v;
            }
        }
        let knots = sums
            .chunks(d)
            .zip(&counts)
            .enumerate()
            .flat_map(|(j, (chunk, &c))| {
                let fallback = self.knot(j);
                chunk
                    .iter()
                    .zip(fallback)
                    .map(move |(&s, &f)| if c == 0 { f } else { s / c as f64 })
            })
            .collect();
        Self {
            knots,
            ..self.clone()
        }
    }
}
