//! Monte-Carlo score of the noised target distribution.
//!
//! For a target density proportional to `g(U)` convolved with
//! `N(0, sigma^2 I)`, the score at `U` is
//! `E[g(V) (V - U)] / (sigma^2 E[g(V)])` with `V ~ N(U, sigma^2 I)`.
//! The SPC mean update is exactly `sigma^2` times this estimator evaluated
//! on the proposal samples.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::check_total_weight;
use crate::{Error, Result};

/// Score estimate from given samples and their `g` values.
pub fn weighted_score<'a>(
    center: &[f64],
    samples: impl IntoIterator<Item = &'a [f64]>,
    weights: &[f64],
    sigma: f64,
) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    let total = check_total_weight(weights)?;
    let mut num = vec![0.0; center.len()];
    let mut count = 0;
    for (x, &w) in samples.into_iter().zip(weights) {
        Error::check_len("sample", center.len(), x.len())?;
        count += 1;
        for ((n, &xi), &c) in num.iter_mut().zip(x).zip(center) {
            *n += w * (xi - c);
        }
    }
    Error::check_len("score weights", weights.len(), count)?;
    let scale = 1.0 / (sigma * sigma);
    Ok(num.into_iter().map(|n| scale * (n / total)).collect())
}

/// Draws `n` samples `V ~ N(U, sigma^2 I)` and returns the score estimate.
pub fn estimate_score<G, R>(g: G, u: &[f64], sigma: f64, n: usize, rng: &mut R) -> Result<Vec<f64>>
where
    G: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if n < 2 {
        return Err(Error::InvalidArgument("score estimation needs at least two samples".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    let d = u.len();
    let mut num = vec![0.0; d];
    let mut total = 0.0;
    let mut v = vec![0.0; d];
    for _ in 0..n {
        for (vi, &ui) in v.iter_mut().zip(u) {
            let z: f64 = StandardNormal.sample(rng);
            *vi = ui + sigma * z;
        }
        let w = g(&v);
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidArgument(format!("g must be finite and non-negative, got {w}")));
        }
        total += w;
        for ((acc, &vi), &ui) in num.iter_mut().zip(&v).zip(u) {
            *acc += w * (vi - ui);
        }
    }
    if total == 0.0 {
        return Err(Error::InvalidArgument("g vanished on every sample".into()));
    }
    let scale = 1.0 / (sigma * sigma);
    Ok(num.into_iter().map(|x| scale * x / total).collect())
}
