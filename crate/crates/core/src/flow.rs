//! Conditional flow-matching policy over action sequences.
//!
//! The vector field `v(U, y, t)` is an MLP fed with the flattened knots, the
//! standardized observation and the flow time. Training regresses
//! `v(t U* + (1 - t) U0, y, t)` onto `U* - U0` with a per-record weight that
//! discounts targets pointing away from the previous plan; sampling
//! integrates the field from `t = 0` to `t = 1` with explicit Euler.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::net::{adam_step, Activation, AdamConfig, AdamState, MlpParams};
use crate::rng::{Purpose, StreamKey};
use crate::spc::ActionSequence;
use crate::{par, Error, Result};

/// Temperature of the cosine-distance weight.
pub const DEFAULT_GAMMA: f64 = 2.0;
const MIN_STD: f64 = 1e-6;
/// Records per parallel gradient chunk. Fixed so the summation order does
/// not depend on the number of workers.
const GRAD_CHUNK: usize = 16;

/// Per-component standardization of observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ObsNormalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Mean and population std of `observations`, std floored at `1e-6`.
    pub fn from_data<'a>(dim: usize, observations: impl IntoIterator<Item = &'a [f64]> + Clone) -> Result<Self> {
        let mut mean = vec![0.0; dim];
        let mut n = 0usize;
        for y in observations.clone() {
            Error::check_len("observation", dim, y.len())?;
            for (m, &v) in mean.iter_mut().zip(y) {
                *m += v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::InvalidArgument("cannot normalize an empty dataset".into()));
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; dim];
        for y in observations {
            for ((s, &v), &m) in var.iter_mut().zip(y).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n as f64).sqrt().max(MIN_STD)).collect();
        let out = Self { mean, std };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        Error::check_len("normalizer std", self.mean.len(), self.std.len())?;
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("normalizer mean".into()));
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s >= MIN_STD)) {
            return Err(Error::InvalidArgument(format!("normalizer std must be finite and at least {MIN_STD}")));
        }
        Ok(())
    }

    pub fn normalize(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| v * s + m).collect()
    }
}

/// Flow-matching policy `p(U | y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowModel {
    pub net: MlpParams,
    pub normalizer: ObsNormalizer,
    pub num_knots: usize,
    pub action_dim: usize,
    pub obs_dim: usize,
    pub horizon_steps: usize,
}

impl FlowModel {
    /// Glorot-initialized model with the given hidden layer widths.
    pub fn new(
        num_knots: usize,
        action_dim: usize,
        obs_dim: usize,
        horizon_steps: usize,
        hidden: &[usize],
        activation: Activation,
        key: StreamKey,
    ) -> Result<Self> {
        let flat = num_knots * action_dim;
        if flat == 0 || obs_dim == 0 {
            return Err(Error::InvalidArgument("flow model needs non-empty actions and observations".into()));
        }
        let mut sizes = vec![flat + obs_dim + 1];
        sizes.extend_from_slice(hidden);
        sizes.push(flat);
        let net = MlpParams::glorot(&sizes, activation, &mut key.purpose(Purpose::ModelInit).rng())?;
        Ok(Self {
            net,
            normalizer: ObsNormalizer::identity(obs_dim),
            num_knots,
            action_dim,
            obs_dim,
            horizon_steps,
        })
    }

    pub fn flat_dim(&self) -> usize {
        self.num_knots * self.action_dim
    }

    pub fn validate(&self) -> Result<()> {
        let flat = self.flat_dim();
        Error::check_len("flow input", flat + self.obs_dim + 1, self.net.input_dim())?;
        Error::check_len("flow output", flat, self.net.output_dim())?;
        Error::check_len("normalizer", self.obs_dim, self.normalizer.mean.len())?;
        self.normalizer.validate()
    }

    fn input(&self, u: &[f64], y_norm: &[f64], t: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(u.len() + y_norm.len() + 1);
        x.extend_from_slice(u);
        x.extend_from_slice(y_norm);
        x.push(t);
        x
    }

    /// Field value at `u` for a standardized observation.
    pub fn velocity(&self, u: &[f64], y_norm: &[f64], t: f64) -> Result<Vec<f64>> {
        Error::check_len("flow state", self.flat_dim(), u.len())?;
        Error::check_len("observation", self.obs_dim, y_norm.len())?;
        self.net.forward(&self.input(u, y_norm, t))
    }
}

/// One SPC step harvested for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    /// Raw observation the plan was computed for.
    pub obs: Vec<f64>,
    /// Updated mean plan, flattened normalized knots.
    pub target: Vec<f64>,
    /// Plan the update started from.
    pub prev: Vec<f64>,
    pub env_id: usize,
    pub step: usize,
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return None;
    }
    Some((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

/// `exp(-gamma (1 - cos(target - prev, target - u0)))`; `1` when either
/// difference is zero.
pub fn cosine_weight(target: &[f64], prev: &[f64], u0: &[f64], gamma: f64) -> f64 {
    let step: Vec<f64> = target.iter().zip(prev).map(|(a, b)| a - b).collect();
    let flow: Vec<f64> = target.iter().zip(u0).map(|(a, b)| a - b).collect();
    match cosine(&step, &flow) {
        Some(c) => (-gamma * (1.0 - c)).exp(),
        None => 1.0,
    }
}

fn check_record(model: &FlowModel, record: &TrainRecord) -> Result<()> {
    let flat = model.flat_dim();
    Error::check_len("record target", flat, record.target.len())?;
    Error::check_len("record prev", flat, record.prev.len())?;
    Error::check_len("record observation", model.obs_dim, record.obs.len())
}

/// Loss of one record, accumulating its parameter gradient into `grads`.
fn accumulate(
    model: &FlowModel,
    y_norm: &[f64],
    record: &TrainRecord,
    u0: &[f64],
    t: f64,
    gamma: f64,
    grads: &mut MlpParams,
) -> Result<f64> {
    let xt: Vec<f64> = record.target.iter().zip(u0).map(|(&a, &z)| t * a + (1.0 - t) * z).collect();
    let trace = model.net.forward_trace(&model.input(&xt, y_norm, t))?;
    let w = cosine_weight(&record.target, &record.prev, u0, gamma);
    let mut loss = 0.0;
    let mut out_grad = Vec::with_capacity(xt.len());
    for ((&v, &a), &z) in trace.output().iter().zip(&record.target).zip(u0) {
        let r = v - (a - z);
        loss += r * r;
        out_grad.push(2.0 * w * r);
    }
    model.net.backward_trace(&trace, &out_grad, grads)?;
    Ok(w * loss)
}

/// Weighted flow-matching loss of one record at `(u0, t)` and its gradient.
pub fn flow_loss(
    model: &FlowModel,
    record: &TrainRecord,
    u0: &[f64],
    t: f64,
    gamma: f64,
) -> Result<(f64, MlpParams)> {
    check_record(model, record)?;
    Error::check_len("noise", model.flat_dim(), u0.len())?;
    let mut grads = model.net.zeros_like();
    let y = model.normalizer.normalize(&record.obs);
    let loss = accumulate(model, &y, record, u0, t, gamma, &mut grads)?;
    Ok((loss, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub gamma: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 128,
            learning_rate: 1e-3,
            gamma: DEFAULT_GAMMA,
        }
    }
}

fn standard_normal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Fits `model` to `dataset` with minibatch Adam and returns the mean loss
/// of every epoch.
///
/// The observation normalizer is recomputed from the dataset (unless
/// `epochs == 0`, which leaves the model untouched). Each epoch reshuffles
/// the records and draws a fresh `(t, U0)` for every record.
pub fn fit(model: &mut FlowModel, dataset: &[TrainRecord], cfg: &FitConfig, key: StreamKey) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("cannot fit on an empty dataset".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least one".into()));
    }
    if cfg.epochs == 0 {
        return Ok(Vec::new());
    }
    for r in dataset {
        check_record(model, r)?;
    }
    model.normalizer = ObsNormalizer::from_data(model.obs_dim, dataset.iter().map(|r| r.obs.as_slice()))?;
    let normalized: Vec<Vec<f64>> = dataset.iter().map(|r| model.normalizer.normalize(&r.obs)).collect();
    let mut adam = AdamState::new(
        &model.net,
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
    )?;
    let flat = model.flat_dim();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut key.purpose(Purpose::FitShuffle).child(epoch as u64).rng());
        let sample_key = key.purpose(Purpose::FitSample).child(epoch as u64);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let snapshot = &*model;
            let parts = par::map_range(batch.len().div_ceil(GRAD_CHUNK), |c| -> Result<(f64, MlpParams)> {
                let mut grads = snapshot.net.zeros_like();
                let mut loss = 0.0;
                for &i in &batch[c * GRAD_CHUNK..((c + 1) * GRAD_CHUNK).min(batch.len())] {
                    let mut rng = sample_key.child(i as u64).rng();
                    let t: f64 = rng.random();
                    let u0 = standard_normal(flat, &mut rng);
                    loss += accumulate(snapshot, &normalized[i], &dataset[i], &u0, t, cfg.gamma, &mut grads)?;
                }
                Ok((loss, grads))
            });
            let mut grads = model.net.zeros_like();
            let mut batch_loss = 0.0;
            for part in parts {
                let (l, g) = part?;
                batch_loss += l;
                grads.add_scaled(&g, 1.0)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!("flow loss {batch_loss} at epoch {epoch}")));
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut model.net, &grads, &mut adam)?;
            total += batch_loss;
        }
        let mean = total / dataset.len() as f64;
        log::debug!("fit epoch {epoch}: loss {mean:.6}");
        epoch_losses.push(mean);
    }
    Ok(epoch_losses)
}

/// Integrates the field from `u0` over `t in [0, 1)` with step `dt` and
/// returns the clamped plan.
pub fn sample(model: &FlowModel, obs: &[f64], u0: &[f64], dt: f64) -> Result<ActionSequence> {
    Error::check_len("observation", model.obs_dim, obs.len())?;
    Error::check_len("noise", model.flat_dim(), u0.len())?;
    if !(dt > 0.0 && dt <= 1.0) {
        return Err(Error::InvalidArgument(format!("flow step must lie in (0, 1], got {dt}")));
    }
    let steps = (1.0 / dt).round();
    if ((steps * dt) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("flow step {dt} does not divide 1")));
    }
    let y = model.normalizer.normalize(obs);
    let mut u = u0.to_vec();
    for i in 0..steps as usize {
        let t = i as f64 * dt;
        let v = model.velocity(&u, &y, t)?;
        for (ui, vi) in u.iter_mut().zip(v) {
            *ui += dt * vi;
        }
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("flow sample".into()));
    }
    Ok(ActionSequence::from_knots(u, model.num_knots, model.action_dim, model.horizon_steps)?.clamped())
}

/// Initial flow state `(1 - alpha) z + alpha prev` with `z ~ N(0, I)`.
///
/// `prev` should already be shifted to the current control step.
pub fn warm_start_noise<R: Rng + ?Sized>(prev: &[f64], alpha: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("warm-start level must lie in [0, 1], got {alpha}")));
    }
    Ok(prev
        .iter()
        .map(|&p| {
            let z: f64 = StandardNormal.sample(rng);
            if alpha == 1.0 {
                p
            } else {
                (1.0 - alpha) * z + alpha * p
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Dense;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Single linear layer `v = W x + b` over input `[u, y, t]`.
    fn linear_model(flat: usize, obs: usize, weights: Vec<f64>, biases: Vec<f64>) -> FlowModel {
        let net = MlpParams::from_layers(
            &[flat + obs + 1, flat],
            Activation::Identity,
            vec![Dense { weights, biases }],
        )
        .unwrap();
        FlowModel {
            net,
            normalizer: ObsNormalizer::identity(obs),
            num_knots: flat,
            action_dim: 1,
            obs_dim: obs,
            horizon_steps: 10,
        }
    }

    fn toy_model(seed: u64) -> FlowModel {
        FlowModel::new(1, 1, 1, 10, &[32, 32], Activation::Swish, StreamKey::new(seed)).unwrap()
    }

    #[test]
    fn cosine_weight_cases() {
        let target = [1.0, 0.0];
        // previous plan behind the target along the same ray as the noise
        assert!((cosine_weight(&target, &[0.0, 0.0], &[-1.0, 0.0], 2.0) - 1.0).abs() < 1e-15);
        let anti = cosine_weight(&target, &[0.0, 0.0], &[3.0, 0.0], 2.0);
        assert!((anti - (-4.0f64).exp()).abs() < 1e-15);
        // orthogonal
        assert!((cosine_weight(&target, &[0.0, 0.0], &[1.0, 1.0], 2.0) - (-2.0f64).exp()).abs() < 1e-15);
        // degenerate inputs are not discounted
        assert_eq!(cosine_weight(&target, &target, &[0.3, 0.1], 2.0), 1.0);
        assert_eq!(cosine_weight(&target, &[0.0, 0.0], &target, 2.0), 1.0);
    }

    #[test]
    fn perfect_field_has_zero_loss() {
        // with u0 = 0 the target displacement is constant, so a bias-only field matches it
        let model = linear_model(1, 1, vec![0.0, 0.0, 0.0], vec![0.6]);
        let rec = TrainRecord {
            obs: vec![0.2],
            target: vec![0.6],
            prev: vec![0.1],
            env_id: 0,
            step: 0,
        };
        for t in [0.0, 0.3, 0.9] {
            let (loss, grads) = flow_loss(&model, &rec, &[0.0], t, 2.0).unwrap();
            assert_eq!(loss, 0.0);
            assert!(grads.values().all(|&g| g == 0.0));
        }
        let (loss, _) = flow_loss(&model, &rec, &[0.5], 0.5, 2.0).unwrap();
        assert!(loss > 0.0);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let model = toy_model(3);
        let rec = TrainRecord {
            obs: vec![0.4],
            target: vec![0.7],
            prev: vec![0.2],
            env_id: 0,
            step: 1,
        };
        let (_, grads) = flow_loss(&model, &rec, &[-0.3], 0.35, 2.0).unwrap();
        let g: Vec<f64> = grads.values().copied().collect();
        let h = 1e-6;
        for idx in [0, 7, 40, g.len() - 1] {
            let mut plus = model.clone();
            *plus.net.values_mut().nth(idx).unwrap() += h;
            let mut minus = model.clone();
            *minus.net.values_mut().nth(idx).unwrap() -= h;
            let lp = flow_loss(&plus, &rec, &[-0.3], 0.35, 2.0).unwrap().0;
            let lm = flow_loss(&minus, &rec, &[-0.3], 0.35, 2.0).unwrap().0;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - g[idx]).abs() < 1e-6 * (1.0 + fd.abs()), "{idx}: {fd} vs {}", g[idx]);
        }
    }

    #[test]
    fn zero_field_returns_clamped_noise() {
        let model = linear_model(3, 2, vec![0.0; 18], vec![0.0; 3]);
        let out = sample(&model, &[0.1, 0.2], &[0.5, -2.0, 1.5], 0.1).unwrap();
        assert_eq!(out.knots(), &[0.5, -1.0, 1.0]);
    }

    #[test]
    fn constant_field_is_integrated_exactly() {
        let model = linear_model(2, 1, vec![0.0; 8], vec![0.25, -0.5]);
        let out = sample(&model, &[3.0], &[0.0, 0.25], 0.125).unwrap();
        assert_eq!(out.knots(), &[0.25, -0.25]);
        assert!(sample(&model, &[3.0], &[0.0, 0.25], 0.3).is_err());
        assert!(sample(&model, &[3.0, 1.0], &[0.0, 0.25], 0.1).is_err());
    }

    #[test]
    fn warm_start_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let prev = [0.3, -0.7, 1.0];
        assert_eq!(warm_start_noise(&prev, 1.0, &mut rng).unwrap(), prev);
        assert!(warm_start_noise(&prev, 1.5, &mut rng).is_err());
        assert!(warm_start_noise(&prev, -0.1, &mut rng).is_err());
        assert!(warm_start_noise(&prev, f64::NAN, &mut rng).is_err());
    }

    fn moments(alpha: f64, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| warm_start_noise(&[0.0], alpha, &mut rng).unwrap()[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        (mean, var)
    }

    #[test]
    fn warm_start_noise_moments() {
        let (m, v) = moments(0.0, 1);
        assert!(m.abs() < 0.02 && (v - 1.0).abs() < 0.05, "{m} {v}");
        let (m, v) = moments(0.5, 2);
        assert!(m.abs() < 0.02 && (v - 0.25).abs() < 0.0125, "{m} {v}");
    }

    #[test]
    fn normalizer_round_trip() {
        let data = [vec![1.0, -2.0, 5.0], vec![3.0, -2.0, 4.0], vec![-0.5, -2.0, 7.5]];
        let n = ObsNormalizer::from_data(3, data.iter().map(|v| v.as_slice())).unwrap();
        assert_eq!(n.std[1], MIN_STD);
        for y in &data {
            let back = n.denormalize(&n.normalize(y));
            for (a, b) in back.iter().zip(y) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(ObsNormalizer::from_data(3, std::iter::empty()).is_err());
    }

    fn bimodal_dataset() -> Vec<TrainRecord> {
        (0..512)
            .map(|i| {
                let target = if i % 2 == 0 { 0.8 } else { -0.8 };
                TrainRecord {
                    obs: vec![0.0],
                    target: vec![target],
                    prev: vec![target],
                    env_id: i,
                    step: 0,
                }
            })
            .collect()
    }

    fn trained_toy() -> FlowModel {
        let mut model = toy_model(11);
        let cfg = FitConfig {
            epochs: 200,
            batch_size: 64,
            learning_rate: 3e-3,
            gamma: DEFAULT_GAMMA,
        };
        fit(&mut model, &bimodal_dataset(), &cfg, StreamKey::new(12)).unwrap();
        model
    }

    #[test]
    fn fit_with_zero_epochs_is_a_no_op() {
        let mut model = toy_model(1);
        let before = model.clone();
        let cfg = FitConfig {
            epochs: 0,
            ..FitConfig::default()
        };
        assert!(fit(&mut model, &bimodal_dataset(), &cfg, StreamKey::new(0)).unwrap().is_empty());
        assert_eq!(model, before);
        assert!(fit(&mut model, &[], &FitConfig::default(), StreamKey::new(0)).is_err());
    }

    #[test]
    fn fit_is_deterministic() {
        let data = bimodal_dataset();
        let cfg = FitConfig {
            epochs: 2,
            batch_size: 50,
            ..FitConfig::default()
        };
        let mut a = toy_model(4);
        let mut b = toy_model(4);
        let la = fit(&mut a, &data, &cfg, StreamKey::new(9)).unwrap();
        let lb = fit(&mut b, &data, &cfg, StreamKey::new(9)).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a, b);
    }

    #[test]
    fn single_mode_regression_converges() {
        let data: Vec<TrainRecord> = (0..256)
            .map(|i| TrainRecord {
                obs: vec![0.1 * (i % 3) as f64],
                target: vec![0.4],
                prev: vec![0.0],
                env_id: i,
                step: 0,
            })
            .collect();
        let mut model = toy_model(2);
        let dist = |m: &FlowModel| -> f64 {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            (0..100)
                .map(|_| {
                    let z = standard_normal(1, &mut rng);
                    (sample(m, &[0.1], &z, 0.1).unwrap().knots()[0] - 0.4).abs()
                })
                .sum::<f64>()
                / 100.0
        };
        let before = dist(&model);
        let cfg = FitConfig {
            epochs: 60,
            batch_size: 32,
            learning_rate: 3e-3,
            gamma: DEFAULT_GAMMA,
        };
        let losses = fit(&mut model, &data, &cfg, StreamKey::new(3)).unwrap();
        assert!(losses.last().unwrap() < &losses[0]);
        let after = dist(&model);
        assert!(after < 0.25 * before, "{before} -> {after}");
    }

    #[test]
    fn bimodal_targets_keep_both_modes() {
        let model = trained_toy();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let draws: Vec<f64> = (0..1000)
            .map(|_| sample(&model, &[0.0], &standard_normal(1, &mut rng), 0.1).unwrap().knots()[0])
            .collect();
        let pos = draws.iter().filter(|&&x| x > 0.0).count() as f64 / 1000.0;
        assert!((0.2..=0.8).contains(&pos), "positive fraction {pos}");
        let near = draws.iter().filter(|x| (x.abs() - 0.8).abs() < 0.2).count();
        assert!(near > 800, "{near} draws near a mode");

        // warm-started resampling sticks to the mode it starts in
        let mut prev = vec![draws[0]];
        let start = prev[0] > 0.0;
        let mut same = 0;
        for _ in 0..200 {
            let u0 = warm_start_noise(&prev, 1.0, &mut rng).unwrap();
            prev = sample(&model, &[0.0], &u0, 0.1).unwrap().into_knots();
            same += usize::from((prev[0] > 0.0) == start);
        }
        assert!(same >= 190, "{same}/200");
        let mut signs = [false; 2];
        for _ in 0..200 {
            let u0 = warm_start_noise(&prev, 0.0, &mut rng).unwrap();
            let x = sample(&model, &[0.0], &u0, 0.1).unwrap().knots()[0];
            signs[usize::from(x > 0.0)] = true;
        }
        assert!(signs[0] && signs[1]);
    }
}
