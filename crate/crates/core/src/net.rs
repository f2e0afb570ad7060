//! A small dense MLP with hand-written reverse-mode gradients and Adam.
//!
//! Weights are stored row-major with one row per output unit. Hidden layers
//! share one activation; the output layer is always affine.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Swish,
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Swish => z * sigmoid(z),
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Swish => {
                let s = sigmoid(z);
                s + z * s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Swish => "swish",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swish" => Ok(Activation::Swish),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidArgument(format!("unknown activation '{other}'"))),
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Dot product with four independent accumulators.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// Row-major `(out, in)`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Parameters of the MLP. Also used as the container for gradients and
/// Adam moments, which share the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    activation: Activation,
    layers: Vec<Dense>,
}

/// Per-layer values recorded by a forward pass, consumed by backward.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `activations[0]` is the input; `activations[l + 1]` is layer `l`'s output.
    activations: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has an input layer")
    }
}

impl MlpParams {
    /// All-zero parameters.
    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "an MLP needs at least an input and an output size".into(),
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument("layer sizes must be positive".into()));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| Dense {
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            layers,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = Self::zeros(layer_sizes, activation)?;
        for (layer, w) in params.layers.iter_mut().zip(layer_sizes.windows(2)) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
            for x in &mut layer.weights {
                *x = dist.sample(rng);
            }
        }
        Ok(params)
    }

    /// Assembles parameters from explicit layers, validating every shape.
    pub fn from_layers(
        layer_sizes: &[usize],
        activation: Activation,
        layers: Vec<Dense>,
    ) -> Result<Self> {
        let template = Self::zeros(layer_sizes, activation)?;
        Error::check_len("layer count", template.layers.len(), layers.len())?;
        for (t, l) in template.layers.iter().zip(&layers) {
            Error::check_len("weight matrix", t.weights.len(), l.weights.len())?;
            Error::check_len("bias vector", t.biases.len(), l.biases.len())?;
        }
        let out = Self {
            layers,
            ..template
        };
        if !out.is_finite() {
            return Err(Error::NonFinite("MLP parameters".into()));
        }
        Ok(out)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.layer_sizes, self.activation).expect("shape already validated")
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Every scalar, layer by layer, weights (row-major) before biases.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|x| x.is_finite())
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.layer_sizes != other.layer_sizes {
            return Err(Error::InvalidArgument(format!(
                "shape mismatch: {:?} vs {:?}",
                self.layer_sizes, other.layer_sizes
            )));
        }
        Ok(())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) -> Result<()> {
        self.same_shape(other)?;
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for a in self.values_mut() {
            *a *= factor;
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("MLP input", self.input_dim(), input.len())?;
        let mut x = input.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let n_in = self.layer_sizes[l];
            let mut y: Vec<f64> = layer
                .weights
                .chunks_exact(n_in)
                .zip(&layer.biases)
                .map(|(row, b)| dot(row, &x) + b)
                .collect();
            if l < last {
                for v in &mut y {
                    *v = self.activation.apply(*v);
                }
            }
            x = y;
        }
        Ok(x)
    }

    /// Forward pass keeping every intermediate needed by [`Self::backward_trace`].
    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        Error::check_len("MLP input", self.input_dim(), input.len())?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let n_in = self.layer_sizes[l];
            let x = &activations[l];
            let z: Vec<f64> = layer
                .weights
                .chunks_exact(n_in)
                .zip(&layer.biases)
                .map(|(row, b)| dot(row, x) + b)
                .collect();
            let a = if l < last {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            } else {
                z.clone()
            };
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(Trace {
            activations,
            pre_activations,
        })
    }

    /// Accumulates the parameter gradient of `<output, output_gradient>` into
    /// `grads` and returns the gradient with respect to the input.
    pub fn backward_trace(
        &self,
        trace: &Trace,
        output_gradient: &[f64],
        grads: &mut MlpParams,
    ) -> Result<Vec<f64>> {
        Error::check_len("output gradient", self.output_dim(), output_gradient.len())?;
        self.same_shape(grads)?;
        let last = self.layers.len() - 1;
        let mut delta = output_gradient.to_vec();
        for l in (0..self.layers.len()).rev() {
            if l < last {
                for (d, &z) in delta.iter_mut().zip(&trace.pre_activations[l]) {
                    *d *= self.activation.derivative(z);
                }
            }
            let n_in = self.layer_sizes[l];
            let x = &trace.activations[l];
            let g = &mut grads.layers[l];
            for ((grow, gb), &d) in g
                .weights
                .chunks_exact_mut(n_in)
                .zip(g.biases.iter_mut())
                .zip(&delta)
            {
                *gb += d;
                axpy(d, x, grow);
            }
            let mut below = vec![0.0; n_in];
            for (row, &d) in self.layers[l].weights.chunks_exact(n_in).zip(&delta) {
                axpy(d, row, &mut below);
            }
            delta = below;
        }
        Ok(delta)
    }

    /// Exact reverse-mode gradients of `<forward(input), output_gradient>`.
    pub fn backward(&self, input: &[f64], output_gradient: &[f64]) -> Result<(MlpParams, Vec<f64>)> {
        let trace = self.forward_trace(input)?;
        let mut grads = self.zeros_like();
        let input_gradient = self.backward_trace(&trace, output_gradient, &mut grads)?;
        Ok((grads, input_gradient))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: MlpParams,
    pub second_moment: MlpParams,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Result<Self> {
        if !(config.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(Self {
            config,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step_count: 0,
        })
    }
}

/// One bias-corrected Adam update. Rejects non-finite gradients without
/// touching `params` or `state`.
pub fn adam_step(params: &mut MlpParams, grads: &MlpParams, state: &mut AdamState) -> Result<()> {
    params.same_shape(grads)?;
    params.same_shape(&state.first_moment)?;
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (((p, g), m), v) in params
        .values_mut()
        .zip(grads.values())
        .zip(state.first_moment.values_mut())
        .zip(state.second_moment.values_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_params(sizes: &[usize], act: Activation, seed: u64) -> MlpParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = MlpParams::glorot(sizes, act, &mut rng).unwrap();
        for b in p.layers.iter_mut().flat_map(|l| l.biases.iter_mut()) {
            *b = rng.random_range(-0.5..0.5);
        }
        p
    }

    /// Straightforward per-element recomputation of the layer chain.
    fn reference_forward(p: &MlpParams, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let n = p.layers.len();
        for (l, layer) in p.layers.iter().enumerate() {
            let n_in = p.layer_sizes[l];
            let n_out = p.layer_sizes[l + 1];
            let mut next = vec![0.0; n_out];
            for o in 0..n_out {
                let mut s = layer.biases[o];
                for i in 0..n_in {
                    s += layer.weights[o * n_in + i] * a[i];
                }
                next[o] = if l + 1 < n {
                    match p.activation {
                        Activation::Swish => s / (1.0 + (-s).exp()),
                        Activation::Tanh => s.tanh(),
                        Activation::Relu => {
                            if s > 0.0 {
                                s
                            } else {
                                0.0
                            }
                        }
                        Activation::Identity => s,
                    }
                } else {
                    s
                };
            }
            a = next;
        }
        a
    }

    #[test]
    fn zero_params_give_zero_output() {
        let p = MlpParams::zeros(&[4, 8, 3], Activation::Swish).unwrap();
        assert_eq!(p.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut p = MlpParams::zeros(&[3, 3], Activation::Identity).unwrap();
        for i in 0..3 {
            p.layers[0].weights[i * 3 + i] = 1.0;
        }
        let x = [0.25, -1.5, 7.0];
        assert_eq!(p.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn forward_matches_reference() {
        for (seed, act) in [(1, Activation::Swish), (2, Activation::Tanh), (3, Activation::Relu)] {
            let p = random_params(&[5, 7, 6, 2], act, seed);
            let x = [0.3, -0.2, 1.1, 0.0, -0.7];
            let got = p.forward(&x).unwrap();
            let want = reference_forward(&p, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
            let trace = p.forward_trace(&x).unwrap();
            assert_eq!(trace.output(), got.as_slice());
        }
    }

    #[test]
    fn forward_is_bitwise_repeatable() {
        let p = random_params(&[4, 16, 3], Activation::Swish, 9);
        let x = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(p.forward(&x).unwrap(), p.forward(&x).unwrap());
    }

    #[test]
    fn wrong_input_length_is_rejected() {
        let p = MlpParams::zeros(&[4, 2], Activation::Tanh).unwrap();
        assert!(matches!(p.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(p.backward(&[0.0; 4], &[1.0]).is_err());
    }

    #[test]
    fn linear_layer_weight_gradient_is_outer_product() {
        let p = random_params(&[3, 2], Activation::Identity, 4);
        let x = [1.0, -2.0, 0.5];
        let g = [0.7, -0.3];
        let (grads, dx) = p.backward(&x, &g).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                assert!((grads.layers[0].weights[o * 3 + i] - g[o] * x[i]).abs() < 1e-15);
            }
            assert_eq!(grads.layers[0].biases[o], g[o]);
        }
        for i in 0..3 {
            let want = g[0] * p.layers[0].weights[i] + g[1] * p.layers[0].weights[3 + i];
            assert!((dx[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let p = random_params(&[3, 5, 2], Activation::Swish, 5);
        let (grads, dx) = p.backward(&[0.1, 0.2, 0.3], &[0.0, 0.0]).unwrap();
        assert!(grads.values().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut p = random_params(&[2, 3, 1], Activation::Tanh, 6);
        let before = p.clone();
        let mut state = AdamState::new(&p, AdamConfig::default()).unwrap();
        state.first_moment.values_mut().for_each(|m| *m = 1.0);
        let zero = p.zeros_like();
        adam_step(&mut p, &zero, &mut state).unwrap();
        // moments decay, and the bias-corrected first moment is non-zero, so
        // only check the decay here; a fresh state leaves params unchanged.
        assert!(state.first_moment.values().all(|&m| (m - 0.9).abs() < 1e-15));
        let mut q = before.clone();
        let mut fresh = AdamState::new(&q, AdamConfig::default()).unwrap();
        adam_step(&mut q, &zero, &mut fresh).unwrap();
        assert_eq!(q, before);
        assert_eq!(fresh.step_count, 1);
    }

    #[test]
    fn adam_first_step_is_learning_rate_times_sign() {
        let mut p = random_params(&[2, 2], Activation::Identity, 7);
        let before = p.clone();
        let mut grads = p.zeros_like();
        for (i, g) in grads.values_mut().enumerate() {
            *g = if i % 2 == 0 { 0.37 * (i + 1) as f64 } else { -2.5 };
        }
        let mut state = AdamState::new(&p, AdamConfig::default()).unwrap();
        adam_step(&mut p, &grads, &mut state).unwrap();
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        for ((a, b), g) in p.values().zip(before.values()).zip(grads.values()) {
            let step = b - a;
            let want = 1e-3 * g / (g.abs() + 1e-8);
            assert!((step - want).abs() < 1e-15, "{step} vs {want}");
        }
    }

    #[test]
    fn adam_constant_gradient_descends() {
        let mut p = MlpParams::zeros(&[1, 1], Activation::Identity).unwrap();
        let mut grads = p.zeros_like();
        grads.values_mut().for_each(|g| *g = 0.2);
        let mut state = AdamState::new(&p, AdamConfig::default()).unwrap();
        for _ in 0..100 {
            adam_step(&mut p, &grads, &mut state).unwrap();
        }
        assert!(p.values().all(|&v| v < -0.05));
        assert_eq!(state.step_count, 100);
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut p = MlpParams::zeros(&[2, 1], Activation::Identity).unwrap();
        let mut grads = p.zeros_like();
        grads.layers[0].weights[1] = f64::NAN;
        let mut state = AdamState::new(&p, AdamConfig::default()).unwrap();
        assert!(matches!(adam_step(&mut p, &grads, &mut state), Err(Error::NonFinite(_))));
        assert_eq!(state.step_count, 0);
    }

    #[test]
    fn from_layers_validates_shapes() {
        let bad = vec![Dense {
            weights: vec![0.0; 5],
            biases: vec![0.0; 2],
        }];
        assert!(MlpParams::from_layers(&[3, 2], Activation::Tanh, bad).is_err());
    }
}
