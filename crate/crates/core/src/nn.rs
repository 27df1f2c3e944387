//! Small fully connected networks with hand-written backpropagation.
//!
//! Batches are row-major: one example per row. A layer computes
//! `act(x Wᵀ + b)` with `W` stored as `out × in`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const POWER_ITERATIONS: usize = 100;
const POWER_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    // ReLU subgradient at exactly 0 is 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
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
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.nrows(),
                got: bias.len(),
            });
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Values saved by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
}

/// Parameter gradients, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTape {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl GradientTape {
    pub fn zeros_like(model: &FeedForwardModel) -> Self {
        Self {
            weights: model
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weights.raw_dim()))
                .collect(),
            biases: model
                .layers
                .iter()
                .map(|l| Array1::zeros(l.bias.raw_dim()))
                .collect(),
        }
    }

    /// Gradients in the same order as [`FeedForwardModel::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

/// A stack of affine layers with elementwise activations and an optional
/// parameter box `[−clip_bound, clip_bound]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardModel {
    layers: Vec<Layer>,
    clip_bound: Option<f64>,
}

impl FeedForwardModel {
    /// ReLU hidden layers and an identity output layer.
    pub fn init(sizes: &[usize], seed: u64, clip_bound: Option<f64>) -> Result<Self> {
        Self::init_with_output(sizes, seed, clip_bound, Activation::Identity)
    }

    /// Like [`init`](Self::init) but with a chosen activation on the last layer.
    /// Weights are uniform in `±1/√fan_in`, biases zero.
    pub fn init_with_output(
        sizes: &[usize],
        seed: u64,
        clip_bound: Option<f64>,
        output: Activation,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 layer sizes, got {}",
                sizes.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidArgument("layer sizes must be positive".into()));
        }
        check_clip(clip_bound)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = 1.0 / (fan_in as f64).sqrt();
                let weights =
                    Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-scale..=scale));
                Layer {
                    weights,
                    bias: Array1::zeros(fan_out),
                    activation: if k == last { output } else { Activation::Relu },
                }
            })
            .collect();
        Ok(Self { layers, clip_bound })
    }

    pub fn from_layers(layers: Vec<Layer>, clip_bound: Option<f64>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("model needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].outputs(),
                    got: pair[1].inputs(),
                });
            }
        }
        check_clip(clip_bound)?;
        Ok(Self { layers, clip_bound })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn clip_bound(&self) -> Option<f64> {
        self.clip_bound
    }

    pub fn set_clip_bound(&mut self, clip_bound: Option<f64>) -> Result<()> {
        check_clip(clip_bound)?;
        self.clip_bound = clip_bound;
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    /// `[in, hidden…, out]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::outputs))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// `self` followed by `next`; keeps `self`'s clip bound.
    pub fn then(&self, next: &FeedForwardModel) -> Result<Self> {
        let layers = self.layers.iter().chain(&next.layers).cloned().collect();
        Self::from_layers(layers, self.clip_bound)
    }

    /// Splits after the first `k` layers.
    pub fn split_at(&self, k: usize) -> Result<(Self, Self)> {
        if k == 0 || k >= self.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot split {} layers at {k}",
                self.layers.len()
            )));
        }
        Ok((
            Self::from_layers(self.layers[..k].to_vec(), self.clip_bound)?,
            Self::from_layers(self.layers[k..].to_vec(), self.clip_bound)?,
        ))
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let batch = Array2::from_shape_vec((1, x.len()), x.to_vec())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let (out, cache) = self.forward_batch(batch.view())?;
        Ok((out.row(0).to_vec(), cache))
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(x.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = x.to_owned();
        for layer in &self.layers {
            let z = current.dot(&layer.weights.t()) + &layer.bias;
            let a = z.mapv(|v| layer.activation.apply(v));
            inputs.push(current);
            pre_activations.push(z);
            current = a;
        }
        Ok((
            current,
            ForwardCache {
                inputs,
                pre_activations,
            },
        ))
    }

    /// Forward pass without keeping intermediate values.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut current = x.to_owned();
        for layer in &self.layers {
            let mut z = current.dot(&layer.weights.t()) + &layer.bias;
            z.mapv_inplace(|v| layer.activation.apply(v));
            current = z;
        }
        Ok(current)
    }

    /// Gradients of `Σ output ⊙ output_grad` with respect to every parameter
    /// (summed over the batch) and with respect to the inputs.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
    ) -> Result<(GradientTape, Array2<f64>)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len(),
                got: cache.inputs.len(),
            });
        }
        let last = cache.pre_activations.last().unwrap();
        if output_grad.dim() != last.dim() {
            return Err(Error::DimensionMismatch {
                expected: last.len(),
                got: output_grad.len(),
            });
        }
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut biases = Vec::with_capacity(self.layers.len());
        let mut upstream = output_grad.to_owned();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[k];
            let mut dz = upstream;
            ndarray::Zip::from(&mut dz)
                .and(z)
                .for_each(|g, &zv| *g *= layer.activation.derivative(zv));
            weights.push(dz.t().dot(&cache.inputs[k]));
            biases.push(dz.sum_axis(Axis(0)));
            upstream = dz.dot(&layer.weights);
        }
        weights.reverse();
        biases.reverse();
        Ok((GradientTape { weights, biases }, upstream))
    }

    /// Adds `scale · tape` to the parameters.
    pub fn add_scaled(&mut self, tape: &GradientTape, scale: f64) {
        for (layer, (gw, gb)) in self
            .layers
            .iter_mut()
            .zip(tape.weights.iter().zip(&tape.biases))
        {
            layer.weights.scaled_add(scale, gw);
            layer.bias.scaled_add(scale, gb);
        }
    }

    /// Clamps every weight and bias into `[−clip_bound, clip_bound]`.
    pub fn clip_weights(&mut self) -> Result<()> {
        let c = self.clip_bound.ok_or(Error::NotClipConfigured)?;
        for layer in &mut self.layers {
            layer.weights.mapv_inplace(|v| v.clamp(-c, c));
            layer.bias.mapv_inplace(|v| v.clamp(-c, c));
        }
        Ok(())
    }

    pub fn max_abs_param(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Product of per-layer spectral norms: an upper bound on the Euclidean
    /// Lipschitz constant when every activation is 1-Lipschitz.
    pub fn lipschitz_upper(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| spectral_norm(&l.weights))
            .product()
    }

    /// Largest observed `‖m(x) − m(x′)‖ / ‖x − x′‖` over seeded random pairs.
    ///
    /// Half the probes are far pairs of standard normal inputs, half are
    /// small perturbations that pick up local slopes.
    pub fn lipschitz_lower_estimate(&self, probes: usize, seed: u64) -> Result<f64> {
        if probes < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 probes, got {probes}")));
        }
        let d = self.input_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Array2::zeros((probes, d));
        let mut b = Array2::zeros((probes, d));
        for i in 0..probes {
            let local = i % 2 == 1;
            for j in 0..d {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                a[[i, j]] = x;
                b[[i, j]] = if local { x + 1e-3 * y } else { y };
            }
        }
        let fa = self.predict_batch(a.view())?;
        let fb = self.predict_batch(b.view())?;
        let mut best: f64 = 0.0;
        for i in 0..probes {
            let dx = (&a.row(i) - &b.row(i)).mapv(|v| v * v).sum().sqrt();
            if dx == 0.0 {
                continue;
            }
            let dy = (&fa.row(i) - &fb.row(i)).mapv(|v| v * v).sum().sqrt();
            best = best.max(dy / dx);
        }
        Ok(best)
    }

    /// All parameters, layer by layer, weights (row-major) then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = *it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = *it.next().unwrap());
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            layer_sizes: self.layer_sizes(),
            activations: self.layers.iter().map(|l| l.activation).collect(),
            clip_bound: self.clip_bound,
            weights: self
                .layers
                .iter()
                .map(|l| l.weights.iter().copied().collect())
                .collect(),
            biases: self.layers.iter().map(|l| l.bias.to_vec()).collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let n = ck.layer_sizes.len().saturating_sub(1);
        if n == 0 || ck.activations.len() != n || ck.weights.len() != n || ck.biases.len() != n {
            return Err(Error::InvalidArgument("inconsistent checkpoint".into()));
        }
        let layers = (0..n)
            .map(|k| {
                let (fan_in, fan_out) = (ck.layer_sizes[k], ck.layer_sizes[k + 1]);
                let weights = Array2::from_shape_vec((fan_out, fan_in), ck.weights[k].clone())
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                Layer::new(weights, Array1::from(ck.biases[k].clone()), ck.activations[k])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers, ck.clip_bound)
    }

    fn check_input(&self, got: usize) -> Result<()> {
        if got != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got,
            });
        }
        Ok(())
    }
}

fn check_clip(clip_bound: Option<f64>) -> Result<()> {
    match clip_bound {
        Some(c) if !(c > 0.0 && c.is_finite()) => Err(Error::InvalidArgument(format!(
            "clip bound must be positive, got {c}"
        ))),
        _ => Ok(()),
    }
}

/// Largest singular value by power iteration on `WᵀW`.
pub fn spectral_norm(w: &Array2<f64>) -> f64 {
    let n = w.ncols();
    if n == 0 || w.nrows() == 0 {
        return 0.0;
    }
    // Fixed, non-degenerate start vector.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Array1<f64> = Array1::from_shape_fn(n, |_| rng.random_range(0.5..1.5));
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let u = w.dot(&v);
        let next = w.t().dot(&u);
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let estimate = u.dot(&u).sqrt();
        v = next / norm;
        if (estimate - sigma).abs() <= POWER_TOLERANCE * estimate.max(1.0) {
            sigma = estimate;
            break;
        }
        sigma = estimate;
    }
    let u = w.dot(&v);
    sigma.max(u.dot(&u).sqrt())
}

/// Flat JSON checkpoint; weights are row-major `out × in` per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub clip_bound: Option<f64>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Result of comparing backprop against central finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub params_checked: usize,
}

impl GradCheck {
    /// Every parameter within `rel_tol` relative error, or within `abs_floor` absolutely.
    pub fn passes(&self, rel_tol: f64, abs_floor: f64) -> bool {
        self.max_rel_error <= rel_tol || self.max_abs_error <= abs_floor
    }
}

/// Checks backprop gradients of `Σ m(x) ⊙ output_grad` on a batch against
/// central differences with step `h`.
///
/// Parameters whose perturbation flips a ReLU (the loss is not
/// differentiable across the kink) are skipped.
pub fn finite_difference_check(
    model: &FeedForwardModel,
    x: ArrayView2<f64>,
    output_grad: ArrayView2<f64>,
    h: f64,
    abs_floor: f64,
) -> Result<GradCheck> {
    let (_, cache) = model.forward_batch(x)?;
    let (tape, _) = model.backward(&cache, output_grad)?;
    let analytic = tape.flat();
    let base = model.params_flat();
    let mut probe = model.clone();
    let objective = |m: &FeedForwardModel| -> Result<f64> {
        let out = m.predict_batch(x)?;
        Ok((&out * &output_grad).sum())
    };
    let pattern = |m: &FeedForwardModel| -> Result<Vec<bool>> {
        let (_, c) = m.forward_batch(x)?;
        Ok(c
            .pre_activations
            .iter()
            .flat_map(|z| z.iter().map(|v| *v > 0.0).collect::<Vec<_>>())
            .collect())
    };
    let reference = pattern(model)?;
    let mut report = GradCheck {
        max_abs_error: 0.0,
        max_rel_error: 0.0,
        params_checked: 0,
    };
    let mut params = base.clone();
    for i in 0..params.len() {
        params[i] = base[i] + h;
        probe.set_params_flat(&params)?;
        let plus = objective(&probe)?;
        let kink_plus = pattern(&probe)? != reference;
        params[i] = base[i] - h;
        probe.set_params_flat(&params)?;
        let minus = objective(&probe)?;
        let kink_minus = pattern(&probe)? != reference;
        params[i] = base[i];
        if kink_plus || kink_minus {
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let abs = (numeric - analytic[i]).abs();
        let rel = if abs <= abs_floor {
            0.0
        } else {
            abs / numeric.abs().max(analytic[i].abs())
        };
        report.max_abs_error = report.max_abs_error.max(abs);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.params_checked += 1;
    }
    Ok(report)
}
