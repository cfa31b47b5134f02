//! Multi-layer perceptron regressor trained with mini-batch SGD.
//!
//! Hidden layers apply an affine map followed by the configured activation;
//! the output layer is a single affine unit. The training objective is
//!
//! ```text
//! L = 1/n * sum_i (f(x_i) - y_i)^2  +  alpha / (2n) * sum_w w^2
//! ```
//!
//! where the penalty covers weights only, not biases. Gradients come from
//! backpropagation; [`gradient_check`] compares them against central finite
//! differences.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Epochs without sufficient improvement before training stops.
pub const PATIENCE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Logistic,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Logistic => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Logistic => a * (1.0 - a),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "logistic" | "sigmoid" => Ok(Activation::Logistic),
            other => Err(Error::config(format!("unknown activation `{other}`"))),
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden_layer_sizes: Vec<usize>,
    #[serde(with = "crate::hexfloat")]
    pub alpha: f64,
    pub max_iter: usize,
    pub batch_size: usize,
    #[serde(with = "crate::hexfloat")]
    pub learning_rate: f64,
    pub seed: u64,
    pub activation: Activation,
    #[serde(with = "crate::hexfloat")]
    pub tol: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden_layer_sizes: vec![100],
            alpha: 1e-4,
            max_iter: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            activation: Activation::Relu,
            tol: 1e-6,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layer_sizes.contains(&0) {
            return Err(Error::config("hidden layer sizes must be positive"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Dense layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    #[serde(with = "crate::hexfloat::vec")]
    pub weights: Vec<f64>,
    #[serde(with = "crate::hexfloat::vec")]
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut layer = Layer::zeros(inputs, outputs);
        layer.weights.iter_mut().for_each(|w| *w = rng.random_range(-limit..limit));
        layer.biases.iter_mut().for_each(|b| *b = rng.random_range(-limit..limit));
        layer
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let dot: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(dot + self.biases[o]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub activation: Activation,
    pub layers: Vec<Layer>,
    #[serde(with = "crate::hexfloat::vec")]
    pub loss_trace: Vec<f64>,
}

struct Tape {
    /// Pre-activations per layer.
    z: Vec<Vec<f64>>,
    /// Layer inputs; `a[0]` is x, `a[l + 1]` the activated output of layer l.
    a: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Glorot-uniform initialisation seeded by `params.seed`.
    pub fn init(input_width: usize, params: &MlpParams) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        Self::init_with(input_width, params, &mut rng)
    }

    fn init_with<R: Rng + ?Sized>(input_width: usize, params: &MlpParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        if input_width == 0 {
            return Err(Error::precondition("input width must be positive"));
        }
        let mut sizes = vec![input_width];
        sizes.extend(&params.hidden_layer_sizes);
        sizes.push(1);
        let layers = sizes.windows(2).map(|w| Layer::glorot(w[0], w[1], rng)).collect();
        Ok(MlpModel {
            activation: params.activation,
            layers,
            loss_trace: Vec::new(),
        })
    }

    /// A network with every weight and bias set to zero.
    pub fn zeros(input_width: usize, hidden: &[usize], activation: Activation) -> Self {
        let mut sizes = vec![input_width];
        sizes.extend(hidden);
        sizes.push(1);
        MlpModel {
            activation,
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            loss_trace: Vec::new(),
        }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn tape(&self, x: &[f64]) -> Tape {
        let last = self.layers.len() - 1;
        let mut z = Vec::with_capacity(self.layers.len());
        let mut a = Vec::with_capacity(self.layers.len() + 1);
        a.push(x.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut pre = Vec::with_capacity(layer.outputs);
            layer.affine(&a[l], &mut pre);
            let post = if l == last {
                pre.clone()
            } else {
                pre.iter().map(|&v| self.activation.apply(v)).collect()
            };
            z.push(pre);
            a.push(post);
        }
        Tape { z, a }
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_width() {
            return Err(Error::Shape {
                expected: self.input_width(),
                got: x.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.affine(&cur, &mut next);
            if l != last {
                next.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur[0])
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.forward(r)).collect()
    }

    pub fn squared_weight_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter())
            .map(|w| w * w)
            .sum()
    }

    /// Mean squared error plus `alpha / (2n)` times the squared weight norm.
    pub fn loss(&self, rows: &[Vec<f64>], y: &[f64], alpha: f64) -> Result<f64> {
        check_xy(rows, y, self.input_width())?;
        let n = rows.len() as f64;
        let mut sse = 0.0;
        for (x, t) in rows.iter().zip(y) {
            let e = self.forward(x)? - t;
            sse += e * e;
        }
        Ok(sse / n + alpha / (2.0 * n) * self.squared_weight_norm())
    }

    /// Loss and its gradient, laid out like [`parameters`](Self::parameters).
    pub fn loss_and_gradient(&self, rows: &[Vec<f64>], y: &[f64], alpha: f64) -> Result<(f64, Vec<f64>)> {
        check_xy(rows, y, self.input_width())?;
        let n = rows.len() as f64;
        let mut grads: Vec<Layer> = self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect();
        let mut sse = 0.0;
        let last = self.layers.len() - 1;

        for (x, t) in rows.iter().zip(y) {
            let tape = self.tape(x);
            let e = tape.a[last + 1][0] - t;
            sse += e * e;
            let mut delta = vec![2.0 * e / n];
            for l in (0..=last).rev() {
                let layer = &self.layers[l];
                let g = &mut grads[l];
                let input = &tape.a[l];
                for (o, d) in delta.iter().enumerate() {
                    g.biases[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    row.iter_mut().zip(input).for_each(|(gw, v)| *gw += d * v);
                }
                if l > 0 {
                    let mut back = vec![0.0; layer.inputs];
                    for (o, d) in delta.iter().enumerate() {
                        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        back.iter_mut().zip(row).for_each(|(b, w)| *b += d * w);
                    }
                    let (z, a) = (&tape.z[l - 1], &tape.a[l]);
                    for (k, b) in back.iter_mut().enumerate() {
                        *b *= self.activation.derivative(z[k], a[k]);
                    }
                    delta = back;
                }
            }
        }

        let penalty_scale = alpha / n;
        for (g, layer) in grads.iter_mut().zip(&self.layers) {
            g.weights
                .iter_mut()
                .zip(&layer.weights)
                .for_each(|(gw, w)| *gw += penalty_scale * w);
        }
        let loss = sse / n + alpha / (2.0 * n) * self.squared_weight_norm();
        Ok((loss, flatten(&grads)))
    }

    /// All weights and biases, layer by layer (weights before biases).
    pub fn parameters(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Shape {
                expected: self.parameter_count(),
                got: params.len(),
            });
        }
        let mut it = params.iter();
        for layer in &mut self.layers {
            layer.weights.iter_mut().chain(layer.biases.iter_mut()).for_each(|p| *p = *it.next().unwrap());
        }
        Ok(())
    }

    fn sgd_step(&mut self, grad: &[f64], lr: f64) {
        let mut it = grad.iter();
        for layer in &mut self.layers {
            layer
                .weights
                .iter_mut()
                .chain(layer.biases.iter_mut())
                .for_each(|p| *p -= lr * it.next().unwrap());
        }
    }
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
        .collect()
}

fn check_xy(rows: &[Vec<f64>], y: &[f64], width: usize) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::precondition("no training rows"));
    }
    if rows.len() != y.len() {
        return Err(Error::precondition(format!("{} rows but {} targets", rows.len(), y.len())));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::Shape {
            expected: width,
            got: bad.len(),
        });
    }
    Ok(())
}

/// Initialises a network from `params.seed` and trains it.
pub fn train(rows: &[Vec<f64>], y: &[f64], params: &MlpParams) -> Result<MlpModel> {
    let width = rows
        .first()
        .map(|r| r.len())
        .ok_or_else(|| Error::precondition("no training rows"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let model = MlpModel::init_with(width, params, &mut rng)?;
    train_with(model, rows, y, params, &mut rng)
}

/// Continues training `model`; `params.seed` drives the epoch shuffles.
pub fn train_from(model: MlpModel, rows: &[Vec<f64>], y: &[f64], params: &MlpParams) -> Result<MlpModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    train_with(model, rows, y, params, &mut rng)
}

fn train_with<R: Rng + ?Sized>(
    mut model: MlpModel,
    rows: &[Vec<f64>],
    y: &[f64],
    params: &MlpParams,
    rng: &mut R,
) -> Result<MlpModel> {
    params.validate()?;
    check_xy(rows, y, model.input_width())?;
    if params.max_iter == 0 {
        return Ok(model);
    }
    let n = rows.len();
    let batch = params.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, model.clone());
    let mut trace = Vec::new();
    let mut stale = 0;
    let mut batch_rows = Vec::with_capacity(batch);
    let mut batch_y = Vec::with_capacity(batch);

    for _ in 0..params.max_iter {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            batch_rows.clear();
            batch_y.clear();
            for &i in chunk {
                batch_rows.push(rows[i].clone());
                batch_y.push(y[i]);
            }
            let (_, grad) = model.loss_and_gradient(&batch_rows, &batch_y, params.alpha)?;
            model.sgd_step(&grad, params.learning_rate);
        }
        let loss = model.loss(rows, y, params.alpha)?;
        if !loss.is_finite() {
            return Err(Error::Training(format!(
                "loss diverged to {loss} after {} epochs; lower the learning rate",
                trace.len() + 1
            )));
        }
        trace.push(loss);
        if loss < best.0 - params.tol {
            best = (loss, model.clone());
            stale = 0;
        } else {
            if loss < best.0 {
                best = (loss, model.clone());
            }
            stale += 1;
            if stale >= PATIENCE {
                break;
            }
        }
    }
    let mut out = best.1;
    out.loss_trace = trace;
    Ok(out)
}

/// Largest relative disagreement between backpropagated and central
/// finite-difference gradients: `|g_bp - g_fd| / max(1e-8, |g_bp| + |g_fd|)`.
pub fn gradient_check(model: &MlpModel, rows: &[Vec<f64>], y: &[f64], alpha: f64, epsilon: f64) -> Result<f64> {
    let (_, analytic) = model.loss_and_gradient(rows, y, alpha)?;
    let base = model.parameters();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (k, g_bp) in analytic.iter().enumerate() {
        let mut p = base.clone();
        p[k] = base[k] + epsilon;
        probe.set_parameters(&p)?;
        let up = probe.loss(rows, y, alpha)?;
        p[k] = base[k] - epsilon;
        probe.set_parameters(&p)?;
        let down = probe.loss(rows, y, alpha)?;
        let g_fd = (up - down) / (2.0 * epsilon);
        worst = worst.max(relative_error(*g_bp, g_fd));
    }
    Ok(worst)
}

pub(crate) fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_outputs_zero() {
        let m = MlpModel::zeros(3, &[4, 2], Activation::Tanh);
        assert_eq!(m.forward(&[1.0, -2.0, 5.0]).unwrap(), 0.0);
        assert_eq!(m.loss(&[vec![0.0; 3]], &[2.0], 0.0).unwrap(), 4.0);
        assert_eq!(m.loss(&[vec![0.0; 3]], &[0.0], 3.0).unwrap(), 0.0);
    }

    #[test]
    fn unit_relu_network() {
        let mut m = MlpModel::zeros(1, &[1], Activation::Relu);
        m.layers[0].weights[0] = 1.0;
        m.layers[1].weights[0] = 1.0;
        assert_eq!(m.forward(&[2.0]).unwrap(), 2.0);
        assert_eq!(m.forward(&[-2.0]).unwrap(), 0.0);
    }

    #[test]
    fn perfect_predictions_zero_loss() {
        let mut m = MlpModel::zeros(1, &[1], Activation::Relu);
        m.layers[0].weights[0] = 1.0;
        m.layers[1].weights[0] = 1.0;
        let x = vec![vec![1.0], vec![3.0]];
        assert_eq!(m.loss(&x, &[1.0, 3.0], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn width_mismatch() {
        let m = MlpModel::zeros(2, &[2], Activation::Relu);
        assert!(matches!(m.forward(&[1.0]), Err(Error::Shape { expected: 2, got: 1 })));
    }

    #[test]
    fn zero_epochs_returns_init() {
        let params = MlpParams {
            hidden_layer_sizes: vec![5],
            max_iter: 0,
            seed: 9,
            ..MlpParams::default()
        };
        let x = vec![vec![0.1, 0.2], vec![0.3, 0.4]];
        let trained = train(&x, &[1.0, 2.0], &params).unwrap();
        assert_eq!(trained, MlpModel::init(2, &params).unwrap());
    }

    #[test]
    fn gradient_check_tanh_and_logistic() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 6.0, (i as f64).cos()]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 2.0 - r[1]).collect();
        for activation in [Activation::Tanh, Activation::Logistic] {
            let params = MlpParams {
                hidden_layer_sizes: vec![4, 3],
                activation,
                seed: 3,
                ..MlpParams::default()
            };
            let m = MlpModel::init(2, &params).unwrap();
            let err = gradient_check(&m, &x, &y, 0.1, 1e-5).unwrap();
            assert!(err < 1e-6, "{activation:?}: {err}");
        }
    }

    #[test]
    fn gradient_check_zero_network() {
        let m = MlpModel::zeros(2, &[3], Activation::Tanh);
        let x = vec![vec![0.5, 0.5]];
        assert!(gradient_check(&m, &x, &[0.0], 0.0, 1e-5).unwrap() < 1e-6);
    }

    #[test]
    fn divergence_is_reported() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 1e3 * i as f64).collect();
        let params = MlpParams {
            hidden_layer_sizes: vec![8],
            learning_rate: 1e8,
            activation: Activation::Tanh,
            max_iter: 50,
            ..MlpParams::default()
        };
        assert!(matches!(train(&x, &y, &params), Err(Error::Training(_))));
    }
}
