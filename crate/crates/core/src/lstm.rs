//! Stacked LSTM sequence regressor trained by backpropagation through time.
//!
//! A lookback window of normalised daily values is fed one value per time
//! step through the stacked cells, starting from zero states. An affine
//! readout maps the final top-layer hidden state to `lookforward` outputs at
//! once. Each cell uses the standard gate equations:
//!
//! ```text
//! i = σ(W_i x + U_i h + b_i)      f = σ(W_f x + U_f h + b_f)
//! o = σ(W_o x + U_o h + b_o)      g = tanh(W_g x + U_g h + b_g)
//! c' = f ⊙ c + i ⊙ g              h' = o ⊙ tanh(c')
//! ```

use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::sigmoid;
use crate::series::DailySeries;

/// Global gradient-norm ceiling applied to every mini-batch update.
pub const CLIP_NORM: f64 = 1.0;
/// Epochs without sufficient improvement before training stops.
pub const PATIENCE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub lookback: usize,
    pub lookforward: usize,
}

impl WindowSpec {
    pub fn new(lookback: usize, lookforward: usize) -> Result<Self> {
        if lookback == 0 || lookforward == 0 {
            return Err(Error::config("lookback and lookforward must both be at least 1"));
        }
        Ok(WindowSpec { lookback, lookforward })
    }

    pub fn min_series_len(&self) -> usize {
        self.lookback + self.lookforward
    }

    /// Number of windows a series of `len` days yields.
    pub fn sample_count(&self, len: usize) -> usize {
        (len + 1).saturating_sub(self.min_series_len())
    }
}

/// Affine map of a series onto [0, 1] by its min and max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    #[serde(with = "crate::hexfloat")]
    pub min: f64,
    #[serde(with = "crate::hexfloat")]
    pub max: f64,
}

impl Normalizer {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::precondition("cannot normalise an empty series"));
        }
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Ok(Normalizer { min, max })
    }

    pub fn normalize(&self, v: f64) -> f64 {
        if self.max > self.min {
            (v - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        if self.max > self.min {
            v * (self.max - self.min) + self.min
        } else {
            self.min
        }
    }
}

/// Sliding-window training samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Windows {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub spec: WindowSpec,
    pub normalizer: Normalizer,
}

impl Windows {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// CSV with `X_0..X_{lookback-1}` then `Y_0..Y_{lookforward-1}`, in
    /// normalised units.
    pub fn to_csv(&self) -> String {
        let mut header: Vec<String> = (0..self.spec.lookback).map(|i| format!("X_{i}")).collect();
        header.extend((0..self.spec.lookforward).map(|i| format!("Y_{i}")));
        let mut out = header.join(",");
        out.push('\n');
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            let row: Vec<String> = x.iter().chain(y).map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

type Rows = Vec<Vec<f64>>;

/// Raw (unnormalised) windows: sample k has input `values[k..k+lookback]`
/// and target `values[k+lookback..k+lookback+lookforward]`.
pub fn slice_windows(values: &[f64], spec: WindowSpec) -> Result<(Rows, Rows)> {
    if values.len() < spec.min_series_len() {
        return Err(Error::precondition(format!(
            "series of {} days is too short: lookback {} + lookforward {} needs at least {} days",
            values.len(),
            spec.lookback,
            spec.lookforward,
            spec.min_series_len()
        )));
    }
    let count = spec.sample_count(values.len());
    let inputs = (0..count).map(|k| values[k..k + spec.lookback].to_vec()).collect();
    let targets = (0..count)
        .map(|k| values[k + spec.lookback..k + spec.min_series_len()].to_vec())
        .collect();
    Ok((inputs, targets))
}

/// Windows over a complete series, normalised by the series min and max.
pub fn make_windows(series: &DailySeries, spec: WindowSpec) -> Result<Windows> {
    let values = series.dense()?;
    make_windows_from_values(&values, spec)
}

pub fn make_windows_from_values(values: &[f64], spec: WindowSpec) -> Result<Windows> {
    let (raw_in, raw_out) = slice_windows(values, spec)?;
    let normalizer = Normalizer::fit(values)?;
    let norm = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.into_iter()
            .map(|r| r.into_iter().map(|v| normalizer.normalize(v)).collect())
            .collect()
    };
    Ok(Windows {
        inputs: norm(raw_in),
        targets: norm(raw_out),
        spec,
        normalizer,
    })
}

/// Gate block order inside the stacked weight matrices.
const GATE_I: usize = 0;
const GATE_F: usize = 1;
const GATE_O: usize = 2;
const GATE_G: usize = 3;

/// Weights of one LSTM layer. `w` is `4H x D`, `u` is `4H x H` and `b` is
/// `4H`, each stacked in gate order input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellWeights {
    pub input_size: usize,
    pub hidden_size: usize,
    #[serde(with = "crate::hexfloat::vec")]
    pub w: Vec<f64>,
    #[serde(with = "crate::hexfloat::vec")]
    pub u: Vec<f64>,
    #[serde(with = "crate::hexfloat::vec")]
    pub b: Vec<f64>,
}

/// Per-step values cached for backpropagation.
#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates, `4H` in gate order.
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCellWeights {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmCellWeights {
            input_size,
            hidden_size,
            w: vec![0.0; 4 * hidden_size * input_size],
            u: vec![0.0; 4 * hidden_size * hidden_size],
            b: vec![0.0; 4 * hidden_size],
        }
    }

    /// Glorot-uniform input and recurrent weights, zero biases except the
    /// forget gate, which starts at 1.
    pub fn init<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let mut cell = Self::zeros(input_size, hidden_size);
        let lw = (6.0 / (input_size + hidden_size) as f64).sqrt();
        let lu = (6.0 / (2 * hidden_size) as f64).sqrt();
        cell.w.iter_mut().for_each(|v| *v = rng.random_range(-lw..lw));
        cell.u.iter_mut().for_each(|v| *v = rng.random_range(-lu..lu));
        cell.b[GATE_F * hidden_size..(GATE_F + 1) * hidden_size]
            .iter_mut()
            .for_each(|v| *v = 1.0);
        cell
    }

    pub fn parameter_count(&self) -> usize {
        self.w.len() + self.u.len() + self.b.len()
    }

    fn check(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<()> {
        if x.len() != self.input_size {
            return Err(Error::Shape {
                expected: self.input_size,
                got: x.len(),
            });
        }
        for v in [h, c] {
            if v.len() != self.hidden_size {
                return Err(Error::Shape {
                    expected: self.hidden_size,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }

    fn step_cached(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let (d, hs) = (self.input_size, self.hidden_size);
        let mut gates = self.b.clone();
        for (r, gate) in gates.iter_mut().enumerate() {
            let wr = &self.w[r * d..(r + 1) * d];
            let ur = &self.u[r * hs..(r + 1) * hs];
            *gate += wr.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                + ur.iter().zip(h_prev).map(|(a, b)| a * b).sum::<f64>();
        }
        for (r, gate) in gates.iter_mut().enumerate() {
            *gate = if r / hs == GATE_G { gate.tanh() } else { sigmoid(*gate) };
        }
        let mut c = Vec::with_capacity(hs);
        let mut tanh_c = Vec::with_capacity(hs);
        for k in 0..hs {
            let ck = gates[GATE_F * hs + k] * c_prev[k] + gates[GATE_I * hs + k] * gates[GATE_G * hs + k];
            c.push(ck);
            tanh_c.push(ck.tanh());
        }
        StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            c,
            tanh_c,
        }
    }

    fn hidden_of(&self, cache: &StepCache) -> Vec<f64> {
        let hs = self.hidden_size;
        (0..hs).map(|k| cache.gates[GATE_O * hs + k] * cache.tanh_c[k]).collect()
    }
}

/// One LSTM time step, returning `(h_t, c_t)`.
pub fn cell_step(
    weights: &LstmCellWeights,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    weights.check(x, h_prev, c_prev)?;
    let cache = weights.step_cached(x, h_prev, c_prev);
    let h = weights.hidden_of(&cache);
    Ok((h, cache.c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNetwork {
    pub spec: WindowSpec,
    pub cells: Vec<LstmCellWeights>,
    /// Readout, `lookforward x H_top`, row-major.
    #[serde(with = "crate::hexfloat::vec")]
    pub readout_w: Vec<f64>,
    #[serde(with = "crate::hexfloat::vec")]
    pub readout_b: Vec<f64>,
    pub normalizer: Normalizer,
    #[serde(with = "crate::hexfloat::vec")]
    pub loss_trace: Vec<f64>,
}

impl LstmNetwork {
    pub fn init(hidden_sizes: &[usize], spec: WindowSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(hidden_sizes, spec, |d, h| LstmCellWeights::init(d, h, &mut rng), true, seed)
    }

    /// Every weight and bias zero, including the forget bias.
    pub fn zeros(hidden_sizes: &[usize], spec: WindowSpec) -> Result<Self> {
        Self::build(hidden_sizes, spec, LstmCellWeights::zeros, false, 0)
    }

    fn build(
        hidden_sizes: &[usize],
        spec: WindowSpec,
        mut make: impl FnMut(usize, usize) -> LstmCellWeights,
        random_readout: bool,
        seed: u64,
    ) -> Result<Self> {
        if hidden_sizes.is_empty() || hidden_sizes.contains(&0) {
            return Err(Error::config("LSTM needs at least one layer of positive size"));
        }
        let mut cells = Vec::with_capacity(hidden_sizes.len());
        let mut input = 1;
        for &h in hidden_sizes {
            cells.push(make(input, h));
            input = h;
        }
        let top = input;
        let mut readout_w = vec![0.0; spec.lookforward * top];
        if random_readout {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            let limit = (6.0 / (top + spec.lookforward) as f64).sqrt();
            readout_w.iter_mut().for_each(|v| *v = rng.random_range(-limit..limit));
        }
        Ok(LstmNetwork {
            spec,
            cells,
            readout_w,
            readout_b: vec![0.0; spec.lookforward],
            normalizer: Normalizer { min: 0.0, max: 1.0 },
            loss_trace: Vec::new(),
        })
    }

    pub fn top_size(&self) -> usize {
        self.cells.last().map(|c| c.hidden_size).unwrap_or(0)
    }

    pub fn parameter_count(&self) -> usize {
        self.cells.iter().map(|c| c.parameter_count()).sum::<usize>() + self.readout_w.len() + self.readout_b.len()
    }

    fn run(&self, window: &[f64]) -> (Vec<Vec<StepCache>>, Vec<f64>) {
        let mut layer_input: Vec<Vec<f64>> = window.iter().map(|&v| vec![v]).collect();
        let mut caches = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            let mut h = vec![0.0; cell.hidden_size];
            let mut c = vec![0.0; cell.hidden_size];
            let mut steps = Vec::with_capacity(layer_input.len());
            let mut outputs = Vec::with_capacity(layer_input.len());
            for x in &layer_input {
                let cache = cell.step_cached(x, &h, &c);
                h = cell.hidden_of(&cache);
                c = cache.c.clone();
                outputs.push(h.clone());
                steps.push(cache);
            }
            caches.push(steps);
            layer_input = outputs;
        }
        let h_top = layer_input.pop().unwrap_or_default();
        let top = self.top_size();
        let y = (0..self.spec.lookforward)
            .map(|k| {
                let row = &self.readout_w[k * top..(k + 1) * top];
                self.readout_b[k] + row.iter().zip(&h_top).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        (caches, y)
    }

    /// Prediction for one normalised window, `lookforward` values wide.
    pub fn forward_sequence(&self, window: &[f64]) -> Result<Vec<f64>> {
        if window.is_empty() {
            return Err(Error::precondition("empty input window"));
        }
        Ok(self.run(window).1)
    }

    /// Mean over samples and outputs of the squared error.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
        check_samples(inputs, targets, self.spec)?;
        let mut total = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            let y = self.run(x).1;
            total += y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(total / (inputs.len() * self.spec.lookforward) as f64)
    }

    /// Loss and BPTT gradient, laid out like [`parameters`](Self::parameters).
    pub fn loss_and_gradient(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        check_samples(inputs, targets, self.spec)?;
        let scale = 1.0 / (inputs.len() * self.spec.lookforward) as f64;
        let mut grad_cells: Vec<LstmCellWeights> = self
            .cells
            .iter()
            .map(|c| LstmCellWeights::zeros(c.input_size, c.hidden_size))
            .collect();
        let mut grad_w = vec![0.0; self.readout_w.len()];
        let mut grad_b = vec![0.0; self.readout_b.len()];
        let top = self.top_size();
        let mut total = 0.0;

        for (x, t) in inputs.iter().zip(targets) {
            let (caches, y) = self.run(x);
            let steps = x.len();
            let last_top = caches.last().and_then(|s| s.last()).expect("non-empty window");
            let h_top = self.cells.last().unwrap().hidden_of(last_top);

            let mut dh_top = vec![0.0; top];
            for k in 0..self.spec.lookforward {
                let e = y[k] - t[k];
                total += e * e;
                let dy = 2.0 * e * scale;
                grad_b[k] += dy;
                for j in 0..top {
                    grad_w[k * top + j] += dy * h_top[j];
                    dh_top[j] += dy * self.readout_w[k * top + j];
                }
            }

            // external gradient on each layer's hidden outputs
            let mut dh_ext = vec![vec![0.0; top]; steps];
            dh_ext[steps - 1] = dh_top;
            for l in (0..self.cells.len()).rev() {
                let cell = &self.cells[l];
                let g = &mut grad_cells[l];
                let (d, hs) = (cell.input_size, cell.hidden_size);
                let mut dx_all = vec![vec![0.0; d]; steps];
                let mut dh_next = vec![0.0; hs];
                let mut dc_next = vec![0.0; hs];
                let mut da = vec![0.0; 4 * hs];
                for s in (0..steps).rev() {
                    let cache = &caches[l][s];
                    for k in 0..hs {
                        let gi = cache.gates[GATE_I * hs + k];
                        let gf = cache.gates[GATE_F * hs + k];
                        let go = cache.gates[GATE_O * hs + k];
                        let gg = cache.gates[GATE_G * hs + k];
                        let tc = cache.tanh_c[k];
                        let dh = dh_ext[s][k] + dh_next[k];
                        let dc = dh * go * (1.0 - tc * tc) + dc_next[k];
                        da[GATE_I * hs + k] = dc * gg * gi * (1.0 - gi);
                        da[GATE_F * hs + k] = dc * cache.c_prev[k] * gf * (1.0 - gf);
                        da[GATE_O * hs + k] = dh * tc * go * (1.0 - go);
                        da[GATE_G * hs + k] = dc * gi * (1.0 - gg * gg);
                        dc_next[k] = dc * gf;
                    }
                    dh_next.iter_mut().for_each(|v| *v = 0.0);
                    let dx = &mut dx_all[s];
                    for (r, &a) in da.iter().enumerate() {
                        if a == 0.0 {
                            continue;
                        }
                        g.b[r] += a;
                        let wr = &cell.w[r * d..(r + 1) * d];
                        for j in 0..d {
                            g.w[r * d + j] += a * cache.x[j];
                            dx[j] += a * wr[j];
                        }
                        let ur = &cell.u[r * hs..(r + 1) * hs];
                        for j in 0..hs {
                            g.u[r * hs + j] += a * cache.h_prev[j];
                            dh_next[j] += a * ur[j];
                        }
                    }
                }
                dh_ext = dx_all;
            }
        }

        let mut flat = Vec::with_capacity(self.parameter_count());
        for g in &grad_cells {
            flat.extend(&g.w);
            flat.extend(&g.u);
            flat.extend(&g.b);
        }
        flat.extend(&grad_w);
        flat.extend(&grad_b);
        Ok((total * scale, flat))
    }

    /// Cell weights (w, u, b per layer) followed by the readout.
    pub fn parameters(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.parameter_count());
        for c in &self.cells {
            flat.extend(&c.w);
            flat.extend(&c.u);
            flat.extend(&c.b);
        }
        flat.extend(&self.readout_w);
        flat.extend(&self.readout_b);
        flat
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.cells
            .iter_mut()
            .flat_map(|c| c.w.iter_mut().chain(c.u.iter_mut()).chain(c.b.iter_mut()))
            .chain(self.readout_w.iter_mut())
            .chain(self.readout_b.iter_mut())
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Shape {
                expected: self.parameter_count(),
                got: params.len(),
            });
        }
        self.params_mut().zip(params).for_each(|(p, v)| *p = *v);
        Ok(())
    }
}

fn check_samples(inputs: &[Vec<f64>], targets: &[Vec<f64>], spec: WindowSpec) -> Result<()> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::precondition(format!(
            "{} input windows and {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    if inputs.iter().any(|x| x.is_empty()) {
        return Err(Error::precondition("empty input window"));
    }
    if let Some(bad) = targets.iter().find(|t| t.len() != spec.lookforward) {
        return Err(Error::Shape {
            expected: spec.lookforward,
            got: bad.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LstmTrainParams {
    pub epochs: usize,
    #[serde(with = "crate::hexfloat")]
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(with = "crate::hexfloat")]
    pub tol: f64,
}

impl Default for LstmTrainParams {
    fn default() -> Self {
        LstmTrainParams {
            epochs: 1000,
            learning_rate: 0.1,
            batch_size: 16,
            seed: 0,
            tol: 1e-7,
        }
    }
}

/// Mini-batch SGD with full BPTT over each window and global-norm gradient
/// clipping. Returns the parameters with the lowest epoch loss.
pub fn train_lstm(windows: &Windows, network: LstmNetwork, params: &LstmTrainParams) -> Result<LstmNetwork> {
    if windows.spec != network.spec {
        return Err(Error::config(format!(
            "windows use {:?} but the network expects {:?}",
            windows.spec, network.spec
        )));
    }
    if params.batch_size == 0 || !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
        return Err(Error::config("batch_size and learning_rate must be positive"));
    }
    let mut network = network;
    network.normalizer = windows.normalizer;
    if params.epochs == 0 {
        return Ok(network);
    }
    check_samples(&windows.inputs, &windows.targets, windows.spec)?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = windows.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = (f64::INFINITY, network.clone());
    let mut trace = Vec::new();
    let mut stale = 0;

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(params.batch_size.min(n)) {
            let xs: Vec<Vec<f64>> = chunk.iter().map(|&i| windows.inputs[i].clone()).collect();
            let ts: Vec<Vec<f64>> = chunk.iter().map(|&i| windows.targets[i].clone()).collect();
            let (_, mut grad) = network.loss_and_gradient(&xs, &ts)?;
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > CLIP_NORM {
                let s = CLIP_NORM / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            network
                .params_mut()
                .zip(&grad)
                .for_each(|(p, g)| *p -= params.learning_rate * g);
        }
        let loss = network.loss(&windows.inputs, &windows.targets)?;
        if !loss.is_finite() {
            return Err(Error::Training(format!(
                "LSTM loss diverged to {loss} after {} epochs; lower the learning rate",
                trace.len() + 1
            )));
        }
        trace.push(loss);
        if loss < best.0 - params.tol {
            best = (loss, network.clone());
            stale = 0;
        } else {
            if loss < best.0 {
                best = (loss, network.clone());
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

/// Largest relative disagreement between BPTT and central-difference
/// gradients over the parameter indices in `indices`.
pub fn gradient_check(
    network: &LstmNetwork,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    indices: &[usize],
    epsilon: f64,
) -> Result<f64> {
    let (_, analytic) = network.loss_and_gradient(inputs, targets)?;
    let base = network.parameters();
    let mut probe = network.clone();
    let mut worst: f64 = 0.0;
    for &k in indices {
        if k >= base.len() {
            return Err(Error::Range(format!("parameter index {k} out of {}", base.len())));
        }
        let mut p = base.clone();
        p[k] = base[k] + epsilon;
        probe.set_parameters(&p)?;
        let up = probe.loss(inputs, targets)?;
        p[k] = base[k] - epsilon;
        probe.set_parameters(&p)?;
        let down = probe.loss(inputs, targets)?;
        let fd = (up - down) / (2.0 * epsilon);
        worst = worst.max(crate::mlp::relative_error(analytic[k], fd));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    OneStep,
    #[default]
    MultiStep,
}

impl FromStr for ForecastMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "one_step" => Ok(ForecastMode::OneStep),
            "multi_step" => Ok(ForecastMode::MultiStep),
            other => Err(Error::config(format!("unknown forecast mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    /// How many times the network was evaluated.
    pub network_calls: usize,
}

/// Forecasts from a complete `series`.
///
/// * `OneStep` predicts the last `steps` days of `series`, each from the
///   true lookback window preceding it (first output only).
/// * `MultiStep` predicts the `steps` days after `series` ends from its last
///   window, feeding each block of `lookforward` predictions back into the
///   window until enough values exist.
///
/// Outputs are denormalised with the network's stored min/max and floored
/// at zero.
pub fn forecast(network: &LstmNetwork, series: &DailySeries, steps: usize, mode: ForecastMode) -> Result<Forecast> {
    let values = series.dense()?;
    let spec = network.spec;
    if steps < 1 {
        return Err(Error::config("steps must be at least 1"));
    }
    if values.len() < spec.lookback {
        return Err(Error::precondition(format!(
            "forecasting needs at least lookback = {} days, got {}",
            spec.lookback,
            values.len()
        )));
    }
    let norm = &network.normalizer;
    match mode {
        ForecastMode::OneStep => {
            if values.len() < spec.lookback + steps {
                return Err(Error::precondition(format!(
                    "one-step forecasts of the last {steps} days need {} days of history, got {}",
                    spec.lookback + steps,
                    values.len()
                )));
            }
            let first = values.len() - steps;
            let mut out = Vec::with_capacity(steps);
            for t in first..values.len() {
                let window: Vec<f64> = values[t - spec.lookback..t].iter().map(|&v| norm.normalize(v)).collect();
                out.push(norm.denormalize(network.forward_sequence(&window)?[0]).max(0.0));
            }
            Ok(Forecast {
                dates: (first..values.len()).map(|t| series.date_at(t)).collect(),
                values: out,
                network_calls: steps,
            })
        }
        ForecastMode::MultiStep => {
            let history: Vec<f64> = values[values.len() - spec.lookback..]
                .iter()
                .map(|&v| norm.normalize(v))
                .collect();
            let (normalized, calls) = roll_forward(network, history, steps)?;
            let end = series.end_date();
            Ok(Forecast {
                dates: (1..=steps as i64).map(|k| end + Duration::days(k)).collect(),
                values: normalized.into_iter().map(|v| norm.denormalize(v).max(0.0)).collect(),
                network_calls: calls,
            })
        }
    }
}

/// Recursive block forecasting in normalised units from a window of
/// exactly `lookback` values.
pub(crate) fn roll_forward(network: &LstmNetwork, mut window: Vec<f64>, steps: usize) -> Result<(Vec<f64>, usize)> {
    let lookback = network.spec.lookback;
    let mut out = Vec::with_capacity(steps + network.spec.lookforward);
    let mut calls = 0;
    while out.len() < steps {
        let block = network.forward_sequence(&window[window.len() - lookback..])?;
        calls += 1;
        window.extend(&block);
        out.extend(block);
    }
    out.truncate(steps);
    Ok((out, calls))
}
