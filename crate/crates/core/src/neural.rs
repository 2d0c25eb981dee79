//! Small fully connected networks trained by mini-batch SGD with momentum:
//! the teacher autoencoder and the evaluation decoder.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::Matrix;
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Linear,
}

/// Dense layer `y = act(W x + b)` with `W` stored row-major as `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.random_range(-limit..=limit)).collect(),
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z = self.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            out.push(match self.activation {
                Activation::Tanh => z.tanh(),
                Activation::Linear => z,
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    /// Index of the layer whose output is the latent code.
    pub latent_layer: usize,
    /// Mean mini-batch loss of every training epoch.
    #[serde(default)]
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("invalid training configuration {self:?}")));
        }
        Ok(())
    }
}

/// Hidden width used by both network shapes.
pub fn hidden_width(k: usize, outputs: usize) -> usize {
    (2 * k).max(outputs.div_ceil(2))
}

impl Mlp {
    /// Layers of the given sizes; tanh on the layers listed in `tanh_layers`,
    /// linear elsewhere.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], tanh_layers: &[usize], latent_layer: usize, rng: &mut R) -> Self {
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let act = if tanh_layers.contains(&l) { Activation::Tanh } else { Activation::Linear };
                Layer::glorot(w[0], w[1], act, rng)
            })
            .collect();
        Self {
            layers,
            latent_layer,
            loss_history: Vec::new(),
        }
    }

    /// `inputs → h → k → h → inputs` with tanh hidden layers and linear
    /// bottleneck and output.
    pub fn autoencoder<R: Rng + ?Sized>(inputs: usize, k: usize, rng: &mut R) -> Self {
        let h = hidden_width(k, inputs);
        Self::new(&[inputs, h, k, h, inputs], &[0, 2], 1, rng)
    }

    /// `k → h → outputs` with a tanh hidden layer and linear output.
    pub fn decoder<R: Rng + ?Sized>(k: usize, outputs: usize, rng: &mut R) -> Self {
        let h = hidden_width(k, outputs);
        Self::new(&[k, h, outputs], &[0], 1, rng)
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    /// Outputs of every layer for one row; `acts[0]` is the input.
    fn trace(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.resize_with(self.layers.len() + 1, Vec::new);
        acts[0].clear();
        acts[0].extend_from_slice(x);
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = acts.split_at_mut(l + 1);
            layer.forward(&before[l], &mut after[0]);
        }
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_width() {
            return Err(invalid(format!(
                "network expects {} inputs, got {}",
                self.input_width(),
                x.cols()
            )));
        }
        Ok(())
    }

    fn output_of_layer(&self, x: &Matrix, layer: usize) -> Result<Matrix> {
        self.check_width(x)?;
        let width = self.layers[layer].outputs;
        let mut data = Vec::with_capacity(x.rows() * width);
        let mut acts = Vec::new();
        for row in x.row_iter() {
            self.trace(row, &mut acts);
            data.extend_from_slice(&acts[layer + 1]);
        }
        Matrix::from_vec(x.rows(), width, data).map_err(|_| Error::Numeric("network produced non-finite output".into()))
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.output_of_layer(x, self.layers.len() - 1)
    }

    /// Bottleneck activations.
    pub fn latent(&self, x: &Matrix) -> Result<Matrix> {
        self.output_of_layer(x, self.latent_layer)
    }

    /// Mean squared error of the network output against `y`.
    pub fn loss(&self, x: &Matrix, y: &Matrix) -> Result<f64> {
        let out = self.forward(x)?;
        if out.shape() != y.shape() {
            return Err(invalid(format!("targets have shape {:?}, outputs {:?}", y.shape(), out.shape())));
        }
        let s: f64 = out.as_slice().iter().zip(y.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(s / out.as_slice().len() as f64)
    }

    /// Loss on `rows` and its gradient, flattened in parameter order
    /// (each layer's weights then bias).
    fn gradient(&self, x: &Matrix, y: &Matrix, rows: &[usize], grad: &mut [f64], acts: &mut Vec<Vec<f64>>) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let outputs = self.output_width();
        let scale = 1.0 / (rows.len() * outputs) as f64;
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |o, l| {
                let start = *o;
                *o += l.weights.len() + l.bias.len();
                Some(start)
            })
            .collect();
        let mut loss = 0.0;
        let mut delta: Vec<f64> = Vec::new();
        let mut prev: Vec<f64> = Vec::new();
        for &r in rows {
            self.trace(x.row(r), acts);
            let out = &acts[self.layers.len()];
            delta.clear();
            for (o, t) in out.iter().zip(y.row(r)) {
                let e = o - t;
                loss += e * e;
                delta.push(2.0 * e * scale);
            }
            for (l, layer) in self.layers.iter().enumerate().rev() {
                if layer.activation == Activation::Tanh {
                    for (d, a) in delta.iter_mut().zip(&acts[l + 1]) {
                        *d *= 1.0 - a * a;
                    }
                }
                let input = &acts[l];
                let base = offsets[l];
                for (o, &d) in delta.iter().enumerate() {
                    let gw = &mut grad[base + o * layer.inputs..base + (o + 1) * layer.inputs];
                    for (g, &v) in gw.iter_mut().zip(input) {
                        *g += d * v;
                    }
                    grad[base + layer.weights.len() + o] += d;
                }
                if l > 0 {
                    prev.clear();
                    prev.resize(layer.inputs, 0.0);
                    for (o, &d) in delta.iter().enumerate() {
                        let w = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        for (p, &wv) in prev.iter_mut().zip(w) {
                            *p += wv * d;
                        }
                    }
                    std::mem::swap(&mut delta, &mut prev);
                }
            }
        }
        loss * scale
    }

    /// Analytic gradient of the mean squared error over all rows.
    pub fn loss_gradient(&self, x: &Matrix, y: &Matrix) -> Result<(f64, Vec<f64>)> {
        self.check_pair(x, y)?;
        let mut grad = vec![0.0; self.parameter_count()];
        let rows: Vec<usize> = (0..x.rows()).collect();
        let loss = self.gradient(x, y, &rows, &mut grad, &mut Vec::new());
        Ok((loss, grad))
    }

    fn check_pair(&self, x: &Matrix, y: &Matrix) -> Result<()> {
        self.check_width(x)?;
        if y.cols() != self.output_width() || y.rows() != x.rows() {
            return Err(invalid(format!(
                "targets of shape {:?} do not fit {} rows and {} outputs",
                y.shape(),
                x.rows(),
                self.output_width()
            )));
        }
        if x.rows() == 0 {
            return Err(invalid("no training rows"));
        }
        Ok(())
    }

    /// Mini-batch SGD with momentum on the mean squared error. A diverging
    /// run is restarted once from the same initial weights at half the
    /// learning rate.
    pub fn train(&self, x: &Matrix, y: &Matrix, cfg: &TrainConfig) -> Result<Mlp> {
        self.check_pair(x, y)?;
        cfg.validate()?;
        match self.train_once(x, y, cfg, cfg.learning_rate) {
            Some(m) => Ok(m),
            None => self.train_once(x, y, cfg, cfg.learning_rate / 2.0).ok_or_else(|| {
                Error::Training(format!("loss diverged at learning rates {} and {}", cfg.learning_rate, cfg.learning_rate / 2.0))
            }),
        }
    }

    fn train_once(&self, x: &Matrix, y: &Matrix, cfg: &TrainConfig, lr: f64) -> Option<Mlp> {
        let mut model = self.clone();
        model.loss_history.clear();
        let mut rng = seeded(cfg.seed);
        let mut order: Vec<usize> = (0..x.rows()).collect();
        let mut grad = vec![0.0; model.parameter_count()];
        let mut velocity = vec![0.0; model.parameter_count()];
        let mut acts = Vec::new();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut batches = 0;
            for batch in order.chunks(cfg.batch_size) {
                epoch_loss += model.gradient(x, y, batch, &mut grad, &mut acts);
                batches += 1;
                for ((p, v), g) in model.params_mut().zip(velocity.iter_mut()).zip(&grad) {
                    *v = cfg.momentum * *v - lr * g;
                    *p += *v;
                }
            }
            let epoch_loss = epoch_loss / batches as f64;
            if !epoch_loss.is_finite() || model.params().any(|p| !p.is_finite()) {
                return None;
            }
            model.loss_history.push(epoch_loss);
        }
        Some(model)
    }
}

/// Train an autoencoder `p′ → h → k → h → p′` on `x`.
pub fn train_autoencoder(x: &Matrix, k: usize, cfg: &TrainConfig) -> Result<Mlp> {
    if k == 0 || k >= x.cols() {
        return Err(invalid(format!("bottleneck {k} must lie in 1..{}", x.cols())));
    }
    if x.rows() < 2 {
        return Err(invalid("autoencoder training needs at least two rows"));
    }
    let init = Mlp::autoencoder(x.cols(), k, &mut seeded(crate::rng::derive(cfg.seed, "init")));
    init.train(x, x, cfg)
}

pub fn latent(m: &Mlp, x: &Matrix) -> Result<Matrix> {
    m.latent(x)
}

/// Train a decoder `k → h → p′` mapping `latent` rows to `target` rows.
pub fn train_decoder(latent: &Matrix, target: &Matrix, cfg: &TrainConfig) -> Result<Mlp> {
    if latent.rows() != target.rows() {
        return Err(invalid(format!("{} latent rows but {} target rows", latent.rows(), target.rows())));
    }
    let init = Mlp::decoder(latent.cols(), target.cols(), &mut seeded(crate::rng::derive(cfg.seed, "init")));
    init.train(latent, target, cfg)
}

/// Largest relative difference between the backpropagated gradient and
/// central finite differences (step `1e-5`).
pub fn grad_check(m: &Mlp, x: &Matrix, y: &Matrix) -> Result<f64> {
    let (_, analytic) = m.loss_gradient(x, y)?;
    let h = 1e-5;
    let mut probe = m.clone();
    let mut worst: f64 = 0.0;
    for i in 0..analytic.len() {
        let original = *probe.params_mut().nth(i).expect("index within parameter count");
        *probe.params_mut().nth(i).expect("index within parameter count") = original + h;
        let plus = probe.loss(x, y)?;
        *probe.params_mut().nth(i).expect("index within parameter count") = original - h;
        let minus = probe.loss(x, y)?;
        *probe.params_mut().nth(i).expect("index within parameter count") = original;
        let numeric = (plus - minus) / (2.0 * h);
        let denom = (analytic[i].abs() + numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}
