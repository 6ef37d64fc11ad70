//! Gradient-trained regressors: a single affine layer on vectorized landmarks
//! and a convolution over the landmark axis followed by an affine head.
//! Both are trained with mini-batch Adam on mean squared error.
//!
//! Inputs are laid out landmark-major, `x[j * k + d]` being coordinate `d` of
//! landmark `j`; the convolutional model reads the same row as a `p x k` signal
//! with landmarks on the spatial axis and coordinates as channels.

use std::io::Write;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeds::{derive_seed, rng};
use crate::stats::{rmse, FitResult};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 63,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidSpec("epochs and batch size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidSpec("learning rate must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvSpec {
    pub channels: usize,
    /// Landmarks covered by the kernel; `None` spans the whole configuration.
    pub kernel_span: Option<usize>,
}

impl Default for ConvSpec {
    fn default() -> Self {
        Self { channels: 4, kernel_span: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

/// One bias-corrected Adam update, elementwise.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, spec: &TrainSpec) {
    debug_assert_eq!(params.len(), grads.len());
    if state.m.len() != params.len() {
        *state = AdamState::new(params.len());
    }
    state.t += 1;
    let t = state.t as i32;
    let correct1 = 1.0 - spec.adam_beta1.powi(t);
    let correct2 = 1.0 - spec.adam_beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = spec.adam_beta1 * state.m[i] + (1.0 - spec.adam_beta1) * g;
        state.v[i] = spec.adam_beta2 * state.v[i] + (1.0 - spec.adam_beta2) * g * g;
        let m_hat = state.m[i] / correct1;
        let v_hat = state.v[i] / correct2;
        params[i] -= spec.learning_rate * m_hat / (v_hat.sqrt() + spec.adam_eps);
    }
}

/// Per-feature z-scoring with statistics frozen from the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Self { mean, scale }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.mean[j]) / self.scale[j])
    }
}

/// A model whose parameters live in one flat vector.
pub trait Regressor: Clone {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn input_len(&self) -> usize;
    fn forward(&self, x: &[f64]) -> f64;
    /// Adds `d_out * d(forward)/d(params)` into `grad`.
    fn accumulate_grad(&self, x: &[f64], d_out: f64, grad: &mut [f64]);
    /// The model as one affine map `w . x + b` on its (standardized) inputs.
    fn effective_linear(&self) -> (Vec<f64>, f64);
    /// Named parameter blocks, for export.
    fn layers(&self) -> Vec<(&'static str, Range<usize>)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearNet {
    d: usize,
    /// `[w_0 .. w_{d-1}, b]`
    params: Vec<f64>,
}

impl LinearNet {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        let d = weights.len();
        let mut params = weights;
        params.push(bias);
        Self { d, params }
    }

    /// Uniform `+-1/sqrt(d)` initialisation.
    pub fn init<R: Rng>(d: usize, r: &mut R) -> Self {
        let bound = 1.0 / (d.max(1) as f64).sqrt();
        Self { d, params: (0..=d).map(|_| r.gen_range(-bound..=bound)).collect() }
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.d]
    }

    pub fn bias(&self) -> f64 {
        self.params[self.d]
    }
}

impl Regressor for LinearNet {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn input_len(&self) -> usize {
        self.d
    }

    fn forward(&self, x: &[f64]) -> f64 {
        self.weights().iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias()
    }

    fn accumulate_grad(&self, x: &[f64], d_out: f64, grad: &mut [f64]) {
        for (g, v) in grad[..self.d].iter_mut().zip(x) {
            *g += d_out * v;
        }
        grad[self.d] += d_out;
    }

    fn effective_linear(&self) -> (Vec<f64>, f64) {
        (self.weights().to_vec(), self.bias())
    }

    fn layers(&self) -> Vec<(&'static str, Range<usize>)> {
        vec![("dense.weight", 0..self.d), ("dense.bias", self.d..self.d + 1)]
    }
}

/// `y = sum_{c,l} head[c,l] * (conv_bias[c] + sum_{t,d} kernel[c,t,d] x[l+t, d]) + head_bias`
///
/// A valid (unpadded) convolution along the landmark axis; with a full-span
/// kernel each channel produces a single output. No activation is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvNet {
    p: usize,
    k: usize,
    channels: usize,
    span: usize,
    params: Vec<f64>,
}

impl ConvNet {
    fn outputs(&self) -> usize {
        self.p - self.span + 1
    }

    fn kernel_range(&self) -> Range<usize> {
        0..self.channels * self.span * self.k
    }

    fn conv_bias_range(&self) -> Range<usize> {
        let start = self.kernel_range().end;
        start..start + self.channels
    }

    fn head_range(&self) -> Range<usize> {
        let start = self.conv_bias_range().end;
        start..start + self.channels * self.outputs()
    }

    fn head_bias_index(&self) -> usize {
        self.head_range().end
    }

    fn kernel_index(&self, c: usize, t: usize, d: usize) -> usize {
        (c * self.span + t) * self.k + d
    }

    fn check(p: usize, k: usize, conv: &ConvSpec) -> Result<usize> {
        let span = conv.kernel_span.unwrap_or(p);
        if conv.channels == 0 {
            return Err(Error::InvalidSpec("at least one output channel is required".into()));
        }
        if span == 0 || span > p {
            return Err(Error::InvalidSpec(format!("kernel span {span} must be in 1..={p}")));
        }
        if k == 0 {
            return Err(Error::InvalidSpec("input needs at least one coordinate channel".into()));
        }
        Ok(span)
    }

    fn zeros(p: usize, k: usize, channels: usize, span: usize) -> Self {
        let mut net = Self { p, k, channels, span, params: Vec::new() };
        net.params = vec![0.0; net.head_bias_index() + 1];
        net
    }

    /// Uniform `+-1/sqrt(fan_in)` initialisation per layer.
    pub fn init<R: Rng>(p: usize, k: usize, conv: &ConvSpec, r: &mut R) -> Result<Self> {
        let span = Self::check(p, k, conv)?;
        let mut net = Self::zeros(p, k, conv.channels, span);
        let conv_bound = 1.0 / ((span * k) as f64).sqrt();
        let head_bound = 1.0 / ((conv.channels * net.outputs()) as f64).sqrt();
        let conv_end = net.conv_bias_range().end;
        for (i, v) in net.params.iter_mut().enumerate() {
            let bound = if i < conv_end { conv_bound } else { head_bound };
            *v = r.gen_range(-bound..=bound);
        }
        Ok(net)
    }

    /// Embeds a linear model: channel 0 carries its weights, the head passes it
    /// through unchanged, every other channel is silenced.
    pub fn from_linear(linear: &LinearNet, p: usize, k: usize, channels: usize) -> Result<Self> {
        if linear.input_len() != p * k {
            return Err(Error::LengthMismatch(linear.input_len(), p * k));
        }
        Self::check(p, k, &ConvSpec { channels, kernel_span: None })?;
        let mut net = Self::zeros(p, k, channels, p);
        net.params[..p * k].copy_from_slice(linear.weights());
        let head0 = net.head_range().start;
        net.params[head0] = 1.0;
        let hb = net.head_bias_index();
        net.params[hb] = linear.bias();
        Ok(net)
    }

    fn channel_outputs(&self, x: &[f64]) -> Vec<f64> {
        let l_out = self.outputs();
        let bias0 = self.conv_bias_range().start;
        let mut h = vec![0.0; self.channels * l_out];
        for c in 0..self.channels {
            for l in 0..l_out {
                let mut acc = self.params[bias0 + c];
                for t in 0..self.span {
                    let row = (l + t) * self.k;
                    let kern = self.kernel_index(c, t, 0);
                    for d in 0..self.k {
                        acc += self.params[kern + d] * x[row + d];
                    }
                }
                h[c * l_out + l] = acc;
            }
        }
        h
    }
}

impl Regressor for ConvNet {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn input_len(&self) -> usize {
        self.p * self.k
    }

    fn forward(&self, x: &[f64]) -> f64 {
        let head = &self.params[self.head_range()];
        let h = self.channel_outputs(x);
        h.iter().zip(head).map(|(a, b)| a * b).sum::<f64>() + self.params[self.head_bias_index()]
    }

    fn accumulate_grad(&self, x: &[f64], d_out: f64, grad: &mut [f64]) {
        let l_out = self.outputs();
        let h = self.channel_outputs(x);
        let head0 = self.head_range().start;
        let bias0 = self.conv_bias_range().start;
        for c in 0..self.channels {
            for l in 0..l_out {
                let idx = c * l_out + l;
                grad[head0 + idx] += d_out * h[idx];
                let dh = d_out * self.params[head0 + idx];
                grad[bias0 + c] += dh;
                for t in 0..self.span {
                    let row = (l + t) * self.k;
                    let kern = self.kernel_index(c, t, 0);
                    for d in 0..self.k {
                        grad[kern + d] += dh * x[row + d];
                    }
                }
            }
        }
        grad[self.head_bias_index()] += d_out;
    }

    fn effective_linear(&self) -> (Vec<f64>, f64) {
        let l_out = self.outputs();
        let head0 = self.head_range().start;
        let bias0 = self.conv_bias_range().start;
        let mut w = vec![0.0; self.p * self.k];
        let mut b = self.params[self.head_bias_index()];
        for c in 0..self.channels {
            for l in 0..l_out {
                let hw = self.params[head0 + c * l_out + l];
                b += hw * self.params[bias0 + c];
                for t in 0..self.span {
                    for d in 0..self.k {
                        w[(l + t) * self.k + d] += hw * self.params[self.kernel_index(c, t, d)];
                    }
                }
            }
        }
        (w, b)
    }

    fn layers(&self) -> Vec<(&'static str, Range<usize>)> {
        vec![
            ("conv.weight", self.kernel_range()),
            ("conv.bias", self.conv_bias_range()),
            ("head.weight", self.head_range()),
            ("head.bias", self.head_bias_index()..self.head_bias_index() + 1),
        ]
    }
}

/// Mean squared error over `rows` and its gradient with respect to the parameters.
pub fn batch_loss_and_grad<M: Regressor>(model: &M, x: &DMatrix<f64>, y: &DVector<f64>, rows: &[usize]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; model.params().len()];
    let mut loss = 0.0;
    let b = rows.len() as f64;
    let mut buf = vec![0.0; x.ncols()];
    for &i in rows {
        for (j, v) in buf.iter_mut().enumerate() {
            *v = x[(i, j)];
        }
        let err = model.forward(&buf) - y[i];
        loss += err * err / b;
        model.accumulate_grad(&buf, 2.0 * err / b, &mut grad);
    }
    (loss, grad)
}

#[derive(Debug, Clone)]
pub struct Trained<M> {
    pub model: M,
    pub standardizer: Standardizer,
    /// Full training-set MSE after each epoch.
    pub loss_history: Vec<f64>,
    /// Loss on the first mini-batch before any update.
    pub initial_batch_loss: f64,
    /// The trained model folded into one affine map on raw coordinates.
    pub fit: FitResult,
}

impl<M: Regressor> Trained<M> {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        self.fit.predict(x)
    }

    /// Prediction through the network itself rather than the folded map.
    pub fn predict_network(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let z = self.standardizer.apply(x);
        DVector::from_fn(z.nrows(), |i, _| {
            let row: Vec<f64> = z.row(i).iter().copied().collect();
            self.model.forward(&row)
        })
    }

    /// `layer,index,value` rows for every parameter.
    pub fn write_weights<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "layer,index,value")?;
        for (name, range) in self.model.layers() {
            for (i, v) in self.model.params()[range].iter().enumerate() {
                writeln!(out, "{name},{i},{v:.16e}")?;
            }
        }
        Ok(())
    }
}

fn fold_standardizer(model: &impl Regressor, st: &Standardizer) -> (DVector<f64>, f64) {
    let (w, b) = model.effective_linear();
    let raw = DVector::from_fn(w.len(), |j, _| w[j] / st.scale[j]);
    let shift: f64 = (0..w.len()).map(|j| raw[j] * st.mean[j]).sum();
    (raw, b - shift)
}

/// Trains `model` in place from its current parameters.
pub fn train_model<M: Regressor>(mut model: M, x: &DMatrix<f64>, y: &DVector<f64>, spec: &TrainSpec) -> Result<Trained<M>> {
    spec.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if y.len() != n {
        return Err(Error::LengthMismatch(y.len(), n));
    }
    if x.ncols() != model.input_len() {
        return Err(Error::LengthMismatch(x.ncols(), model.input_len()));
    }
    let standardizer = Standardizer::fit(x);
    let z = standardizer.apply(x);
    let mut shuffle_rng = rng(derive_seed(spec.seed, &[1]));
    let mut state = AdamState::new(model.params().len());
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_history = Vec::with_capacity(spec.epochs);
    let all: Vec<usize> = (0..n).collect();
    let mut initial_batch_loss = f64::NAN;

    for epoch in 0..spec.epochs {
        order.shuffle(&mut shuffle_rng);
        for (b, batch) in order.chunks(spec.batch_size).enumerate() {
            let (loss, grad) = batch_loss_and_grad(&model, &z, y, batch);
            if epoch == 0 && b == 0 {
                initial_batch_loss = loss;
            }
            adam_step(model.params_mut(), &grad, &mut state, spec);
        }
        let (loss, _) = batch_loss_and_grad(&model, &z, y, &all);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("training diverged at epoch {epoch}")));
        }
        loss_history.push(loss);
    }

    let (coefficients, intercept) = fold_standardizer(&model, &standardizer);
    let mut fit = FitResult { coefficients, intercept, train_rmse: 0.0 };
    fit.train_rmse = rmse(y.as_slice(), fit.predict(x).as_slice())?;
    Ok(Trained { model, standardizer, loss_history, initial_batch_loss, fit })
}

/// Single fully connected layer on the vectorized coordinates.
pub fn train_linear(x: &DMatrix<f64>, y: &DVector<f64>, spec: &TrainSpec) -> Result<Trained<LinearNet>> {
    let model = LinearNet::init(x.ncols(), &mut rng(derive_seed(spec.seed, &[0])));
    train_model(model, x, y, spec)
}

/// Convolution across the `p` landmarks of each `p x k` row, then an affine head.
pub fn train_conv(
    x: &DMatrix<f64>,
    p: usize,
    k: usize,
    y: &DVector<f64>,
    spec: &TrainSpec,
    conv: &ConvSpec,
) -> Result<Trained<ConvNet>> {
    if x.ncols() != p * k {
        return Err(Error::LengthMismatch(x.ncols(), p * k));
    }
    let model = ConvNet::init(p, k, conv, &mut rng(derive_seed(spec.seed, &[0])))?;
    train_model(model, x, y, spec)
}
