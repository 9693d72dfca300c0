//! A small dense network with a quantile head.
//!
//! Hidden layers are `dense -> [batch norm] -> ReLU -> [dropout]`. The output
//! layer emits one logit per bin. With [`Head::Quantile`] the quantile level
//! is appended to the input features as the last column, the logits pass
//! through a softmax to give a density histogram, and a running sum turns
//! that into the predicted cumulative histogram. Every prediction therefore
//! ends at exactly 1 and is monotone in the bin index, for every input and
//! every quantile level.
//!
//! [`Head::Linear`] leaves the raw outputs alone; it is used by baselines
//! that put their own transformation on top.

mod adam;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use train::{fit, quantile_objective, train, Batch, DataSource, LossCurve, Schedule, TauPolicy};

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::histogram::cumsum_into;
use crate::losses::LossError;
use crate::math;
use crate::matrix::{gemm, Matrix, View};

/// Momentum of the running batch-norm statistics.
pub const BN_MOMENTUM: f64 = 0.99;
/// Variance guard inside batch normalization.
pub const BN_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("expected {expected} input columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("quantile head needs one quantile level per input row")]
    MissingTau,
    #[error("dropout in train mode needs a random stream")]
    MissingRng,
    #[error("trace does not belong to this network")]
    StaleTrace,
    #[error("gradient shapes do not match the parameters")]
    ShapeMismatch,
    #[error("invalid architecture: {0}")]
    InvalidSpec(&'static str),
    #[error(transparent)]
    Loss(#[from] LossError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Head {
    Quantile,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkSpec {
    /// Input features, not counting the appended quantile level.
    pub features: usize,
    pub hidden: Vec<usize>,
    pub batch_norm: bool,
    pub dropout: f64,
    /// Bins for a quantile head, raw outputs for a linear head.
    pub outputs: usize,
    pub head: Head,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `inputs x outputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BatchNorm {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HiddenLayer {
    pub dense: Dense,
    pub batch_norm: Option<BatchNorm>,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Network {
    spec: NetworkSpec,
    hidden: Vec<HiddenLayer>,
    output: Dense,
}

/// Gradients in the order of [`Network::parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn tensors(&self) -> &[Vec<f64>] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
struct LayerTrace {
    normalized: Option<Matrix>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
    inv_std: Vec<f64>,
    activation: Matrix,
    mask: Option<Vec<f64>>,
    dropped: Option<Matrix>,
}

impl LayerTrace {
    fn output(&self) -> &Matrix {
        self.dropped.as_ref().unwrap_or(&self.activation)
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    mode: Mode,
    input: Matrix,
    layers: Vec<LayerTrace>,
    logits: Matrix,
    density: Option<Matrix>,
    cumulative: Option<Matrix>,
}

impl ForwardTrace {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch_size(&self) -> usize {
        self.logits.rows()
    }

    pub fn logits(&self) -> &Matrix {
        &self.logits
    }

    /// Softmax output, one density histogram per row (quantile head only).
    pub fn density(&self) -> Option<&Matrix> {
        self.density.as_ref()
    }

    /// Predicted cumulative histograms, one per row (quantile head only).
    pub fn cumulative(&self) -> Option<&Matrix> {
        self.cumulative.as_ref()
    }
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn he<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, math::sqrt(2.0 / inputs as f64)).expect("finite std");
        let mut layer = Self::zeros(inputs, outputs);
        layer.weights.iter_mut().for_each(|w| *w = normal.sample(rng));
        layer
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.outputs);
        for row in out.as_mut_slice().chunks_exact_mut(self.outputs) {
            row.copy_from_slice(&self.bias);
        }
        gemm(
            View::new(x.as_slice(), x.rows(), x.cols()),
            View::new(&self.weights, self.inputs, self.outputs),
            1.0,
            out.as_mut_slice(),
        );
        out
    }

    /// Returns `(dW, db, dX)`; `dX` is skipped when not needed.
    fn backward(&self, x: &Matrix, dy: &Matrix, need_input_grad: bool) -> (Vec<f64>, Vec<f64>, Option<Matrix>) {
        let mut dw = vec![0.0; self.inputs * self.outputs];
        gemm(
            View::new(x.as_slice(), x.rows(), x.cols()).t(),
            View::new(dy.as_slice(), dy.rows(), dy.cols()),
            0.0,
            &mut dw,
        );
        let mut db = vec![0.0; self.outputs];
        for row in dy.row_iter() {
            db.iter_mut().zip(row).for_each(|(d, g)| *d += g);
        }
        let dx = need_input_grad.then(|| {
            let mut dx = Matrix::zeros(dy.rows(), self.inputs);
            gemm(
                View::new(dy.as_slice(), dy.rows(), dy.cols()),
                View::new(&self.weights, self.inputs, self.outputs).t(),
                0.0,
                dx.as_mut_slice(),
            );
            dx
        });
        (dw, db, dx)
    }
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        Self {
            scale: vec![1.0; width],
            shift: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        }
    }
}

impl Network {
    /// He-initialized weights, zero biases, unit batch-norm scale.
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self, NnError> {
        Self::build(spec, |i, o| Dense::he(i, o, rng))
    }

    /// All weights and biases zero.
    pub fn zeroed(spec: NetworkSpec) -> Result<Self, NnError> {
        Self::build(spec, Dense::zeros)
    }

    fn build(spec: NetworkSpec, mut make: impl FnMut(usize, usize) -> Dense) -> Result<Self, NnError> {
        if spec.outputs == 0 {
            return Err(NnError::InvalidSpec("network needs at least one output"));
        }
        if spec.hidden.iter().any(|&w| w == 0) {
            return Err(NnError::InvalidSpec("hidden layers must be non-empty"));
        }
        if !(0.0..1.0).contains(&spec.dropout) {
            return Err(NnError::InvalidSpec("dropout rate must lie in [0, 1)"));
        }
        let mut width = spec.features + usize::from(spec.head == Head::Quantile);
        if width == 0 {
            return Err(NnError::InvalidSpec("network needs at least one input"));
        }
        let mut hidden = Vec::with_capacity(spec.hidden.len());
        for &w in &spec.hidden {
            hidden.push(HiddenLayer {
                dense: make(width, w),
                batch_norm: spec.batch_norm.then(|| BatchNorm::new(w)),
                dropout: spec.dropout,
            });
            width = w;
        }
        let output = make(width, spec.outputs);
        Ok(Self { spec, hidden, output })
    }

    /// Checks that every tensor matches the spec; used on deserialized
    /// networks.
    pub fn check_shapes(&self) -> Result<(), NnError> {
        let reference = Self::zeroed(self.spec.clone())?;
        if reference.hidden.len() != self.hidden.len() {
            return Err(NnError::ShapeMismatch);
        }
        let same_dense = |a: &Dense, b: &Dense| {
            a.inputs == b.inputs && a.outputs == b.outputs && a.weights.len() == b.weights.len() && a.bias.len() == b.bias.len()
        };
        for (mine, theirs) in self.hidden.iter().zip(&reference.hidden) {
            let bn_ok = match (&mine.batch_norm, &theirs.batch_norm) {
                (None, None) => true,
                (Some(a), Some(b)) => {
                    a.scale.len() == b.scale.len()
                        && a.shift.len() == b.shift.len()
                        && a.running_mean.len() == b.running_mean.len()
                        && a.running_var.len() == b.running_var.len()
                }
                _ => false,
            };
            if !bn_ok || !same_dense(&mine.dense, &theirs.dense) || mine.dropout != theirs.dropout {
                return Err(NnError::ShapeMismatch);
            }
        }
        if !same_dense(&self.output, &reference.output) {
            return Err(NnError::ShapeMismatch);
        }
        Ok(())
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn head(&self) -> Head {
        self.spec.head
    }

    /// Width of the first layer's input, including the quantile level.
    pub fn input_width(&self) -> usize {
        self.spec.features + usize::from(self.spec.head == Head::Quantile)
    }

    pub fn outputs(&self) -> usize {
        self.spec.outputs
    }

    pub fn hidden_layers(&self) -> &[HiddenLayer] {
        &self.hidden
    }

    pub fn output_layer(&self) -> &Dense {
        &self.output
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// Trainable tensors in a fixed order: per hidden layer weights, bias and
    /// (with batch norm) scale and shift; then the output weights and bias.
    pub fn parameters(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in &self.hidden {
            out.push(&layer.dense.weights);
            out.push(&layer.dense.bias);
            if let Some(bn) = &layer.batch_norm {
                out.push(&bn.scale);
                out.push(&bn.shift);
            }
        }
        out.push(&self.output.weights);
        out.push(&self.output.bias);
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in &mut self.hidden {
            out.push(&mut layer.dense.weights);
            out.push(&mut layer.dense.bias);
            if let Some(bn) = &mut layer.batch_norm {
                out.push(&mut bn.scale);
                out.push(&mut bn.shift);
            }
        }
        out.push(&mut self.output.weights);
        out.push(&mut self.output.bias);
        out
    }

    /// Runs the network on a batch. `features` has one row per sample; for a
    /// quantile head `taus` supplies the level of each row, which is appended
    /// as the last input column.
    pub fn forward(
        &self,
        features: &Matrix,
        taus: Option<&[f64]>,
        mode: Mode,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<ForwardTrace, NnError> {
        if features.cols() != self.spec.features {
            return Err(NnError::DimensionMismatch {
                expected: self.spec.features,
                got: features.cols(),
            });
        }
        let input = match self.spec.head {
            Head::Quantile => {
                let taus = taus.ok_or(NnError::MissingTau)?;
                if taus.len() != features.rows() {
                    return Err(NnError::MissingTau);
                }
                features.with_column(taus)
            }
            Head::Linear => features.clone(),
        };

        let mut layers = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let x = layers.last().map_or(&input, LayerTrace::output);
            let pre = layer.dense.apply(x);
            let width = pre.cols();
            let (normalized, batch_mean, batch_var, inv_std, mut activation) = match &layer.batch_norm {
                None => (None, Vec::new(), Vec::new(), Vec::new(), pre),
                Some(bn) => {
                    let (mean, var) = match mode {
                        Mode::Train => column_moments(&pre),
                        Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone()),
                    };
                    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / math::sqrt(v + BN_EPSILON)).collect();
                    let mut xhat = pre;
                    let mut y = Matrix::zeros(xhat.rows(), width);
                    for (xr, yr) in xhat
                        .as_mut_slice()
                        .chunks_exact_mut(width)
                        .zip(y.as_mut_slice().chunks_exact_mut(width))
                    {
                        for j in 0..width {
                            let v = (xr[j] - mean[j]) * inv_std[j];
                            xr[j] = v;
                            yr[j] = bn.scale[j] * v + bn.shift[j];
                        }
                    }
                    (Some(xhat), mean, var, inv_std, y)
                }
            };
            activation.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));

            let (mask, dropped) = if mode == Mode::Train && layer.dropout > 0.0 {
                let rng = rng.as_deref_mut().ok_or(NnError::MissingRng)?;
                let keep = 1.0 - layer.dropout;
                let mask: Vec<f64> = (0..activation.as_slice().len())
                    .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                let mut output = activation.clone();
                output.as_mut_slice().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                (Some(mask), Some(output))
            } else {
                (None, None)
            };

            layers.push(LayerTrace {
                normalized,
                batch_mean,
                batch_var,
                inv_std,
                activation,
                mask,
                dropped,
            });
        }

        let last = layers.last().map_or(&input, LayerTrace::output);
        let logits = self.output.apply(last);
        let (density, cumulative) = match self.spec.head {
            Head::Quantile => {
                let density = softmax_rows(&logits);
                let mut cumulative = Matrix::zeros(density.rows(), density.cols());
                for r in 0..density.rows() {
                    let row = cumulative.row_mut(r);
                    cumsum_into(density.row(r), row);
                    // Rounding can leave the running sum a hair off 1.
                    row.iter_mut().for_each(|v| *v = v.min(1.0));
                    if let Some(last) = row.last_mut() {
                        *last = 1.0;
                    }
                }
                (Some(density), Some(cumulative))
            }
            Head::Linear => (None, None),
        };

        Ok(ForwardTrace {
            mode,
            input,
            layers,
            logits,
            density,
            cumulative,
        })
    }

    /// Back-propagates a gradient with respect to the softmax output (one
    /// row per sample) of a quantile head.
    pub fn backward(&self, trace: &ForwardTrace, density_grad: &Matrix) -> Result<Gradients, NnError> {
        let density = trace.density.as_ref().ok_or(NnError::StaleTrace)?;
        if density_grad.rows() != density.rows() || density_grad.cols() != density.cols() {
            return Err(NnError::StaleTrace);
        }
        let logit_grad = softmax_backward(density, density_grad);
        self.backward_from_logits(trace, &logit_grad)
    }

    /// Back-propagates a gradient with respect to the raw outputs.
    pub fn backward_from_logits(&self, trace: &ForwardTrace, logit_grad: &Matrix) -> Result<Gradients, NnError> {
        self.check_trace(trace)?;
        if logit_grad.rows() != trace.logits.rows() || logit_grad.cols() != trace.logits.cols() {
            return Err(NnError::StaleTrace);
        }
        let batch = logit_grad.rows() as f64;

        let last = trace.layers.last().map_or(&trace.input, LayerTrace::output);
        let (dw, db, mut upstream) = self.output.backward(last, logit_grad, true);
        let mut reversed: Vec<Vec<f64>> = vec![db, dw];

        for (i, (layer, lt)) in self.hidden.iter().zip(&trace.layers).enumerate().rev() {
            let mut d = upstream.take().expect("upstream gradient");
            if let Some(mask) = &lt.mask {
                d.as_mut_slice().iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
            }
            d.as_mut_slice()
                .iter_mut()
                .zip(lt.activation.as_slice())
                .for_each(|(g, &a)| {
                    if a <= 0.0 {
                        *g = 0.0
                    }
                });

            let d_pre = match (&layer.batch_norm, &lt.normalized) {
                (Some(bn), Some(xhat)) => {
                    let width = d.cols();
                    let mut d_scale = vec![0.0; width];
                    let mut d_shift = vec![0.0; width];
                    for (dr, xr) in d.as_slice().chunks_exact(width).zip(xhat.as_slice().chunks_exact(width)) {
                        for j in 0..width {
                            d_scale[j] += dr[j] * xr[j];
                            d_shift[j] += dr[j];
                        }
                    }
                    match trace.mode {
                        Mode::Train => {
                            // d_xhat = d * scale; sum(d_xhat) = scale * d_shift, sum(d_xhat * xhat) = scale * d_scale
                            let a: Vec<f64> = (0..width).map(|j| lt.inv_std[j] * bn.scale[j]).collect();
                            let b: Vec<f64> = (0..width).map(|j| d_shift[j] / batch).collect();
                            let c: Vec<f64> = (0..width).map(|j| d_scale[j] / batch).collect();
                            for (dr, xr) in d.as_mut_slice().chunks_exact_mut(width).zip(xhat.as_slice().chunks_exact(width)) {
                                for j in 0..width {
                                    dr[j] = a[j] * (dr[j] - b[j] - xr[j] * c[j]);
                                }
                            }
                        }
                        Mode::Eval => {
                            for dr in d.as_mut_slice().chunks_exact_mut(width) {
                                for j in 0..width {
                                    dr[j] *= bn.scale[j] * lt.inv_std[j];
                                }
                            }
                        }
                    }
                    reversed.push(d_shift);
                    reversed.push(d_scale);
                    d
                }
                (None, None) => d,
                _ => return Err(NnError::StaleTrace),
            };

            let x = if i == 0 { &trace.input } else { trace.layers[i - 1].output() };
            let (dw, db, dx) = layer.dense.backward(x, &d_pre, i > 0);
            reversed.push(db);
            reversed.push(dw);
            upstream = dx;
        }

        reversed.reverse();
        Ok(Gradients(reversed))
    }

    fn check_trace(&self, trace: &ForwardTrace) -> Result<(), NnError> {
        if trace.input.cols() != self.input_width() || trace.layers.len() != self.hidden.len() {
            return Err(NnError::StaleTrace);
        }
        for (layer, lt) in self.hidden.iter().zip(&trace.layers) {
            if lt.activation.cols() != layer.dense.outputs || layer.batch_norm.is_some() != lt.normalized.is_some() {
                return Err(NnError::StaleTrace);
            }
        }
        if trace.logits.cols() != self.output.outputs {
            return Err(NnError::StaleTrace);
        }
        Ok(())
    }

    /// Folds the batch statistics of a train-mode trace into the running
    /// batch-norm statistics.
    pub fn update_running_stats(&mut self, trace: &ForwardTrace) -> Result<(), NnError> {
        if trace.mode != Mode::Train {
            return Ok(());
        }
        self.check_trace(trace)?;
        for (layer, lt) in self.hidden.iter_mut().zip(&trace.layers) {
            if let Some(bn) = &mut layer.batch_norm {
                for j in 0..bn.running_mean.len() {
                    bn.running_mean[j] = BN_MOMENTUM * bn.running_mean[j] + (1.0 - BN_MOMENTUM) * lt.batch_mean[j];
                    bn.running_var[j] = BN_MOMENTUM * bn.running_var[j] + (1.0 - BN_MOMENTUM) * lt.batch_var[j];
                }
            }
        }
        Ok(())
    }

    /// Eval-mode cumulative predictions for a batch of inputs.
    pub fn predict(&self, features: &Matrix, taus: &[f64]) -> Result<Matrix, NnError> {
        let trace = self.forward(features, Some(taus), Mode::Eval, None)?;
        trace.cumulative.ok_or(NnError::InvalidSpec("predict needs a quantile head"))
    }

    /// Eval-mode cumulative prediction for one input at one level.
    pub fn predict_one(&self, features: &[f64], tau: f64) -> Result<Vec<f64>, NnError> {
        let m = Matrix::from_vec(1, features.len(), features.to_vec());
        Ok(self.predict(&m, &[tau])?.row(0).to_vec())
    }
}

fn column_moments(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows() as f64;
    let mut mean = vec![0.0; x.cols()];
    for row in x.row_iter() {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; x.cols()];
    for row in x.row_iter() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = math::exp(*v - max);
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}

/// Row-wise `J^T g` with `J_jk = q_j (delta_jk - q_k)`.
pub fn softmax_backward(density: &Matrix, grad: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(density.rows(), density.cols());
    for r in 0..density.rows() {
        let q = density.row(r);
        let g = grad.row(r);
        let dot: f64 = q.iter().zip(g).map(|(a, b)| a * b).sum();
        for ((o, &qk), &gk) in out.row_mut(r).iter_mut().zip(q).zip(g) {
            *o = qk * (gk - dot);
        }
    }
    out
}

#[cfg(test)]
mod tests;
