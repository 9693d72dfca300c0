use alloc::vec::Vec;

use rand::distr::Open01;
use rand::{Rng, RngCore};

use super::adam::adam_step_with_rate;
use super::{AdamConfig, AdamState, ForwardTrace, Gradients, Mode, Network, NnError};
use crate::histogram::QuantileLevel;
use crate::losses::TrainingLoss;
use crate::math;
use crate::matrix::Matrix;

/// One mini-batch: input features (without the quantile level) and one label
/// row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub features: Matrix,
    pub labels: Matrix,
}

pub trait DataSource {
    fn next_batch(&mut self, size: usize, rng: &mut dyn RngCore) -> Batch;
}

/// How quantile levels are chosen for each training sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauPolicy {
    Fixed(QuantileLevel),
    /// A fresh level drawn from `U(0, 1)` for every sample of every batch.
    Uniform,
}

impl TauPolicy {
    fn draw(&self, n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
        match self {
            TauPolicy::Fixed(t) => alloc::vec![t.value(); n],
            TauPolicy::Uniform => (0..n).map(|_| rng.sample(Open01)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Schedule {
    pub iterations: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Mean batch loss is recorded every `log_interval` iterations.
    pub log_interval: usize,
    /// Learning rate at the last iteration relative to the initial one; the
    /// rate follows a cosine from 1 down to this fraction. 1 keeps it fixed.
    pub final_lr_fraction: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            batch_size: 2_048,
            adam: AdamConfig::default(),
            log_interval: 100,
            final_lr_fraction: 1.0,
        }
    }
}

impl Schedule {
    fn learning_rate(&self, iteration: usize) -> f64 {
        let base = self.adam.learning_rate;
        if self.final_lr_fraction == 1.0 || self.iterations <= 1 {
            return base;
        }
        let progress = iteration as f64 / (self.iterations - 1) as f64;
        let cosine = 0.5 * (1.0 + math::cos(core::f64::consts::PI * progress));
        base * (self.final_lr_fraction + (1.0 - self.final_lr_fraction) * cosine)
    }
}

/// `(iteration, mean batch loss over the preceding window)` pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossCurve {
    pub points: Vec<(usize, f64)>,
}

impl LossCurve {
    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|p| p.1)
    }
}

/// Generic mini-batch loop. `objective` receives the network, the train-mode
/// trace, the batch and the drawn quantile levels, and returns the mean batch
/// loss with its parameter gradients.
pub fn fit<F>(
    net: &mut Network,
    data: &mut dyn DataSource,
    schedule: &Schedule,
    tau_policy: Option<TauPolicy>,
    rng: &mut dyn RngCore,
    mut objective: F,
) -> Result<LossCurve, NnError>
where
    F: FnMut(&Network, &ForwardTrace, &Batch, &[f64]) -> Result<(f64, Gradients), NnError>,
{
    let mut state = AdamState::new(net, schedule.adam);
    let mut curve = LossCurve::default();
    let interval = schedule.log_interval.max(1);
    let (mut window_sum, mut window_len) = (0.0, 0usize);

    for iteration in 0..schedule.iterations {
        let batch = data.next_batch(schedule.batch_size, rng);
        let taus = tau_policy.map(|p| p.draw(batch.features.rows(), rng));
        let trace = net.forward(&batch.features, taus.as_deref(), Mode::Train, Some(&mut *rng))?;
        let (loss, grads) = objective(net, &trace, &batch, taus.as_deref().unwrap_or(&[]))?;
        net.update_running_stats(&trace)?;
        adam_step_with_rate(net, &grads, &mut state, schedule.learning_rate(iteration))?;

        window_sum += loss;
        window_len += 1;
        let done = iteration + 1;
        if done % interval == 0 || done == schedule.iterations {
            curve.points.push((done, window_sum / window_len as f64));
            window_sum = 0.0;
            window_len = 0;
        }
    }
    Ok(curve)
}

/// Trains a quantile-head network on `loss`, averaging over the batch.
pub fn train(
    net: &mut Network,
    data: &mut dyn DataSource,
    loss: TrainingLoss,
    tau_policy: TauPolicy,
    schedule: &Schedule,
    rng: &mut dyn RngCore,
) -> Result<LossCurve, NnError> {
    fit(net, data, schedule, Some(tau_policy), rng, |net, trace, batch, taus| {
        quantile_objective(net, trace, &batch.labels, taus, loss)
    })
}

/// Mean loss over the batch and its parameter gradients for a quantile head.
pub fn quantile_objective(
    net: &Network,
    trace: &ForwardTrace,
    labels: &Matrix,
    taus: &[f64],
    loss: TrainingLoss,
) -> Result<(f64, Gradients), NnError> {
    let density = trace.density().ok_or(NnError::StaleTrace)?;
    let rows = density.rows();
    let scale = 1.0 / rows as f64;
    let mut grad = Matrix::zeros(rows, density.cols());
    let mut total = 0.0;
    for r in 0..rows {
        let tau = taus.get(r).copied().unwrap_or(0.5);
        total += loss.value(labels.row(r), density.row(r), tau)?;
        let g = grad.row_mut(r);
        loss.gradient(labels.row(r), density.row(r), tau, g);
        g.iter_mut().for_each(|v| *v *= scale);
    }
    let grads = net.backward(trace, &grad)?;
    Ok((total * scale, grads))
}
