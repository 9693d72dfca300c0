//! Per-bin Gaussian likelihood baseline for cumulative histograms.
//!
//! The network has a linear head with `2N` outputs. The first `N` pass
//! through softmax and a running sum to give the means, so the means are
//! monotone and end at 1. The last `N` give standard deviations through a
//! softplus plus a small floor. Nothing ties the deviations of neighbouring
//! bins together, so `mu +- z * sigma` bands can cross and leave `[0, 1]`.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use super::{Architecture, ExperimentError};
use crate::histogram::{cumsum_into, reverse_cumsum_in_place};
use crate::math;
use crate::matrix::Matrix;
use crate::nn::{fit, softmax_backward, Batch, DataSource, ForwardTrace, Gradients, Head, LossCurve, Network, NetworkSpec, NnError, Schedule};
use crate::oracles::BandPredictor;

/// Lower bound added to every predicted standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-4;

pub fn gaussian_spec(architecture: &Architecture, features: usize, bins: usize) -> NetworkSpec {
    architecture.spec(features, 2 * bins, Head::Linear)
}

/// Means and standard deviations from one row of raw outputs.
pub fn gaussian_params(raw: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let bins = raw.len() / 2;
    let density = softmax(&raw[..bins]);
    let mut mean = vec![0.0; bins];
    cumsum_into(&density, &mut mean);
    let sigma = raw[bins..].iter().map(|&r| math::softplus(r) + SIGMA_FLOOR).collect();
    (mean, sigma)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&v| math::exp(v - max)).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|v| v / total).collect()
}

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Bin-averaged negative log-likelihood of a cumulative label.
pub fn gaussian_nll(cumulative: &[f64], mean: &[f64], sigma: &[f64]) -> f64 {
    let n = cumulative.len() as f64;
    cumulative
        .iter()
        .zip(mean)
        .zip(sigma)
        .map(|((m, mu), s)| {
            let z = (m - mu) / s;
            math::log(*s) + 0.5 * z * z + HALF_LN_TWO_PI
        })
        .sum::<f64>()
        / n
}

/// Batch-mean likelihood loss and gradients for a train-mode trace.
pub fn gaussian_objective(net: &Network, trace: &ForwardTrace, labels: &Matrix) -> Result<(f64, Gradients), NnError> {
    let raw = trace.logits();
    let rows = raw.rows();
    let bins = raw.cols() / 2;
    if labels.cols() != bins || labels.rows() != rows {
        return Err(NnError::DimensionMismatch {
            expected: bins,
            got: labels.cols(),
        });
    }
    let scale = 1.0 / (rows * bins) as f64;
    let mut grad = Matrix::zeros(rows, 2 * bins);
    let mut total = 0.0;
    let mut target = vec![0.0; bins];
    for r in 0..rows {
        let row = raw.row(r);
        cumsum_into(labels.row(r), &mut target);
        let density = softmax(&row[..bins]);
        let mut mean = vec![0.0; bins];
        cumsum_into(&density, &mut mean);
        let sigma: Vec<f64> = row[bins..].iter().map(|&v| math::softplus(v) + SIGMA_FLOOR).collect();
        total += gaussian_nll(&target, &mean, &sigma) / rows as f64;

        let mut d_mean: Vec<f64> = (0..bins)
            .map(|j| (mean[j] - target[j]) / (sigma[j] * sigma[j]) * scale)
            .collect();
        reverse_cumsum_in_place(&mut d_mean);
        let q = Matrix::from_vec(1, bins, density);
        let g = Matrix::from_vec(1, bins, d_mean);
        let d_logits = softmax_backward(&q, &g);
        let out = grad.row_mut(r);
        out[..bins].copy_from_slice(d_logits.row(0));
        for j in 0..bins {
            let s = sigma[j];
            let resid = target[j] - mean[j];
            let d_sigma = (1.0 / s - resid * resid / (s * s * s)) * scale;
            out[bins + j] = d_sigma * math::sigmoid(row[bins + j]);
        }
    }
    Ok((total, net.backward_from_logits(trace, &grad)?))
}

/// Trains a linear-head network on the Gaussian likelihood of the cumulative
/// labels supplied by `data`.
pub fn train_gaussian(
    net: &mut Network,
    data: &mut dyn DataSource,
    schedule: &Schedule,
    rng: &mut dyn RngCore,
) -> Result<LossCurve, NnError> {
    fit(net, data, schedule, None, rng, |net, trace, batch: &Batch, _| {
        gaussian_objective(net, trace, &batch.labels)
    })
}

/// Means and standard deviations for one input.
pub fn gaussian_predict(net: &Network, features: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NnError> {
    let m = Matrix::from_vec(1, features.len(), features.to_vec());
    let trace = net.forward(&m, None, crate::nn::Mode::Eval, None)?;
    Ok(gaussian_params(trace.logits().row(0)))
}

/// `mu_j + z_tau * sigma_j` per bin, unclipped.
pub fn gaussian_band(mean: &[f64], sigma: &[f64], tau: f64) -> Vec<f64> {
    let z = math::normal_quantile(tau);
    mean.iter().zip(sigma).map(|(m, s)| m + z * s).collect()
}

/// A Gaussian baseline network with a feature map, as a band predictor.
pub struct GaussianNet<'a, F: Fn(&[f64]) -> Vec<f64>> {
    pub net: &'a Network,
    pub featurize: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> BandPredictor for GaussianNet<'_, F> {
    fn predict_cumulative(&self, input: &[f64], tau: f64) -> Vec<f64> {
        let (mean, sigma) = gaussian_predict(self.net, &(self.featurize)(input)).expect("feature map matches the network");
        gaussian_band(&mean, &sigma, tau)
    }
}

/// Train-and-wrap helper used by the experiments.
pub fn fit_gaussian_baseline(
    architecture: &Architecture,
    features: usize,
    bins: usize,
    data: &mut dyn DataSource,
    schedule: &Schedule,
    rng: &mut dyn RngCore,
) -> Result<(Network, LossCurve), ExperimentError> {
    let mut net = Network::new(gaussian_spec(architecture, features, bins), rng)?;
    let curve = train_gaussian(&mut net, data, schedule, rng)?;
    Ok((net, curve))
}
