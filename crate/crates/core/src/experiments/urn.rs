//! Drawing balls from an urn: `x` draws with replacement from `N` balls,
//! where `x` itself is log-uniform on `[1, 10^max_log10_draws]`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use super::metrics::{evaluate_metrics, predict_densities, MetricTable};
use super::{Architecture, ExperimentError, Objective, TrainSetup};
use crate::histogram::{cumsum, CumulativeHistogram, DensityHistogram, QuantileLevel};
use crate::losses::TrainingLoss;
use crate::math;
use crate::matrix::Matrix;
use crate::nn::{train, Batch, DataSource, Head, LossCurve, Network, Schedule, TauPolicy};
use crate::oracles::{urn_quantiles, urn_sample, UrnSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct UrnConfig {
    pub n_balls: u32,
    /// `log10` of the draw count is uniform on `[0, max_log10_draws]`.
    pub max_log10_draws: f64,
    pub setup: TrainSetup,
}

impl Default for UrnConfig {
    fn default() -> Self {
        Self {
            n_balls: 5,
            max_log10_draws: 3.0,
            setup: TrainSetup {
                architecture: Architecture {
                    hidden: vec![128, 128],
                    batch_norm: true,
                    dropout: 0.0,
                },
                objective: Objective {
                    loss: TrainingLoss::Empl,
                    tau: TauPolicy::Uniform,
                },
                schedule: Schedule::default(),
            },
        }
    }
}

impl UrnConfig {
    /// Network input for `draws`: `log10(draws)` scaled to `[0, 1]`.
    pub fn features(&self, draws: f64) -> Vec<f64> {
        vec![math::log10(draws) / self.max_log10_draws]
    }

    /// One draw count from the training law.
    pub fn sample_draws(&self, rng: &mut dyn RngCore) -> u64 {
        let exponent = rng.random::<f64>() * self.max_log10_draws;
        (math::round(math::pow(10.0, exponent)) as u64).max(1)
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.n_balls == 0 {
            return Err(ExperimentError::InvalidConfig("n_balls must be at least 1"));
        }
        if !(self.max_log10_draws > 0.0) || !self.max_log10_draws.is_finite() {
            return Err(ExperimentError::InvalidConfig("max_log10_draws must be positive"));
        }
        Ok(())
    }
}

/// Training batches: draw counts from the configured law, multinomial labels.
pub struct UrnData<'a> {
    pub config: &'a UrnConfig,
}

impl DataSource for UrnData<'_> {
    fn next_batch(&mut self, size: usize, rng: &mut dyn RngCore) -> Batch {
        let n = self.config.n_balls as usize;
        let mut features = Matrix::zeros(size, 1);
        let mut labels = Matrix::zeros(size, n);
        for r in 0..size {
            let draws = self.config.sample_draws(rng);
            features.row_mut(r).copy_from_slice(&self.config.features(draws as f64));
            let spec = UrnSpec::new(self.config.n_balls, draws).expect("validated config");
            labels.row_mut(r).copy_from_slice(&urn_sample(spec, rng));
        }
        Batch { features, labels }
    }
}

pub fn train_urn(config: &UrnConfig, rng: &mut dyn RngCore) -> Result<(Network, LossCurve), ExperimentError> {
    config.validate()?;
    let setup = &config.setup;
    let spec = setup.architecture.spec(1, config.n_balls as usize, Head::Quantile);
    let mut net = Network::new(spec, rng)?;
    let curve = train(
        &mut net,
        &mut UrnData { config },
        setup.objective.loss,
        setup.objective.tau,
        &setup.schedule,
        rng,
    )?;
    Ok((net, curve))
}

/// What to compare after training.
#[derive(Debug, Clone, PartialEq)]
pub struct UrnEval {
    pub draws: Vec<u64>,
    pub levels: Vec<f64>,
    /// Held-out samples for the metric tables and the perturbation check.
    pub test_samples: usize,
    pub perturbations: usize,
    pub perturbation_size: f64,
    /// Draw counts of the large-x test set used against the uniform baseline.
    pub large_draws: (u64, u64),
}

impl Default for UrnEval {
    fn default() -> Self {
        Self {
            draws: vec![1, 10, 100, 1000],
            levels: super::decile_levels(),
            test_samples: 4096,
            perturbations: 100,
            perturbation_size: 0.05,
            large_draws: (900, 1000),
        }
    }
}

/// Predicted and analytic cumulative quantiles for one `(x, tau)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct UrnBandRow {
    pub draws: u64,
    pub tau: f64,
    pub predicted: Vec<f64>,
    pub analytic: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremCheck {
    pub trials: usize,
    /// Trials in which the unperturbed prediction had the lower loss.
    pub unperturbed_best: usize,
    pub unperturbed_loss: f64,
    pub mean_perturbed_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrnReport {
    pub bands: Vec<UrnBandRow>,
    pub max_deviation: f64,
    pub mean_deviation: f64,
    /// Median metrics on held-out samples from the training law.
    pub metrics: MetricTable,
    /// Median metrics and the uniform predictor on held-out large-x samples.
    pub large_x_metrics: MetricTable,
    pub large_x_uniform: MetricTable,
    pub theorem: TheoremCheck,
}

/// Predicted against analytic cumulative quantiles on a grid.
pub fn urn_bands(net: &Network, config: &UrnConfig, draws: &[u64], levels: &[f64]) -> Result<Vec<UrnBandRow>, ExperimentError> {
    let n = config.n_balls;
    let mut rows = Vec::with_capacity(draws.len() * levels.len());
    for &x in draws {
        let spec = UrnSpec::new(n, x)?;
        let per_bin: Vec<Vec<f64>> = (1..=n)
            .map(|j| urn_quantiles(spec, j, levels))
            .collect::<Result<_, _>>()?;
        let features = Matrix::from_vec(levels.len(), 1, vec![config.features(x as f64)[0]; levels.len()]);
        let predicted = net.predict(&features, levels)?;
        for (i, &tau) in levels.iter().enumerate() {
            rows.push(UrnBandRow {
                draws: x,
                tau,
                predicted: predicted.row(i).to_vec(),
                analytic: per_bin.iter().map(|b| b[i]).collect(),
            });
        }
    }
    Ok(rows)
}

fn test_set(config: &UrnConfig, samples: usize, draws: impl Fn(&mut dyn RngCore) -> u64, rng: &mut dyn RngCore) -> (Matrix, Vec<u64>, Vec<DensityHistogram>) {
    let mut features = Matrix::zeros(samples, 1);
    let mut xs = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for r in 0..samples {
        let x = draws(rng);
        features.row_mut(r)[0] = config.features(x as f64)[0];
        xs.push(x);
        labels.push(urn_sample(UrnSpec::new(config.n_balls, x).expect("validated"), rng));
    }
    (features, xs, labels)
}

/// Held-out check that the predicted quantiles beat randomly perturbed
/// versions of themselves: each trial shifts every bin of every prediction
/// by one shared uniform offset in `[-size, size]`, re-monotonizes, and
/// compares the mean held-out quantile loss.
pub fn theorem_check(
    net: &Network,
    config: &UrnConfig,
    samples: usize,
    trials: usize,
    size: f64,
    rng: &mut dyn RngCore,
) -> Result<TheoremCheck, ExperimentError> {
    if samples == 0 {
        return Err(ExperimentError::EmptyTestSet);
    }
    let (features, _, labels) = test_set(config, samples, |r| config.sample_draws(r), rng);
    let taus: Vec<f64> = (0..samples).map(|_| rng.random_range(0.01..0.99)).collect();
    let predicted = net.predict(&features, &taus)?;

    let mean_loss = |cumulative: &dyn Fn(usize) -> Vec<f64>| -> Result<f64, ExperimentError> {
        let mut total = 0.0;
        for (i, label) in labels.iter().enumerate() {
            let density = CumulativeHistogram::monotonize(&cumulative(i))?.diff();
            total += TrainingLoss::Empl.value(label, &density, taus[i])?;
        }
        Ok(total / samples as f64)
    };

    let base = mean_loss(&|i| predicted.row(i).to_vec())?;
    let bins = config.n_balls as usize;
    let (mut wins, mut perturbed_total) = (0, 0.0);
    for _ in 0..trials {
        let offset: Vec<f64> = (0..bins).map(|_| rng.random_range(-size..=size)).collect();
        let loss = mean_loss(&|i| predicted.row(i).iter().zip(&offset).map(|(p, d)| p + d).collect())?;
        perturbed_total += loss;
        if base < loss {
            wins += 1;
        }
    }
    Ok(TheoremCheck {
        trials,
        unperturbed_best: wins,
        unperturbed_loss: base,
        mean_perturbed_loss: if trials == 0 { 0.0 } else { perturbed_total / trials as f64 },
    })
}

pub fn evaluate_urn(net: &Network, config: &UrnConfig, eval: &UrnEval, rng: &mut dyn RngCore) -> Result<UrnReport, ExperimentError> {
    config.validate()?;
    let bands = urn_bands(net, config, &eval.draws, &eval.levels)?;
    let deviations: Vec<f64> = bands
        .iter()
        .flat_map(|row| row.predicted.iter().zip(&row.analytic).map(|(p, a)| (p - a).abs()))
        .collect();
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    let mean_deviation = if deviations.is_empty() {
        0.0
    } else {
        deviations.iter().sum::<f64>() / deviations.len() as f64
    };

    let median = QuantileLevel::MEDIAN.value();
    let (features, _, labels) = test_set(config, eval.test_samples, |r| config.sample_draws(r), rng);
    let metrics = evaluate_metrics(net, &features, &labels, median)?;

    let (lo, hi) = eval.large_draws;
    let (features, _, labels) = test_set(config, eval.test_samples, |r| r.random_range(lo..=hi), rng);
    let large_x_metrics = evaluate_metrics(net, &features, &labels, median)?;
    let uniform = vec![DensityHistogram::uniform(config.n_balls as usize); labels.len()];
    let large_x_uniform = MetricTable::from_predictions(&labels, &uniform)?;

    let theorem = theorem_check(net, config, eval.test_samples, eval.perturbations, eval.perturbation_size, rng)?;

    Ok(UrnReport {
        bands,
        max_deviation,
        mean_deviation,
        metrics,
        large_x_metrics,
        large_x_uniform,
        theorem,
    })
}

/// Mean held-out W1 of the network's median predictions on `samples` draws
/// from the training law.
pub fn median_w1(net: &Network, config: &UrnConfig, samples: usize, rng: &mut dyn RngCore) -> Result<f64, ExperimentError> {
    let (features, _, labels) = test_set(config, samples, |r| config.sample_draws(r), rng);
    let predictions = predict_densities(net, &features, QuantileLevel::MEDIAN.value())?;
    Ok(MetricTable::from_predictions(&labels, &predictions)?.em1)
}

/// Cumulative histogram of one multinomial draw; exposed for plots.
pub fn sample_cumulative(config: &UrnConfig, draws: u64, rng: &mut dyn RngCore) -> Result<Vec<f64>, ExperimentError> {
    let spec = UrnSpec::new(config.n_balls, draws)?;
    Ok(cumsum(&urn_sample(spec, rng)).into_inner())
}
