//! Ten-bin histograms drawn from one of two Gaussian bumps.
//!
//! The input `(b1, b2, xi)` sets the width of each bump and the probability
//! `xi` of drawing from the first one. Bump `k` sits at bin centre
//! `MODE_CENTRES[k]` with standard deviation `0.5 + 2.5 * b_k` bins; each
//! sample multiplies every bin by `exp(JITTER * g)` with `g` standard normal
//! and renormalizes.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::gaussian::{fit_gaussian_baseline, gaussian_band, gaussian_predict, GaussianNet};
use super::{Architecture, ExperimentError, Objective, QuantileNet, TrainSetup};
use crate::histogram::{cumsum, DensityHistogram};
use crate::losses::TrainingLoss;
use crate::matrix::Matrix;
use crate::nn::{train, Batch, DataSource, Head, LossCurve, Network, Schedule, TauPolicy};
use crate::oracles::{coverage_of_samples, EmpiricalQuantiles, HistogramGenerator, QuantileBand};

pub const BIMODAL_BINS: usize = 10;
pub const MODE_CENTRES: [f64; 2] = [3.5, 7.5];
pub const JITTER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BimodalSpec {
    pub b1: f64,
    pub b2: f64,
    pub xi: f64,
}

impl BimodalSpec {
    pub fn new(b1: f64, b2: f64, xi: f64) -> Result<Self, ExperimentError> {
        if [b1, b2, xi].iter().all(|v| (0.0..=1.0).contains(v)) {
            Ok(Self { b1, b2, xi })
        } else {
            Err(ExperimentError::InvalidConfig("b1, b2 and xi must lie in [0, 1]"))
        }
    }

    pub fn from_input(input: &[f64]) -> Result<Self, ExperimentError> {
        match input {
            [b1, b2, xi] => Self::new(*b1, *b2, *xi),
            _ => Err(ExperimentError::InvalidConfig("bimodal input has three entries")),
        }
    }

    pub fn as_input(&self) -> [f64; 3] {
        [self.b1, self.b2, self.xi]
    }
}

/// Standard deviation of a bump, in bins.
pub fn mode_width(b: f64) -> f64 {
    0.5 + 2.5 * b
}

/// One sample together with the index (0 or 1) of the bump it came from.
pub fn bimodal_generate_with_mode(spec: &BimodalSpec, rng: &mut dyn RngCore) -> (DensityHistogram, usize) {
    let mode = if rng.random::<f64>() < spec.xi { 0 } else { 1 };
    let centre = MODE_CENTRES[mode];
    let width = mode_width(if mode == 0 { spec.b1 } else { spec.b2 });
    let raw: Vec<f64> = (1..=BIMODAL_BINS)
        .map(|i| {
            let z = (i as f64 - centre) / width;
            let g: f64 = StandardNormal.sample(rng);
            crate::math::exp(-0.5 * z * z + JITTER * g)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let values = raw.into_iter().map(|v| v / total).collect();
    (DensityHistogram::new(values).expect("positive weights normalize"), mode)
}

pub fn bimodal_generate(spec: &BimodalSpec, rng: &mut dyn RngCore) -> DensityHistogram {
    bimodal_generate_with_mode(spec, rng).0
}

/// Input `[b1, b2, xi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BimodalGenerator;

impl HistogramGenerator for BimodalGenerator {
    fn bins(&self) -> usize {
        BIMODAL_BINS
    }

    fn sample(&self, input: &[f64], rng: &mut dyn RngCore) -> DensityHistogram {
        bimodal_generate(&BimodalSpec::from_input(input).expect("valid bimodal input"), rng)
    }
}

/// Training batches with inputs uniform on the unit cube.
pub struct BimodalData;

impl DataSource for BimodalData {
    fn next_batch(&mut self, size: usize, rng: &mut dyn RngCore) -> Batch {
        let mut features = Matrix::zeros(size, 3);
        let mut labels = Matrix::zeros(size, BIMODAL_BINS);
        for r in 0..size {
            let spec = BimodalSpec {
                b1: rng.random(),
                b2: rng.random(),
                xi: rng.random(),
            };
            features.row_mut(r).copy_from_slice(&spec.as_input());
            labels.row_mut(r).copy_from_slice(&bimodal_generate(&spec, rng));
        }
        Batch { features, labels }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BimodalConfig {
    pub setup: TrainSetup,
    pub baseline_schedule: Schedule,
}

impl Default for BimodalConfig {
    fn default() -> Self {
        Self {
            setup: TrainSetup {
                architecture: Architecture {
                    hidden: vec![256, 256],
                    batch_norm: true,
                    dropout: 0.0,
                },
                objective: Objective {
                    loss: TrainingLoss::Empl,
                    tau: TauPolicy::Uniform,
                },
                schedule: Schedule::default(),
            },
            baseline_schedule: Schedule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BimodalModels {
    pub empl: Network,
    pub empl_curve: LossCurve,
    pub gaussian: Network,
    pub gaussian_curve: LossCurve,
}

pub fn train_bimodal(config: &BimodalConfig, rng: &mut dyn RngCore) -> Result<BimodalModels, ExperimentError> {
    let setup = &config.setup;
    let mut empl = Network::new(setup.architecture.spec(3, BIMODAL_BINS, Head::Quantile), rng)?;
    let empl_curve = train(&mut empl, &mut BimodalData, setup.objective.loss, setup.objective.tau, &setup.schedule, rng)?;
    let (gaussian, gaussian_curve) =
        fit_gaussian_baseline(&setup.architecture, 3, BIMODAL_BINS, &mut BimodalData, &config.baseline_schedule, rng)?;
    Ok(BimodalModels {
        empl,
        empl_curve,
        gaussian,
        gaussian_curve,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BimodalEval {
    /// Inputs compared band by band against the Monte-Carlo truth.
    pub inputs: Vec<BimodalSpec>,
    pub band_levels: Vec<f64>,
    pub oracle_samples: usize,
    /// Input and 1-based bin of the CDF comparison.
    pub cdf_input: BimodalSpec,
    pub cdf_bin: usize,
    pub cdf_levels: Vec<f64>,
    /// Input, confidence levels and sample count of the calibration curve.
    pub coverage_input: BimodalSpec,
    pub alphas: Vec<f64>,
    pub coverage_samples: usize,
    pub epsilon: f64,
}

impl Default for BimodalEval {
    fn default() -> Self {
        let centre = BimodalSpec {
            b1: 0.5,
            b2: 0.5,
            xi: 0.5,
        };
        Self {
            inputs: vec![
                BimodalSpec { b1: 0.2, b2: 0.2, xi: 0.8 },
                BimodalSpec { b1: 0.8, b2: 0.8, xi: 0.2 },
                centre,
            ],
            band_levels: (0..10).map(|i| 0.05 + 0.1 * i as f64).collect(),
            oracle_samples: 20_000,
            cdf_input: centre,
            cdf_bin: 5,
            cdf_levels: (1..100).map(|i| i as f64 / 100.0).collect(),
            coverage_input: centre,
            alphas: super::decile_levels(),
            coverage_samples: 20_000,
            epsilon: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BimodalPanel {
    pub input: BimodalSpec,
    pub truth: QuantileBand,
    pub empl: QuantileBand,
    pub gaussian: QuantileBand,
}

/// Quantiles of the cumulative value in one bin against the level.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfComparison {
    pub bin: usize,
    pub levels: Vec<f64>,
    pub truth: Vec<f64>,
    pub empl: Vec<f64>,
    pub gaussian: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BimodalReport {
    pub panels: Vec<BimodalPanel>,
    pub cdf: CdfComparison,
    pub alphas: Vec<f64>,
    pub empl_coverage: Vec<f64>,
    pub gaussian_coverage: Vec<f64>,
}

pub fn max_calibration_error(alphas: &[f64], coverage: &[f64]) -> f64 {
    alphas.iter().zip(coverage).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max)
}

impl BimodalReport {
    pub fn empl_max_deviation(&self) -> f64 {
        max_calibration_error(&self.alphas, &self.empl_coverage)
    }

    pub fn gaussian_max_deviation(&self) -> f64 {
        max_calibration_error(&self.alphas, &self.gaussian_coverage)
    }
}

fn truth_samples(spec: &BimodalSpec, n: usize, rng: &mut dyn RngCore) -> Vec<DensityHistogram> {
    (0..n).map(|_| bimodal_generate(spec, rng)).collect()
}

fn network_band(net: &Network, input: &[f64], levels: &[f64]) -> Result<QuantileBand, ExperimentError> {
    let features = Matrix::from_vec(levels.len(), 3, levels.iter().flat_map(|_| input.iter().copied()).collect());
    let predicted = net.predict(&features, levels)?;
    Ok(QuantileBand {
        levels: levels.to_vec(),
        values: predicted.row_iter().map(<[f64]>::to_vec).collect(),
    })
}

fn gaussian_quantile_band(net: &Network, input: &[f64], levels: &[f64]) -> Result<QuantileBand, ExperimentError> {
    let (mean, sigma) = gaussian_predict(net, input)?;
    Ok(QuantileBand {
        levels: levels.to_vec(),
        values: levels.iter().map(|&t| gaussian_band(&mean, &sigma, t)).collect(),
    })
}

pub fn evaluate_bimodal(models: &BimodalModels, eval: &BimodalEval, rng: &mut dyn RngCore) -> Result<BimodalReport, ExperimentError> {
    if eval.coverage_samples == 0 || eval.oracle_samples == 0 {
        return Err(ExperimentError::EmptyTestSet);
    }
    if eval.cdf_bin == 0 || eval.cdf_bin > BIMODAL_BINS {
        return Err(ExperimentError::InvalidConfig("cdf_bin must lie in 1..=10"));
    }
    let mut panels = Vec::with_capacity(eval.inputs.len());
    for spec in &eval.inputs {
        let input = spec.as_input();
        let truth = EmpiricalQuantiles::from_samples(&truth_samples(spec, eval.oracle_samples, rng));
        panels.push(BimodalPanel {
            input: *spec,
            truth: truth.band(&eval.band_levels),
            empl: network_band(&models.empl, &input, &eval.band_levels)?,
            gaussian: gaussian_quantile_band(&models.gaussian, &input, &eval.band_levels)?,
        });
    }

    let input = eval.cdf_input.as_input();
    let j = eval.cdf_bin - 1;
    let truth = EmpiricalQuantiles::from_samples(&truth_samples(&eval.cdf_input, eval.oracle_samples, rng));
    let empl = network_band(&models.empl, &input, &eval.cdf_levels)?;
    let gaussian = gaussian_quantile_band(&models.gaussian, &input, &eval.cdf_levels)?;
    let cdf = CdfComparison {
        bin: eval.cdf_bin,
        levels: eval.cdf_levels.clone(),
        truth: eval.cdf_levels.iter().map(|&t| truth.quantile(j, t)).collect(),
        empl: empl.values.iter().map(|v| v[j]).collect(),
        gaussian: gaussian.values.iter().map(|v| v[j]).collect(),
    };

    let input = eval.coverage_input.as_input();
    let truths: Vec<Vec<f64>> = truth_samples(&eval.coverage_input, eval.coverage_samples, rng)
        .iter()
        .map(|h| cumsum(h).into_inner())
        .collect();
    let empl_net = QuantileNet {
        net: &models.empl,
        featurize: |x: &[f64]| x.to_vec(),
    };
    let gauss_net = GaussianNet {
        net: &models.gaussian,
        featurize: |x: &[f64]| x.to_vec(),
    };
    let empl_coverage = coverage_of_samples(&empl_net, &truths, &input, &eval.alphas, eval.epsilon)?;
    let gaussian_coverage = coverage_of_samples(&gauss_net, &truths, &input, &eval.alphas, eval.epsilon)?;

    Ok(BimodalReport {
        panels,
        cdf,
        alphas: eval.alphas.clone(),
        empl_coverage,
        gaussian_coverage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spec_validation() {
        assert!(BimodalSpec::new(0.0, 1.0, 0.5).is_ok());
        assert!(BimodalSpec::new(-0.1, 0.5, 0.5).is_err());
        assert!(BimodalSpec::new(0.5, 0.5, 1.5).is_err());
        assert!(BimodalSpec::from_input(&[0.5, 0.5]).is_err());
    }

    #[test]
    fn degenerate_mixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let first = BimodalSpec::new(0.3, 0.3, 1.0).unwrap();
        assert!((0..10_000).all(|_| bimodal_generate_with_mode(&first, &mut rng).1 == 0));
        let second = BimodalSpec::new(0.3, 0.3, 0.0).unwrap();
        assert!((0..1_000).all(|_| bimodal_generate_with_mode(&second, &mut rng).1 == 1));
    }

    #[test]
    fn mixture_weight_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = BimodalSpec::new(0.5, 0.5, 0.2).unwrap();
        let n = 100_000;
        let first = (0..n).filter(|_| bimodal_generate_with_mode(&spec, &mut rng).1 == 0).count();
        assert!((first as f64 / n as f64 - 0.2).abs() < 0.01);
    }

    #[test]
    fn interior_bins_are_bimodal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = BimodalSpec::new(0.5, 0.5, 0.5).unwrap();
        // Cumulative mass in bin 5, split by generating bump.
        let mut by_mode = [Vec::new(), Vec::new()];
        for _ in 0..100_000 {
            let (h, mode) = bimodal_generate_with_mode(&spec, &mut rng);
            by_mode[mode].push(cumsum(&h)[4]);
        }
        let lowest_first = by_mode[0].iter().copied().fold(f64::INFINITY, f64::min);
        let highest_second = by_mode[1].iter().copied().fold(0.0, f64::max);
        // Two clusters with an empty gap between them.
        assert!(lowest_first > highest_second + 0.2, "{lowest_first} vs {highest_second}");
        // The middle of the gap holds no samples.
        let mid = 0.5 * (lowest_first + highest_second);
        let near_mid = by_mode.iter().flatten().filter(|&&v| (v - mid).abs() < 0.05).count();
        assert_eq!(near_mid, 0);
    }

    #[test]
    fn untrained_networks_still_give_a_calibration_curve() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut config = BimodalConfig::default();
        config.setup.architecture.hidden = vec![8];
        config.setup.schedule = Schedule {
            iterations: 0,
            ..Schedule::default()
        };
        config.baseline_schedule = config.setup.schedule;
        let models = train_bimodal(&config, &mut rng).unwrap();
        let eval = BimodalEval {
            oracle_samples: 200,
            coverage_samples: 200,
            ..BimodalEval::default()
        };
        let report = evaluate_bimodal(&models, &eval, &mut rng).unwrap();
        assert_eq!(report.empl_coverage.len(), 9);
        assert!(report.empl_coverage.iter().chain(&report.gaussian_coverage).all(|c| (0.0..=1.0).contains(c)));
        assert_eq!(report.panels.len(), 3);
        assert_eq!(report.cdf.truth.len(), 99);
    }
}
