use alloc::vec::Vec;

use super::ExperimentError;
use crate::histogram::DensityHistogram;
use crate::losses;
use crate::matrix::Matrix;
use crate::nn::{Mode, Network, NnError};

/// Mean per-sample metrics between predicted and true density histograms.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricTable {
    pub samples: usize,
    pub mae: f64,
    pub mse: f64,
    pub em1: f64,
    pub em2: f64,
    pub intersection: f64,
}

impl MetricTable {
    /// Column names in display order.
    pub const COLUMNS: [&'static str; 5] = ["MAE_x1000", "MSE_x1000", "EM1_x100", "EM2_x100", "IS_percent"];

    /// Values in display units: MAE and MSE times 1000, EM1 and EM2 times
    /// 100, intersection in percent.
    pub fn scaled(&self) -> [f64; 5] {
        [
            self.mae * 1e3,
            self.mse * 1e3,
            self.em1 * 1e2,
            self.em2 * 1e2,
            self.intersection * 1e2,
        ]
    }

    pub fn from_predictions(labels: &[DensityHistogram], predictions: &[DensityHistogram]) -> Result<Self, ExperimentError> {
        if labels.is_empty() {
            return Err(ExperimentError::EmptyTestSet);
        }
        let mut sums = [0.0; 5];
        for (label, pred) in labels.iter().zip(predictions) {
            sums[0] += losses::mae(label, pred)?;
            sums[1] += losses::mse(label, pred)?;
            sums[2] += losses::w1(label, pred)?;
            sums[3] += losses::em2(label, pred)?;
            sums[4] += losses::histogram_intersection(label, pred)?;
        }
        let n = labels.len() as f64;
        Ok(Self {
            samples: labels.len(),
            mae: sums[0] / n,
            mse: sums[1] / n,
            em1: sums[2] / n,
            em2: sums[3] / n,
            intersection: sums[4] / n,
        })
    }
}

/// Density predictions of a quantile network at a single level.
pub fn predict_densities(net: &Network, features: &Matrix, tau: f64) -> Result<Vec<DensityHistogram>, NnError> {
    let taus = alloc::vec![tau; features.rows()];
    let trace = net.forward(features, Some(&taus), Mode::Eval, None)?;
    let density = trace.density().ok_or(NnError::InvalidSpec("metrics need a quantile head"))?;
    Ok(density
        .row_iter()
        .map(|r| DensityHistogram::new(r.to_vec()).expect("softmax output is a histogram"))
        .collect())
}

/// Metric table of the network's predictions at level `tau` (the median by
/// default in the experiments).
pub fn evaluate_metrics(
    net: &Network,
    features: &Matrix,
    labels: &[DensityHistogram],
    tau: f64,
) -> Result<MetricTable, ExperimentError> {
    if labels.is_empty() || features.rows() == 0 {
        return Err(ExperimentError::EmptyTestSet);
    }
    let predictions = predict_densities(net, features, tau)?;
    MetricTable::from_predictions(labels, &predictions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Head, NetworkSpec};

    #[test]
    fn perfect_predictions_score_zero() {
        let labels = alloc::vec![DensityHistogram::new(alloc::vec![0.2, 0.5, 0.3]).unwrap()];
        let table = MetricTable::from_predictions(&labels, &labels).unwrap();
        assert_eq!(table.scaled()[..4], [0.0; 4]);
        assert!((table.intersection - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_network_on_uniform_labels() {
        let net = Network::zeroed(NetworkSpec {
            features: 2,
            hidden: alloc::vec![4],
            batch_norm: true,
            dropout: 0.0,
            outputs: 4,
            head: Head::Quantile,
        })
        .unwrap();
        let features = Matrix::from_rows(&[[0.1, 0.2], [3.0, -1.0]]);
        let labels = alloc::vec![DensityHistogram::uniform(4); 2];
        let table = evaluate_metrics(&net, &features, &labels, 0.5).unwrap();
        assert_eq!((table.mae, table.mse, table.em1, table.em2), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(table.samples, 2);
    }

    #[test]
    fn empty_test_set_is_an_error() {
        assert_eq!(
            MetricTable::from_predictions(&[], &[]),
            Err(ExperimentError::EmptyTestSet)
        );
    }
}
