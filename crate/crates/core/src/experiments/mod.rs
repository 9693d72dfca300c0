//! Desk-scale versions of the urn, football and bimodal experiments, plus
//! the shared pieces they use: metric tables, network band predictors and a
//! Gaussian likelihood baseline.

pub mod bimodal;
pub mod football;
pub mod gaussian;
pub mod metrics;
pub mod urn;

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::histogram::HistogramError;
use crate::losses::{LossError, TrainingLoss};
use crate::nn::{Head, Network, NetworkSpec, NnError, Schedule, TauPolicy};
use crate::oracles::{BandPredictor, OracleError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Histogram(#[from] HistogramError),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("malformed season: {0}")]
    MalformedSeason(String),
    #[error("no football data source configured")]
    DataUnavailable,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Hidden-layer layout shared by every experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    pub batch_norm: bool,
    pub dropout: f64,
}

impl Architecture {
    pub fn spec(&self, features: usize, outputs: usize, head: Head) -> NetworkSpec {
        NetworkSpec {
            features,
            hidden: self.hidden.clone(),
            batch_norm: self.batch_norm,
            dropout: self.dropout,
            outputs,
            head,
        }
    }
}

/// What the quantile network is trained on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub loss: TrainingLoss,
    pub tau: TauPolicy,
}

/// Everything needed to train one network.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSetup {
    pub architecture: Architecture,
    pub objective: Objective,
    pub schedule: Schedule,
}

/// The standard quantile levels 0.1, 0.2, ..., 0.9.
pub fn decile_levels() -> Vec<f64> {
    (1..10).map(|i| i as f64 / 10.0).collect()
}

/// A quantile network seen as a band predictor, with a feature map from the
/// raw experiment input to network features.
pub struct QuantileNet<'a, F: Fn(&[f64]) -> Vec<f64>> {
    pub net: &'a Network,
    pub featurize: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> BandPredictor for QuantileNet<'_, F> {
    fn predict_cumulative(&self, input: &[f64], tau: f64) -> Vec<f64> {
        self.net
            .predict_one(&(self.featurize)(input), tau)
            .expect("feature map matches the network")
    }
}

/// Per-bin range and ordering problems of a predicted cumulative band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BandViolations {
    pub out_of_range: usize,
    pub non_monotone: usize,
}

impl BandViolations {
    pub fn of(values: &[f64]) -> Self {
        Self {
            out_of_range: values.iter().filter(|v| !(0.0..=1.0).contains(*v)).count(),
            non_monotone: values.windows(2).filter(|w| w[1] < w[0]).count(),
        }
    }

    pub fn any(&self) -> bool {
        self.out_of_range + self.non_monotone > 0
    }

    pub fn add(&mut self, other: Self) {
        self.out_of_range += other.out_of_range;
        self.non_monotone += other.non_monotone;
    }
}
