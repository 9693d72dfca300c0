//! Histogram value types and the density/cumulative transforms.
//!
//! Bins are ordered and unit-spaced: the ground distance between bins `i`
//! and `j` is proportional to `|i - j|`. Whatever physical quantity the bins
//! discretize is a data-preparation concern and never enters the math here.

use alloc::vec::Vec;
use core::ops::Deref;

use thiserror::Error;

/// Absolute tolerance on the total mass of a density histogram.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Slack allowed on monotonicity and on the `[0, 1]` range of single bins.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HistogramError {
    #[error("histogram has no bins")]
    Empty,
    #[error("bin {index} holds a non-finite value")]
    NonFinite { index: usize },
    #[error("bin {index} holds {value}, outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("histogram mass sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("cumulative histogram decreases at bin {index}")]
    NotMonotone { index: usize },
    #[error("cumulative histogram ends at {last}, expected 1")]
    BadTotal { last: f64 },
    #[error("cannot normalize a histogram without mass")]
    AllZero,
    #[error("bin {index} holds negative mass {value}")]
    NegativeMass { index: usize, value: f64 },
    #[error("quantile level {0} is outside the open interval (0, 1)")]
    InvalidQuantileLevel(f64),
}

/// Normalized per-bin masses `m_j`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<f64>", into = "Vec<f64>"))]
pub struct DensityHistogram(Vec<f64>);

/// Running sums `M_j = m_1 + ... + m_j` of a density histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeHistogram(Vec<f64>);

/// A probability level strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "f64", into = "f64"))]
pub struct QuantileLevel(f64);

fn check_bins(values: &[f64]) -> Result<(), HistogramError> {
    if values.is_empty() {
        return Err(HistogramError::Empty);
    }
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(HistogramError::NonFinite { index });
        }
        if !(-MONOTONE_SLACK..=1.0 + MONOTONE_SLACK).contains(&value) {
            return Err(HistogramError::OutOfRange { index, value });
        }
    }
    Ok(())
}

impl DensityHistogram {
    pub fn new(values: Vec<f64>) -> Result<Self, HistogramError> {
        check_bins(&values)?;
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(HistogramError::NotNormalized { sum });
        }
        Ok(Self(values))
    }

    /// A histogram with all mass in bin `index` (zero-based).
    pub fn point_mass(bins: usize, index: usize) -> Self {
        assert!(index < bins, "bin {index} out of range for {bins} bins");
        let mut values = alloc::vec![0.0; bins];
        values[index] = 1.0;
        Self(values)
    }

    pub fn uniform(bins: usize) -> Self {
        assert!(bins > 0, "histogram needs at least one bin");
        Self(alloc::vec![1.0 / bins as f64; bins])
    }

    pub fn bins(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn cumsum(&self) -> CumulativeHistogram {
        cumsum(self)
    }
}

impl Deref for DensityHistogram {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for DensityHistogram {
    type Error = HistogramError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<DensityHistogram> for Vec<f64> {
    fn from(h: DensityHistogram) -> Self {
        h.0
    }
}

impl CumulativeHistogram {
    pub fn new(values: Vec<f64>) -> Result<Self, HistogramError> {
        check_bins(&values)?;
        for index in 1..values.len() {
            if values[index] < values[index - 1] - MONOTONE_SLACK {
                return Err(HistogramError::NotMonotone { index });
            }
        }
        let last = values[values.len() - 1];
        if (last - 1.0).abs() > SUM_TOLERANCE {
            return Err(HistogramError::BadTotal { last });
        }
        Ok(Self(values))
    }

    /// Clamps to `[0, 1]`, enforces monotonicity with a running maximum and
    /// pins the last bin to 1. Useful for turning perturbed or externally
    /// produced curves back into valid cumulative histograms.
    pub fn monotonize(raw: &[f64]) -> Result<Self, HistogramError> {
        if raw.is_empty() {
            return Err(HistogramError::Empty);
        }
        let mut running = 0.0f64;
        let mut values: Vec<f64> = raw
            .iter()
            .map(|&v| {
                running = running.max(v.clamp(0.0, 1.0));
                running
            })
            .collect();
        *values.last_mut().unwrap() = 1.0;
        Ok(Self(values))
    }

    pub fn bins(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn diff(&self) -> DensityHistogram {
        diff(self)
    }
}

impl Deref for CumulativeHistogram {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl QuantileLevel {
    pub const MEDIAN: QuantileLevel = QuantileLevel(0.5);

    pub fn new(tau: f64) -> Result<Self, HistogramError> {
        if tau > 0.0 && tau < 1.0 {
            Ok(Self(tau))
        } else {
            Err(HistogramError::InvalidQuantileLevel(tau))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for QuantileLevel {
    type Error = HistogramError;

    fn try_from(tau: f64) -> Result<Self, Self::Error> {
        Self::new(tau)
    }
}

impl From<QuantileLevel> for f64 {
    fn from(t: QuantileLevel) -> Self {
        t.0
    }
}

pub fn cumsum(h: &DensityHistogram) -> CumulativeHistogram {
    let mut acc = 0.0;
    CumulativeHistogram(
        h.0.iter()
            .map(|&m| {
                acc += m;
                acc
            })
            .collect(),
    )
}

pub fn diff(cumulative: &CumulativeHistogram) -> DensityHistogram {
    let values = &cumulative.0;
    let mut out = Vec::with_capacity(values.len());
    out.push(values[0]);
    out.extend(values.windows(2).map(|w| w[1] - w[0]));
    DensityHistogram(out)
}

/// Divides non-negative raw counts by their total.
pub fn normalize(raw: &[f64]) -> Result<DensityHistogram, HistogramError> {
    if raw.is_empty() {
        return Err(HistogramError::Empty);
    }
    for (index, &value) in raw.iter().enumerate() {
        if !value.is_finite() {
            return Err(HistogramError::NonFinite { index });
        }
        if value < 0.0 {
            return Err(HistogramError::NegativeMass { index, value });
        }
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(HistogramError::AllZero);
    }
    Ok(DensityHistogram(raw.iter().map(|&v| v / total).collect()))
}

/// Running sum of a raw slice, written into `out`.
pub(crate) fn cumsum_into(values: &[f64], out: &mut [f64]) {
    let mut acc = 0.0;
    for (o, &v) in out.iter_mut().zip(values) {
        acc += v;
        *o = acc;
    }
}

/// Reverse cumulative sum: `out[r] = sum_{j >= r} g[j]`. This is the adjoint
/// of [`cumsum_into`].
pub(crate) fn reverse_cumsum_in_place(g: &mut [f64]) {
    let mut acc = 0.0;
    for v in g.iter_mut().rev() {
        acc += *v;
        *v = acc;
    }
}
