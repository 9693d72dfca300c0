//! The Earth Mover's Pinball Loss family, the classical comparison losses and
//! the evaluation metrics.
//!
//! Every loss compares a label density histogram `u` with a predicted density
//! histogram `v`. The cross-bin losses work on the cumulative histograms
//! `U = cumsum(u)` and `V = cumsum(v)` through the signed difference
//! `delta_j = V_j - U_j`:
//!
//! * exact EMPL: `mean_j (1[delta_j >= 0] - tau) * delta_j`
//! * smoothed EMPL: `mean_j (-tau * delta_j + alpha * softplus(delta_j / alpha))`
//! * W1: `mean_j |delta_j|`, EM2: `mean_j delta_j^2`
//!
//! At `delta_j = 0` the exact loss uses the indicator `1[delta >= 0]`; the
//! term itself is zero there, but the subgradient reported by [`empl_grad`]
//! follows the same convention.
//!
//! Gradients are taken with respect to the predicted *density* histogram.
//! Since `V = cumsum(v)`, the chain rule through the running sum is a reverse
//! running sum of the per-bin derivatives with respect to `V`.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::histogram::{reverse_cumsum_in_place, DensityHistogram, QuantileLevel};
use crate::math;

/// Scalar loss or metric value.
pub type LossValue = f64;

/// Smallest predicted mass accepted by the cross-entropy.
pub const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("label has {label} bins but prediction has {pred}")]
    DimensionMismatch { label: usize, pred: usize },
    #[error("prediction has no mass in bin {bin} where the label does")]
    LogOfZero { bin: usize },
    #[error("smoothing parameter must be positive and finite, got {0}")]
    InvalidSmoothing(f64),
}

/// Softplus smoothing scale `alpha > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "f64", into = "f64"))]
pub struct SmoothingParam(f64);

impl SmoothingParam {
    pub fn new(alpha: f64) -> Result<Self, LossError> {
        if alpha > 0.0 && alpha.is_finite() {
            Ok(Self(alpha))
        } else {
            Err(LossError::InvalidSmoothing(alpha))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SmoothingParam {
    type Error = LossError;

    fn try_from(alpha: f64) -> Result<Self, Self::Error> {
        Self::new(alpha)
    }
}

impl From<SmoothingParam> for f64 {
    fn from(a: SmoothingParam) -> Self {
        a.0
    }
}

/// Derivative of a loss with respect to each predicted density value.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient(Vec<f64>);

impl LossGradient {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn check_dims(label: &[f64], pred: &[f64]) -> Result<(), LossError> {
    if label.len() != pred.len() {
        Err(LossError::DimensionMismatch {
            label: label.len(),
            pred: pred.len(),
        })
    } else {
        Ok(())
    }
}

/// Applies `f` to the cumulative differences `V_j - U_j` and averages.
#[inline]
fn mean_over_cdf_gap(label: &[f64], pred: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
    let (mut u, mut v, mut total) = (0.0, 0.0, 0.0);
    for (&a, &b) in label.iter().zip(pred) {
        u += a;
        v += b;
        total += f(v - u);
    }
    total / label.len() as f64
}

#[inline]
fn pinball_on_gap(delta: f64, tau: f64) -> f64 {
    let step = if delta >= 0.0 { 1.0 } else { 0.0 };
    (step - tau) * delta
}

#[inline]
fn smoothed_on_gap(delta: f64, tau: f64, alpha: f64) -> f64 {
    -tau * delta + alpha * math::softplus(delta / alpha)
}

pub fn empl(label: &DensityHistogram, pred: &DensityHistogram, tau: QuantileLevel) -> Result<LossValue, LossError> {
    check_dims(label, pred)?;
    let tau = tau.value();
    Ok(mean_over_cdf_gap(label, pred, |d| pinball_on_gap(d, tau)))
}

pub fn empl_smoothed(
    label: &DensityHistogram,
    pred: &DensityHistogram,
    tau: QuantileLevel,
    alpha: SmoothingParam,
) -> Result<LossValue, LossError> {
    check_dims(label, pred)?;
    let (tau, alpha) = (tau.value(), alpha.value());
    Ok(mean_over_cdf_gap(label, pred, |d| smoothed_on_gap(d, tau, alpha)))
}

/// 1-Wasserstein distance between two histograms on unit-spaced bins, in the
/// bin-averaged form `mean_j |U_j - V_j|`.
pub fn w1(label: &DensityHistogram, pred: &DensityHistogram) -> Result<LossValue, LossError> {
    check_dims(label, pred)?;
    Ok(mean_over_cdf_gap(label, pred, f64::abs))
}

/// Squared earth mover's distance `mean_j (U_j - V_j)^2`.
pub fn em2(label: &DensityHistogram, pred: &DensityHistogram) -> Result<LossValue, LossError> {
    check_dims(label, pred)?;
    Ok(mean_over_cdf_gap(label, pred, |d| d * d))
}

/// Scalar pinball loss of an estimate `y_hat` against an observation `y`.
pub fn pinball_scalar(y: f64, y_hat: f64, tau: QuantileLevel) -> LossValue {
    let tau = tau.value();
    let r = y - y_hat;
    if r >= 0.0 {
        tau * r
    } else {
        (tau - 1.0) * r
    }
}

/// `-sum_j m_j ln v_j` on density histograms.
pub fn cross_entropy(label: &DensityHistogram, pred: &DensityHistogram) -> Result<LossValue, LossError> {
    check_dims(label, pred)?;
    raw_cross_entropy(label, pred)
}

fn raw_cross_entropy(label: &[f64], pred: &[f64]) -> Result<LossValue, LossError> {
    let mut total = 0.0;
    for (bin, (&m, &v)) in label.iter().zip(pred).enumerate() {
        if m > 0.0 {
            if v <= LOG_FLOOR {
                return Err(LossError::LogOfZero { bin });
            }
            total -= m * math::log(v);
        }
    }
    Ok(total)
}

pub fn mae(label: &DensityHistogram, pred: &DensityHistogram) -> Result<LossValue, LossError> {
    check_dims(label, pred)?;
    Ok(label.iter().zip(pred.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>() / label.len() as f64)
}

pub fn mse(label: &DensityHistogram, pred: &DensityHistogram) -> Result<LossValue, LossError> {
    check_dims(label, pred)?;
    Ok(label.iter().zip(pred.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / label.len() as f64)
}

/// Overlap `sum_j min(m_j, v_j)`: 1 for identical histograms, 0 for disjoint
/// supports.
pub fn histogram_intersection(label: &DensityHistogram, pred: &DensityHistogram) -> Result<LossValue, LossError> {
    check_dims(label, pred)?;
    Ok(label.iter().zip(pred.iter()).map(|(a, b)| a.min(*b)).sum())
}

/// Gradient of the exact (`alpha = None`) or smoothed EMPL with respect to the
/// predicted density histogram.
pub fn empl_grad(
    label: &DensityHistogram,
    pred: &DensityHistogram,
    tau: QuantileLevel,
    alpha: Option<SmoothingParam>,
) -> Result<LossGradient, LossError> {
    check_dims(label, pred)?;
    let loss = match alpha {
        Some(a) => TrainingLoss::EmplSmoothed(a),
        None => TrainingLoss::Empl,
    };
    let mut out = vec![0.0; label.len()];
    loss.gradient(label, pred, tau.value(), &mut out);
    Ok(LossGradient(out))
}

/// A loss usable for training the quantile head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainingLoss {
    Empl,
    EmplSmoothed(SmoothingParam),
    W1,
    Em2,
    CrossEntropy,
    Mae,
    Mse,
}

impl TrainingLoss {
    pub fn name(&self) -> &'static str {
        match self {
            TrainingLoss::Empl => "empl",
            TrainingLoss::EmplSmoothed(_) => "empl_smoothed",
            TrainingLoss::W1 => "w1",
            TrainingLoss::Em2 => "em2",
            TrainingLoss::CrossEntropy => "cross_entropy",
            TrainingLoss::Mae => "mae",
            TrainingLoss::Mse => "mse",
        }
    }

    /// Whether the loss depends on the quantile level at all.
    pub fn uses_tau(&self) -> bool {
        matches!(self, TrainingLoss::Empl | TrainingLoss::EmplSmoothed(_))
    }

    /// Loss for one sample given raw density slices of equal length.
    pub fn value(&self, label: &[f64], pred: &[f64], tau: f64) -> Result<LossValue, LossError> {
        check_dims(label, pred)?;
        let n = label.len() as f64;
        Ok(match *self {
            TrainingLoss::Empl => mean_over_cdf_gap(label, pred, |d| pinball_on_gap(d, tau)),
            TrainingLoss::EmplSmoothed(a) => {
                let alpha = a.value();
                mean_over_cdf_gap(label, pred, |d| smoothed_on_gap(d, tau, alpha))
            }
            TrainingLoss::W1 => mean_over_cdf_gap(label, pred, f64::abs),
            TrainingLoss::Em2 => mean_over_cdf_gap(label, pred, |d| d * d),
            TrainingLoss::CrossEntropy => raw_cross_entropy(label, pred)?,
            TrainingLoss::Mae => label.iter().zip(pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / n,
            TrainingLoss::Mse => label.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n,
        })
    }

    /// Writes `d loss / d pred_r` into `out`. Slices must have equal length.
    pub fn gradient(&self, label: &[f64], pred: &[f64], tau: f64, out: &mut [f64]) {
        debug_assert!(label.len() == pred.len() && pred.len() == out.len());
        let n = label.len() as f64;
        let cdf_gap_grad = |out: &mut [f64], f: &dyn Fn(f64) -> f64| {
            let (mut u, mut v) = (0.0, 0.0);
            for ((o, &a), &b) in out.iter_mut().zip(label).zip(pred) {
                u += a;
                v += b;
                *o = f(v - u) / n;
            }
            reverse_cumsum_in_place(out);
        };
        match *self {
            TrainingLoss::Empl => cdf_gap_grad(out, &|d| if d >= 0.0 { 1.0 - tau } else { -tau }),
            TrainingLoss::EmplSmoothed(a) => {
                let alpha = a.value();
                cdf_gap_grad(out, &|d| -tau + math::sigmoid(d / alpha))
            }
            TrainingLoss::W1 => cdf_gap_grad(out, &|d| if d >= 0.0 { 1.0 } else { -1.0 }),
            TrainingLoss::Em2 => cdf_gap_grad(out, &|d| 2.0 * d),
            TrainingLoss::CrossEntropy => {
                for ((o, &m), &v) in out.iter_mut().zip(label).zip(pred) {
                    *o = if m > 0.0 { -m / v.max(LOG_FLOOR) } else { 0.0 };
                }
            }
            TrainingLoss::Mae => {
                for ((o, &m), &v) in out.iter_mut().zip(label).zip(pred) {
                    *o = if v - m >= 0.0 { 1.0 / n } else { -1.0 / n };
                }
            }
            TrainingLoss::Mse => {
                for ((o, &m), &v) in out.iter_mut().zip(label).zip(pred) {
                    *o = 2.0 * (v - m) / n;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::normalize;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn h(v: &[f64]) -> DensityHistogram {
        DensityHistogram::new(v.to_vec()).unwrap()
    }

    fn t(tau: f64) -> QuantileLevel {
        QuantileLevel::new(tau).unwrap()
    }

    fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> (DensityHistogram, DensityHistogram) {
        let mut draw = || {
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-12).collect();
            normalize(&raw).unwrap()
        };
        (draw(), draw())
    }

    #[test]
    fn empl_examples() {
        let (a, b) = (h(&[1.0, 0.0]), h(&[0.0, 1.0]));
        assert_eq!(empl(&a, &b, t(0.5)).unwrap(), 0.25);
        assert!((empl(&a, &b, t(0.9)).unwrap() - 0.45).abs() < 1e-15);
        let c = h(&[0.1, 0.7, 0.2]);
        for tau in [0.05, 0.5, 0.95] {
            assert_eq!(empl(&c, &c, t(tau)).unwrap(), 0.0);
        }
        assert!(matches!(
            empl(&a, &h(&[1.0]), t(0.5)),
            Err(LossError::DimensionMismatch { label: 2, pred: 1 })
        ));
    }

    #[test]
    fn smoothed_examples() {
        let c = h(&[0.3, 0.3, 0.4]);
        let alpha = SmoothingParam::new(0.01).unwrap();
        for tau in [0.1, 0.5, 0.9] {
            let v = empl_smoothed(&c, &c, t(tau), alpha).unwrap();
            assert!((v - 0.01 * core::f64::consts::LN_2).abs() < 1e-15);
        }
        let (a, b) = (h(&[1.0, 0.0]), h(&[0.0, 1.0]));
        let tiny = SmoothingParam::new(1e-6).unwrap();
        assert!((empl_smoothed(&a, &b, t(0.5), tiny).unwrap() - 0.25).abs() < 1e-6);
        assert!(SmoothingParam::new(0.0).is_err());
        assert!(SmoothingParam::new(-1.0).is_err());
    }

    #[test]
    fn smoothing_gap_is_tau_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (a, b) = random_pair(&mut rng, 7);
            let alpha = SmoothingParam::new(0.05).unwrap();
            let gap = |tau| empl_smoothed(&a, &b, t(tau), alpha).unwrap() - empl(&a, &b, t(tau)).unwrap();
            assert!((gap(0.2) - gap(0.8)).abs() < 1e-12);
        }
    }

    #[test]
    fn w1_and_em2_examples() {
        let (a, b) = (h(&[1.0, 0.0, 0.0]), h(&[0.0, 0.0, 1.0]));
        assert!((w1(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((em2(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(w1(&a, &a).unwrap(), 0.0);
        assert_eq!(em2(&b, &b).unwrap(), 0.0);
    }

    #[test]
    fn randomized_metric_relations() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for i in 0..1000 {
            let (a, b) = random_pair(&mut rng, 2 + i % 20);
            let w = w1(&a, &b).unwrap();
            assert!((w - 2.0 * empl(&a, &b, t(0.5)).unwrap()).abs() < 1e-12);
            assert!((w - w1(&b, &a).unwrap()).abs() < 1e-15);
            assert!(em2(&a, &b).unwrap() <= w + 1e-15);
            assert!(mse(&a, &b).unwrap() <= mae(&a, &b).unwrap() + 1e-15);
        }
    }

    #[test]
    fn pinball_examples() {
        assert!((pinball_scalar(2.0, 1.0, t(0.3)) - 0.3).abs() < 1e-15);
        assert!((pinball_scalar(1.0, 2.0, t(0.3)) - 0.7).abs() < 1e-15);
        assert_eq!(pinball_scalar(1.5, 1.5, t(0.8)), 0.0);
    }

    #[test]
    fn pinball_mean_is_minimized_at_the_quantile() {
        // Uniform samples on [0, 1]; the true tau-quantile is tau itself.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut ys: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = ys.len() as f64;
        let mut prefix = Vec::with_capacity(ys.len() + 1);
        prefix.push(0.0);
        for y in &ys {
            prefix.push(prefix.last().unwrap() + y);
        }
        let total = *prefix.last().unwrap();
        for tau in [0.1, 0.5, 0.9] {
            // mean pinball(c) = [tau * sum_{y >= c} (y - c) + (1 - tau) * sum_{y < c} (c - y)] / n
            let mean_loss = |c: f64| {
                let k = ys.partition_point(|&y| y < c);
                let below = prefix[k];
                let above = total - below;
                (tau * (above - c * (n - k as f64)) + (1.0 - tau) * (c * k as f64 - below)) / n
            };
            let grid: Vec<f64> = (0..10_000).map(|i| i as f64 / 9_999.0).collect();
            let best = grid
                .iter()
                .copied()
                .min_by(|&a, &b| mean_loss(a).partial_cmp(&mean_loss(b)).unwrap())
                .unwrap();
            assert!((best - tau).abs() <= 0.01, "tau={tau} best={best}");
            // Spot-check the closed form against the loss itself.
            for &c in &[best, 0.25, 0.75] {
                let direct = ys.iter().map(|&y| pinball_scalar(y, c, t(tau))).sum::<f64>() / n;
                assert!((direct - mean_loss(c)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cross_entropy_examples() {
        let v = cross_entropy(&h(&[1.0, 0.0]), &h(&[1.0 - 1e-9, 1e-9])).unwrap();
        assert!((v - 1e-9).abs() < 1e-15);
        let v = cross_entropy(&h(&[0.5, 0.5]), &h(&[0.5, 0.5])).unwrap();
        assert!((v - core::f64::consts::LN_2).abs() < 1e-15);
        let v = cross_entropy(&h(&[0.25, 0.75]), &h(&[0.75, 0.25])).unwrap();
        let expected = -0.25 * libm::log(0.75) - 0.75 * libm::log(0.25);
        assert!((v - expected).abs() < 1e-15);
        assert_eq!(
            cross_entropy(&h(&[0.0, 1.0]), &h(&[1.0, 0.0])),
            Err(LossError::LogOfZero { bin: 1 })
        );
    }

    #[test]
    fn bin_wise_metric_examples() {
        let (a, b) = (h(&[1.0, 0.0]), h(&[0.0, 1.0]));
        assert_eq!(mae(&a, &b).unwrap(), 1.0);
        assert_eq!(mse(&a, &b).unwrap(), 1.0);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        assert_eq!(histogram_intersection(&a, &a).unwrap(), 1.0);
        assert_eq!(histogram_intersection(&a, &b).unwrap(), 0.0);
        let v = histogram_intersection(&h(&[0.5, 0.5]), &h(&[0.3, 0.7])).unwrap();
        assert!((v - 0.8).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let (a, b) = (h(&[1.0, 0.0]), h(&[0.0, 1.0]));
        let g = empl_grad(&a, &b, t(0.5), None).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.25]);
        let c = h(&[0.2, 0.5, 0.3]);
        let g = empl_grad(&c, &c, t(0.5), Some(SmoothingParam::new(0.01).unwrap())).unwrap();
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }

    fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
        let mut x = x.to_vec();
        (0..x.len())
            .map(|i| {
                let orig = x[i];
                x[i] = orig + step;
                let up = f(&x);
                x[i] = orig - step;
                let down = f(&x);
                x[i] = orig;
                (up - down) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn smoothed_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let step = 1e-6;
        for i in 0..200 {
            let alpha = if i % 2 == 0 { 1e-3 } else { 1e-2 };
            let n = rng.random_range(2..12);
            let (label, pred) = random_pair(&mut rng, n);
            let tau: f64 = rng.random_range(0.01..0.99);
            let loss = TrainingLoss::EmplSmoothed(SmoothingParam::new(alpha).unwrap());
            let analytic = empl_grad(&label, &pred, t(tau), Some(SmoothingParam::new(alpha).unwrap())).unwrap();
            let numeric = central_difference(|p| loss.value(&label, p, tau).unwrap(), &pred, step);
            for (a, n) in analytic.as_slice().iter().zip(&numeric) {
                let scale = a.abs().max(n.abs()).max(1e-3);
                assert!((a - n).abs() / scale < 1e-5, "analytic {a} numeric {n}");
            }
        }
    }

    #[test]
    fn other_training_loss_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for loss in [TrainingLoss::Em2, TrainingLoss::CrossEntropy, TrainingLoss::Mse, TrainingLoss::Mae] {
            for _ in 0..20 {
                let (label, pred) = random_pair(&mut rng, 6);
                let mut analytic = vec![0.0; 6];
                loss.gradient(&label, &pred, 0.5, &mut analytic);
                let numeric = central_difference(|p| loss.value(&label, p, 0.5).unwrap(), &pred, 1e-7);
                for (a, n) in analytic.iter().zip(&numeric) {
                    assert!((a - n).abs() < 1e-5 * a.abs().max(1.0), "{}: {a} vs {n}", loss.name());
                }
            }
        }
    }

    #[test]
    fn w1_gradient_is_twice_the_median_empl_gradient() {
        // The last cumulative gap always sits on the kink, so finite
        // differences are meaningless for W1; use the median identity instead.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (label, pred) = random_pair(&mut rng, 5);
            let mut gw = vec![0.0; 5];
            let mut ge = vec![0.0; 5];
            TrainingLoss::W1.gradient(&label, &pred, 0.3, &mut gw);
            TrainingLoss::Empl.gradient(&label, &pred, 0.5, &mut ge);
            for (a, b) in gw.iter().zip(&ge) {
                assert!((a - 2.0 * b).abs() < 1e-15);
            }
        }
    }

    fn pair_strategy() -> impl Strategy<Value = (DensityHistogram, DensityHistogram)> {
        (2usize..30).prop_flat_map(|n| {
            (
                prop::collection::vec(1e-6f64..1.0, n),
                prop::collection::vec(1e-6f64..1.0, n),
            )
                .prop_map(|(a, b)| (normalize(&a).unwrap(), normalize(&b).unwrap()))
        })
    }

    proptest! {
        #[test]
        fn median_identity((a, b) in pair_strategy()) {
            let lhs = empl(&a, &b, t(0.5)).unwrap();
            prop_assert!((lhs - 0.5 * w1(&a, &b).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn wasserstein_bounds((a, b) in pair_strategy(), tau in 0.001f64..0.999) {
            let w = w1(&a, &b).unwrap();
            let l = empl(&a, &b, t(tau)).unwrap();
            let lo = tau.min(1.0 - tau) * w;
            let hi = tau.max(1.0 - tau) * w;
            prop_assert!(lo <= l + 1e-15 && l <= hi + 1e-15 && hi <= w + 1e-15);
        }

        #[test]
        fn tau_swap_symmetry((a, b) in pair_strategy(), tau in 0.001f64..0.999) {
            let lhs = empl(&a, &b, t(tau)).unwrap();
            let rhs = empl(&b, &a, t(1.0 - tau)).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn smoothing_bound((a, b) in pair_strategy(), tau in 0.001f64..0.999, alpha in 1e-6f64..1.0) {
            let alpha = SmoothingParam::new(alpha).unwrap();
            let gap = empl_smoothed(&a, &b, t(tau), alpha).unwrap() - empl(&a, &b, t(tau)).unwrap();
            prop_assert!(gap >= -1e-15);
            prop_assert!(gap <= alpha.value() * core::f64::consts::LN_2 + 1e-15);
        }
    }
}
