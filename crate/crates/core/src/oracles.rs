//! Ground truth for the experiments: analytic urn quantiles, brute-force
//! expected transport costs for fixed strategies, Monte-Carlo quantile bands
//! and coverage.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::histogram::{cumsum, DensityHistogram, HistogramError};
use crate::math;

/// Slack used when comparing a CDF value against a quantile level, so that
/// levels sitting exactly on a CDF step resolve to the lower value.
pub const CDF_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("no (sample, bin) pair has a true cumulative value inside [epsilon, 1 - epsilon]")]
    NoEligibleBins,
    #[error(transparent)]
    Histogram(#[from] HistogramError),
}

/// `N` equally likely balls drawn `x` times with replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UrnSpec {
    n_balls: u32,
    draws: u64,
}

impl UrnSpec {
    pub fn new(n_balls: u32, draws: u64) -> Result<Self, OracleError> {
        if n_balls == 0 {
            return Err(OracleError::Domain("an urn needs at least one ball"));
        }
        if draws == 0 {
            return Err(OracleError::Domain("at least one draw is required"));
        }
        Ok(Self { n_balls, draws })
    }

    pub fn n_balls(&self) -> u32 {
        self.n_balls
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }
}

fn log_binomial_pmf(m: u64, x: u64, ln_p: f64, ln_q: f64) -> f64 {
    let (m, x) = (m as f64, x as f64);
    math::lgamma(x + 1.0) - math::lgamma(m + 1.0) - math::lgamma(x - m + 1.0) + m * ln_p + (x - m) * ln_q
}

/// Visits `P(B <= l)` for `l = 0, 1, ..., x` with `B ~ Binomial(x, p)`,
/// stopping early when `visit` returns `false`.
fn scan_binomial_cdf(x: u64, p: f64, mut visit: impl FnMut(u64, f64) -> bool) {
    if p <= 0.0 {
        for l in 0..=x {
            if !visit(l, 1.0) {
                return;
            }
        }
        return;
    }
    if p >= 1.0 {
        for l in 0..=x {
            if !visit(l, if l == x { 1.0 } else { 0.0 }) {
                return;
            }
        }
        return;
    }
    let (ln_p, ln_q) = (math::log(p), math::log1p(-p));
    let mut cdf = 0.0;
    for l in 0..=x {
        cdf += math::exp(log_binomial_pmf(l, x, ln_p, ln_q));
        let value = if l == x { 1.0 } else { cdf.min(1.0) };
        if !visit(l, value) {
            return;
        }
    }
}

/// Probability of at most `l` successes in `x` Bernoulli(`p`) trials,
/// summed term by term in log space.
pub fn binomial_cdf(l: u64, x: u64, p: f64) -> Result<f64, OracleError> {
    if l > x {
        return Err(OracleError::Domain("l must not exceed the number of trials"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(OracleError::Domain("p must lie in [0, 1]"));
    }
    let mut out = 1.0;
    scan_binomial_cdf(x, p, |k, cdf| {
        out = cdf;
        k < l
    });
    Ok(out)
}

fn check_tau(tau: f64) -> Result<(), OracleError> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(OracleError::Domain("tau must lie in the open interval (0, 1)"))
    }
}

/// The `tau`-quantile of the cumulative mass `M_j` in bin `j` (1-based).
pub fn urn_quantile(spec: UrnSpec, j: u32, tau: f64) -> Result<f64, OracleError> {
    Ok(urn_quantiles(spec, j, &[tau])?[0])
}

/// [`urn_quantile`] for several levels at once, sharing a single CDF scan.
pub fn urn_quantiles(spec: UrnSpec, j: u32, taus: &[f64]) -> Result<Vec<f64>, OracleError> {
    if j == 0 || j > spec.n_balls {
        return Err(OracleError::Domain("bin index must lie in 1..=N"));
    }
    taus.iter().try_for_each(|&t| check_tau(t))?;
    let p = j as f64 / spec.n_balls as f64;
    let x = spec.draws;

    let mut order: Vec<usize> = (0..taus.len()).collect();
    order.sort_by(|&a, &b| taus[a].total_cmp(&taus[b]));
    let mut out = vec![1.0; taus.len()];
    let mut next = 0;
    scan_binomial_cdf(x, p, |l, cdf| {
        while next < order.len() && cdf >= taus[order[next]] - CDF_TIE_TOLERANCE {
            out[order[next]] = l as f64 / x as f64;
            next += 1;
        }
        next < order.len()
    });
    Ok(out)
}

/// Cumulative `tau`-quantiles for every bin of the urn.
pub fn urn_band(spec: UrnSpec, tau: f64) -> Result<Vec<f64>, OracleError> {
    (1..=spec.n_balls)
        .map(|j| urn_quantile(spec, j, tau))
        .collect()
}

/// One multinomial draw of the urn, normalized by the number of draws.
pub fn urn_sample<R: Rng + ?Sized>(spec: UrnSpec, rng: &mut R) -> DensityHistogram {
    let n = spec.n_balls as usize;
    let mut counts = vec![0u64; n];
    let mut remaining = spec.draws;
    for (j, count) in counts.iter_mut().enumerate() {
        if remaining == 0 {
            break;
        }
        if j + 1 == n {
            *count = remaining;
            break;
        }
        let p = 1.0 / (n - j) as f64;
        *count = Binomial::new(remaining, p)
            .expect("probability in [0, 1]")
            .sample(rng);
        remaining -= *count;
    }
    let x = spec.draws as f64;
    let mut values: Vec<f64> = counts.iter().map(|&c| c as f64 / x).collect();
    // Counts sum to x exactly; put the float residue in the last non-empty bin.
    let total: f64 = values.iter().sum();
    if let Some(last) = values.iter_mut().rev().find(|v| **v > 0.0) {
        *last += 1.0 - total;
    }
    DensityHistogram::new(values).expect("multinomial counts are a valid histogram")
}

/// Fixed predictions compared in the single-draw urn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// All mass on the central bin.
    Median,
    /// Mass spread uniformly over all bins.
    Mean,
}

/// A non-negative fraction in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub numer: u128,
    pub denom: u128,
}

impl Ratio {
    pub fn new(numer: u128, denom: u128) -> Self {
        let g = gcd(numer, denom).max(1);
        Self {
            numer: numer / g,
            denom: denom / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.numer as f64 / self.denom as f64
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn check_odd(n: u32) -> Result<(), OracleError> {
    if n == 0 || n % 2 == 0 {
        Err(OracleError::Domain("the strategy comparison needs an odd number of balls"))
    } else {
        Ok(())
    }
}

/// Expected bin-averaged W1 of a fixed strategy against a single uniform
/// draw, by enumerating every outcome in exact integer arithmetic.
pub fn expected_emd_strategy_exact(strategy: Strategy, n_balls: u32) -> Result<Ratio, OracleError> {
    check_odd(n_balls)?;
    let n = n_balls as u128;
    let centre = (n + 1) / 2;
    // Both cumulative histograms are scaled by N so every term is an integer.
    let mut total: u128 = 0;
    for drawn in 1..=n {
        for j in 1..=n {
            let truth = if j >= drawn { n } else { 0 };
            let pred = match strategy {
                Strategy::Median => {
                    if j >= centre {
                        n
                    } else {
                        0
                    }
                }
                Strategy::Mean => j,
            };
            total += truth.abs_diff(pred);
        }
    }
    // Mean over N outcomes and N bins, undoing the factor N.
    Ok(Ratio::new(total, n * n * n))
}

/// Floating-point version of [`expected_emd_strategy_exact`], built from the
/// histogram and loss types.
pub fn expected_emd_strategy(strategy: Strategy, n_balls: u32) -> Result<f64, OracleError> {
    check_odd(n_balls)?;
    let n = n_balls as usize;
    let prediction = match strategy {
        Strategy::Median => DensityHistogram::point_mass(n, n / 2),
        Strategy::Mean => DensityHistogram::uniform(n),
    };
    let mut total = 0.0;
    for drawn in 0..n {
        let truth = DensityHistogram::point_mass(n, drawn);
        total += crate::losses::w1(&truth, &prediction).expect("same bin count");
    }
    Ok(total / n as f64)
}

/// Something that produces random density histograms for a given input.
pub trait HistogramGenerator {
    fn bins(&self) -> usize;
    fn sample(&self, input: &[f64], rng: &mut dyn RngCore) -> DensityHistogram;
}

/// The urn with `N` balls; the input's first entry is the number of draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UrnGenerator {
    pub n_balls: u32,
}

impl HistogramGenerator for UrnGenerator {
    fn bins(&self) -> usize {
        self.n_balls as usize
    }

    fn sample(&self, input: &[f64], rng: &mut dyn RngCore) -> DensityHistogram {
        let draws = math::round(input[0]).max(1.0) as u64;
        urn_sample(UrnSpec::new(self.n_balls, draws).expect("n_balls >= 1"), rng)
    }
}

/// Per-level cumulative quantiles, `values[level][bin]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantileBand {
    pub levels: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl QuantileBand {
    pub fn bins(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn at(&self, tau: f64) -> Option<&[f64]> {
        self.levels
            .iter()
            .position(|&l| (l - tau).abs() < 1e-12)
            .map(|i| self.values[i].as_slice())
    }
}

/// Lower empirical quantile `min{v : F_n(v) >= tau}` of sorted values.
pub fn lower_quantile(sorted: &[f64], tau: f64) -> f64 {
    let n = sorted.len();
    let rank = math::ceil(tau * n as f64 - 1e-9) as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Sorted per-bin samples of the cumulative histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalQuantiles {
    per_bin: Vec<Vec<f64>>,
}

impl EmpiricalQuantiles {
    pub fn from_samples(samples: &[DensityHistogram]) -> Self {
        let bins = samples.first().map_or(0, |s| s.bins());
        let mut per_bin = vec![Vec::with_capacity(samples.len()); bins];
        for s in samples {
            for (j, v) in cumsum(s).iter().enumerate() {
                per_bin[j].push(*v);
            }
        }
        per_bin.iter_mut().for_each(|b| b.sort_by(f64::total_cmp));
        Self { per_bin }
    }

    pub fn quantile(&self, bin: usize, tau: f64) -> f64 {
        lower_quantile(&self.per_bin[bin], tau)
    }

    pub fn band(&self, levels: &[f64]) -> QuantileBand {
        QuantileBand {
            levels: levels.to_vec(),
            values: levels
                .iter()
                .map(|&t| (0..self.per_bin.len()).map(|j| self.quantile(j, t)).collect())
                .collect(),
        }
    }
}

/// Monte-Carlo quantile band of `generator` at `input`.
pub fn mc_quantile_band(
    generator: &dyn HistogramGenerator,
    input: &[f64],
    levels: &[f64],
    n_samples: usize,
    rng: &mut dyn RngCore,
) -> Result<QuantileBand, OracleError> {
    if n_samples < 100 {
        return Err(OracleError::Domain("at least 100 samples are required"));
    }
    levels.iter().try_for_each(|&t| check_tau(t))?;
    let samples: Vec<DensityHistogram> = (0..n_samples).map(|_| generator.sample(input, rng)).collect();
    Ok(EmpiricalQuantiles::from_samples(&samples).band(levels))
}

/// Anything that predicts a cumulative histogram for an input and a level.
pub trait BandPredictor {
    fn predict_cumulative(&self, input: &[f64], tau: f64) -> Vec<f64>;
}

impl BandPredictor for QuantileBand {
    /// Ignores the input; levels must be present in the band.
    fn predict_cumulative(&self, _input: &[f64], tau: f64) -> Vec<f64> {
        self.at(tau)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| panic!("level {tau} is not part of the band"))
    }
}

/// Lower and upper levels of the central `alpha` interval.
pub fn interval_levels(alpha: f64) -> (f64, f64) {
    ((1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0)
}

/// Fraction of `(sample, bin)` pairs whose true cumulative value lies inside
/// the predictor's central `alpha` band, counting only pairs with the truth in
/// `[epsilon, 1 - epsilon]`. Both band edges are inclusive.
pub fn coverage(
    predictor: &dyn BandPredictor,
    generator: &dyn HistogramGenerator,
    input: &[f64],
    alphas: &[f64],
    n_samples: usize,
    epsilon: f64,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>, OracleError> {
    for &alpha in alphas {
        check_tau(alpha)?;
    }
    let truths: Vec<Vec<f64>> = (0..n_samples)
        .map(|_| cumsum(&generator.sample(input, rng)).into_inner())
        .collect();
    coverage_of_samples(predictor, &truths, input, alphas, epsilon)
}

/// [`coverage`] against pre-drawn cumulative truths.
pub fn coverage_of_samples(
    predictor: &dyn BandPredictor,
    truths: &[Vec<f64>],
    input: &[f64],
    alphas: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>, OracleError> {
    let eligible = |v: f64| v >= epsilon && v <= 1.0 - epsilon;
    let mut out = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let (lo_tau, hi_tau) = interval_levels(alpha);
        let lo = predictor.predict_cumulative(input, lo_tau);
        let hi = predictor.predict_cumulative(input, hi_tau);
        let (mut inside, mut total) = (0usize, 0usize);
        for truth in truths {
            for (j, &v) in truth.iter().enumerate() {
                if !eligible(v) {
                    continue;
                }
                total += 1;
                if v >= lo[j] && v <= hi[j] {
                    inside += 1;
                }
            }
        }
        if total == 0 {
            return Err(OracleError::NoEligibleBins);
        }
        out.push(inside as f64 / total as f64);
    }
    Ok(out)
}
