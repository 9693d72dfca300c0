//! Experiment configuration files.
//!
//! A config is TOML with top-level `kind`, `seed` and optional `out`, plus the
//! sections `[architecture]`, `[loss]`, `[schedule]`, `[data]` and `[eval]`.
//! Unknown keys are rejected, and so are keys that the chosen kind does not
//! use.

use std::path::{Path, PathBuf};

use empl_core::experiments::bimodal::{BimodalConfig, BimodalEval};
use empl_core::experiments::football::{FootballConfig, FootballSource, SyntheticLeague};
use empl_core::experiments::urn::{UrnConfig, UrnEval};
use empl_core::experiments::{decile_levels, Architecture, Objective, TrainSetup};
use empl_core::histogram::QuantileLevel;
use empl_core::losses::{SmoothingParam, TrainingLoss};
use empl_core::nn::{AdamConfig, Schedule, TauPolicy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Urn,
    Football,
    Bimodal,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Urn => "urn",
            ExperimentKind::Football => "football",
            ExperimentKind::Bimodal => "bimodal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub architecture: ArchitectureConfig,
    pub loss: LossConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub batch_norm: bool,
    #[serde(default)]
    pub dropout: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    Empl,
    EmplSmoothed,
    W1,
    Em2,
    CrossEntropy,
    Mae,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauPolicyName {
    Uniform,
}

/// `tau = "uniform"` or a fixed level such as `tau = 0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauSetting {
    Level(f64),
    Policy(TauPolicyName),
}

impl Default for TauSetting {
    fn default() -> Self {
        TauSetting::Policy(TauPolicyName::Uniform)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub name: LossName,
    #[serde(default)]
    pub tau: TauSetting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

fn default_learning_rate() -> f64 {
    AdamConfig::default().learning_rate
}
fn default_beta1() -> f64 {
    AdamConfig::default().beta1
}
fn default_beta2() -> f64 {
    AdamConfig::default().beta2
}
fn default_epsilon() -> f64 {
    AdamConfig::default().epsilon
}
fn default_log_interval() -> usize {
    100
}
fn default_final_lr_fraction() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Batch iterations (urn, bimodal).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// Passes over the augmented seasons (football).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_log_interval")]
    pub log_interval: usize,
    #[serde(default = "default_final_lr_fraction")]
    pub final_lr_fraction: f64,
    /// Iterations of the Gaussian baseline (bimodal); defaults to `iterations`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_iterations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FootballSourceName {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    // urn
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_balls: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_log10_draws: Option<f64>,
    // football
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<FootballSourceName>,
    /// Match CSV, relative to the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_season_ids: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clubs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seasons: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_seasons: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replays: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap_seasons: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_goals: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength_effect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_advantage: Option<f64>,
}

/// Evaluation settings. Also accepted on its own as an eval spec file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Quantile levels of the band tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    /// Metric columns to report; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Vec<String>>,
    /// Level of the metric table predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_samples: Option<usize>,
    // urn
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation_size: Option<f64>,
    // bimodal
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// Metric column keys accepted in `eval.metrics`, in table order.
pub const METRIC_KEYS: [&str; 5] = ["mae", "mse", "em1", "em2", "is"];

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let config: Self = parse_toml(text, origin)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml(&text, path)?;
        if let (Some(p), Some(dir)) = (&config.data.path, path.parent()) {
            if p.is_relative() {
                config.data.path = Some(dir.join(p));
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seed > i64::MAX as u64 {
            return Err(invalid("seed", "must fit in a TOML integer (at most 2^63 - 1)"));
        }
        let a = &self.architecture;
        if a.hidden.contains(&0) {
            return Err(invalid("architecture.hidden", "layer widths must be at least 1"));
        }
        if !(0.0..1.0).contains(&a.dropout) {
            return Err(invalid("architecture.dropout", "must lie in [0, 1)"));
        }

        let l = &self.loss;
        match (l.name, l.alpha) {
            (LossName::EmplSmoothed, None) => return Err(invalid("loss.alpha", "required by the smoothed loss")),
            (LossName::EmplSmoothed, Some(alpha)) if !(alpha > 0.0 && alpha.is_finite()) => {
                return Err(invalid("loss.alpha", format!("must be > 0 for the smoothed loss, got {alpha}")))
            }
            (LossName::EmplSmoothed, _) => {}
            (_, Some(_)) => return Err(invalid("loss.alpha", "only used by empl_smoothed")),
            (_, None) => {}
        }
        if let TauSetting::Level(t) = l.tau {
            if !(t > 0.0 && t < 1.0) {
                return Err(invalid("loss.tau", format!("a fixed level must lie in (0, 1), got {t}")));
            }
        }

        let s = &self.schedule;
        if s.batch_size == 0 {
            return Err(invalid("schedule.batch_size", "must be at least 1"));
        }
        if s.log_interval == 0 {
            return Err(invalid("schedule.log_interval", "must be at least 1"));
        }
        if !(s.learning_rate > 0.0 && s.learning_rate.is_finite()) {
            return Err(invalid("schedule.learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&s.beta1) {
            return Err(invalid("schedule.beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&s.beta2) {
            return Err(invalid("schedule.beta2", "must lie in [0, 1)"));
        }
        if !(s.epsilon > 0.0) {
            return Err(invalid("schedule.epsilon", "must be positive"));
        }
        if !(s.final_lr_fraction > 0.0 && s.final_lr_fraction <= 1.0) {
            return Err(invalid("schedule.final_lr_fraction", "must lie in (0, 1]"));
        }
        match self.kind {
            ExperimentKind::Football => {
                if s.epochs.is_none() {
                    return Err(invalid("schedule.epochs", "required for football"));
                }
                if s.iterations.is_some() {
                    return Err(invalid("schedule.iterations", "football counts epochs, not iterations"));
                }
            }
            _ => {
                if s.iterations.is_none() {
                    return Err(invalid("schedule.iterations", "required"));
                }
                if s.epochs.is_some() {
                    return Err(invalid("schedule.epochs", "only used by football"));
                }
            }
        }
        if s.baseline_iterations.is_some() && self.kind != ExperimentKind::Bimodal {
            return Err(invalid("schedule.baseline_iterations", "only used by bimodal"));
        }

        self.validate_data()?;
        self.eval.validate(self.kind)
    }

    fn validate_data(&self) -> Result<(), ConfigError> {
        let d = &self.data;
        let urn_keys = [("n_balls", d.n_balls.is_some()), ("max_log10_draws", d.max_log10_draws.is_some())];
        let football_keys = [
            ("source", d.source.is_some()),
            ("path", d.path.is_some()),
            ("test_season_ids", d.test_season_ids.is_some()),
            ("clubs", d.clubs.is_some()),
            ("seasons", d.seasons.is_some()),
            ("test_seasons", d.test_seasons.is_some()),
            ("replays", d.replays.is_some()),
            ("bootstrap_seasons", d.bootstrap_seasons.is_some()),
            ("base_goals", d.base_goals.is_some()),
            ("strength_effect", d.strength_effect.is_some()),
            ("home_advantage", d.home_advantage.is_some()),
        ];
        let foreign: Vec<&str> = match self.kind {
            ExperimentKind::Urn => football_keys.iter(),
            ExperimentKind::Football => urn_keys.iter(),
            ExperimentKind::Bimodal => {
                if let Some((k, _)) = urn_keys.iter().chain(&football_keys).find(|(_, set)| *set) {
                    return Err(invalid(&format!("data.{k}"), "bimodal takes no data settings"));
                }
                [].iter()
            }
        }
        .filter(|(_, set)| *set)
        .map(|(k, _)| *k)
        .collect();
        if let Some(k) = foreign.first() {
            return Err(invalid(&format!("data.{k}"), format!("not used by {}", self.kind.name())));
        }

        if d.n_balls == Some(0) {
            return Err(invalid("data.n_balls", "must be at least 1"));
        }
        if let Some(m) = d.max_log10_draws {
            if !(m > 0.0 && m.is_finite()) {
                return Err(invalid("data.max_log10_draws", "must be positive"));
            }
        }
        if self.kind == ExperimentKind::Football {
            match d.source.unwrap_or(FootballSourceName::Synthetic) {
                FootballSourceName::Csv => {
                    if d.path.is_none() {
                        return Err(invalid("data.path", "required when data.source = \"csv\""));
                    }
                    for (k, set) in &football_keys[3..5] {
                        if *set {
                            return Err(invalid(&format!("data.{k}"), "only used by the synthetic source"));
                        }
                    }
                    for (k, set) in &football_keys[8..] {
                        if *set {
                            return Err(invalid(&format!("data.{k}"), "only used by the synthetic source"));
                        }
                    }
                }
                FootballSourceName::Synthetic => {
                    if d.path.is_some() {
                        return Err(invalid("data.path", "only used when data.source = \"csv\""));
                    }
                    if d.test_season_ids.is_some() {
                        return Err(invalid("data.test_season_ids", "only used when data.source = \"csv\""));
                    }
                    let clubs = d.clubs.unwrap_or(18);
                    if clubs < 2 || clubs % 2 != 0 {
                        return Err(invalid("data.clubs", "must be an even number of at least 2"));
                    }
                    let seasons = d.seasons.unwrap_or(23);
                    if seasons <= d.test_seasons.unwrap_or(3) {
                        return Err(invalid("data.seasons", "must exceed data.test_seasons"));
                    }
                    for (k, v) in [("base_goals", d.base_goals), ("strength_effect", d.strength_effect), ("home_advantage", d.home_advantage)] {
                        if v.is_some_and(|v| !v.is_finite() || (k == "base_goals" && v <= 0.0)) {
                            return Err(invalid(&format!("data.{k}"), "must be finite (and base_goals positive)"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            hidden: self.architecture.hidden.clone(),
            batch_norm: self.architecture.batch_norm,
            dropout: self.architecture.dropout,
        }
    }

    pub fn training_loss(&self) -> TrainingLoss {
        match self.loss.name {
            LossName::Empl => TrainingLoss::Empl,
            LossName::EmplSmoothed => {
                TrainingLoss::EmplSmoothed(SmoothingParam::new(self.loss.alpha.unwrap_or(f64::NAN)).expect("validated alpha"))
            }
            LossName::W1 => TrainingLoss::W1,
            LossName::Em2 => TrainingLoss::Em2,
            LossName::CrossEntropy => TrainingLoss::CrossEntropy,
            LossName::Mae => TrainingLoss::Mae,
            LossName::Mse => TrainingLoss::Mse,
        }
    }

    pub fn tau_policy(&self) -> TauPolicy {
        match self.loss.tau {
            TauSetting::Level(t) => TauPolicy::Fixed(QuantileLevel::new(t).expect("validated level")),
            TauSetting::Policy(TauPolicyName::Uniform) => TauPolicy::Uniform,
        }
    }

    pub fn schedule(&self) -> Schedule {
        let s = &self.schedule;
        Schedule {
            iterations: s.iterations.unwrap_or(0),
            batch_size: s.batch_size,
            adam: AdamConfig {
                learning_rate: s.learning_rate,
                beta1: s.beta1,
                beta2: s.beta2,
                epsilon: s.epsilon,
            },
            log_interval: s.log_interval,
            final_lr_fraction: s.final_lr_fraction,
        }
    }

    pub fn setup(&self) -> TrainSetup {
        TrainSetup {
            architecture: self.architecture(),
            objective: Objective {
                loss: self.training_loss(),
                tau: self.tau_policy(),
            },
            schedule: self.schedule(),
        }
    }

    pub fn urn(&self) -> UrnConfig {
        let defaults = UrnConfig::default();
        UrnConfig {
            n_balls: self.data.n_balls.unwrap_or(defaults.n_balls),
            max_log10_draws: self.data.max_log10_draws.unwrap_or(defaults.max_log10_draws),
            setup: self.setup(),
        }
    }

    pub fn urn_eval(&self) -> UrnEval {
        let d = UrnEval::default();
        let e = &self.eval;
        UrnEval {
            draws: e.draws.clone().unwrap_or(d.draws),
            levels: e.levels.clone().unwrap_or(d.levels),
            test_samples: e.test_samples.unwrap_or(d.test_samples),
            perturbations: e.perturbations.unwrap_or(d.perturbations),
            perturbation_size: e.perturbation_size.unwrap_or(d.perturbation_size),
            large_draws: d.large_draws,
        }
    }

    pub fn bimodal(&self) -> BimodalConfig {
        let schedule = self.schedule();
        BimodalConfig {
            setup: self.setup(),
            baseline_schedule: Schedule {
                iterations: self.schedule.baseline_iterations.unwrap_or(schedule.iterations),
                ..schedule
            },
        }
    }

    pub fn bimodal_eval(&self) -> BimodalEval {
        let d = BimodalEval::default();
        let e = &self.eval;
        BimodalEval {
            band_levels: e.levels.clone().unwrap_or(d.band_levels),
            oracle_samples: e.oracle_samples.unwrap_or(d.oracle_samples),
            alphas: e.alphas.clone().unwrap_or(d.alphas),
            coverage_samples: e.coverage_samples.unwrap_or(d.coverage_samples),
            epsilon: e.epsilon.unwrap_or(d.epsilon),
            ..d
        }
    }

    /// Football settings; a CSV source is filled in by the caller once the
    /// seasons are loaded.
    pub fn football(&self) -> FootballConfig {
        let d = FootballConfig::default();
        let data = &self.data;
        let source = match data.source.unwrap_or(FootballSourceName::Synthetic) {
            FootballSourceName::Synthetic => {
                let league = SyntheticLeague::default();
                Some(FootballSource::Synthetic(SyntheticLeague {
                    clubs: data.clubs.unwrap_or(league.clubs),
                    seasons: data.seasons.unwrap_or(league.seasons),
                    base_goals: data.base_goals.unwrap_or(league.base_goals),
                    strength_effect: data.strength_effect.unwrap_or(league.strength_effect),
                    home_advantage: data.home_advantage.unwrap_or(league.home_advantage),
                }))
            }
            FootballSourceName::Csv => None,
        };
        FootballConfig {
            source,
            test_seasons: data.test_seasons.unwrap_or(d.test_seasons),
            replays: data.replays.unwrap_or(d.replays),
            epochs: self.schedule.epochs.unwrap_or(d.epochs),
            setup: self.setup(),
            bootstrap_seasons: data.bootstrap_seasons.unwrap_or(d.bootstrap_seasons),
        }
    }

    pub fn levels(&self) -> Vec<f64> {
        self.eval.levels.clone().unwrap_or_else(decile_levels)
    }

    pub fn metrics_tau(&self) -> f64 {
        self.eval.metrics_tau.unwrap_or(QuantileLevel::MEDIAN.value())
    }
}

impl EvalConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        parse_toml(text, origin)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Fields set here replace those of `base`.
    pub fn overlay(&self, base: &EvalConfig) -> EvalConfig {
        macro_rules! pick {
            ($($f:ident),*) => { EvalConfig { $($f: self.$f.clone().or_else(|| base.$f.clone())),* } };
        }
        pick!(levels, metrics, metrics_tau, test_samples, draws, perturbations, perturbation_size, oracle_samples, coverage_samples, alphas, epsilon)
    }

    pub fn validate(&self, kind: ExperimentKind) -> Result<(), ConfigError> {
        let level_ok = |t: f64| t > 0.0 && t < 1.0;
        if let Some(levels) = &self.levels {
            if levels.is_empty() || !levels.iter().all(|&t| level_ok(t)) {
                return Err(invalid("eval.levels", "need at least one level, each in (0, 1)"));
            }
        }
        if let Some(t) = self.metrics_tau {
            if !level_ok(t) {
                return Err(invalid("eval.metrics_tau", "must lie in (0, 1)"));
            }
        }
        if let Some(metrics) = &self.metrics {
            if let Some(m) = metrics.iter().find(|m| !METRIC_KEYS.contains(&m.as_str())) {
                return Err(invalid("eval.metrics", format!("unknown metric `{m}`; expected one of {METRIC_KEYS:?}")));
            }
        }
        let urn_only = [
            ("draws", self.draws.is_some()),
            ("perturbations", self.perturbations.is_some()),
            ("perturbation_size", self.perturbation_size.is_some()),
        ];
        let bimodal_only = [
            ("oracle_samples", self.oracle_samples.is_some()),
            ("coverage_samples", self.coverage_samples.is_some()),
            ("alphas", self.alphas.is_some()),
            ("epsilon", self.epsilon.is_some()),
        ];
        let test_samples = [("test_samples", self.test_samples.is_some())];
        let foreign: Vec<&(&str, bool)> = match kind {
            ExperimentKind::Urn => bimodal_only.iter().collect(),
            ExperimentKind::Bimodal => urn_only.iter().collect(),
            ExperimentKind::Football => urn_only.iter().chain(&bimodal_only).chain(&test_samples).collect(),
        };
        if let Some((k, _)) = foreign.into_iter().find(|(_, set)| *set) {
            return Err(invalid(&format!("eval.{k}"), format!("not used by {}", kind.name())));
        }
        if let Some(draws) = &self.draws {
            if draws.is_empty() || draws.contains(&0) {
                return Err(invalid("eval.draws", "need at least one draw count, each at least 1"));
            }
        }
        if let Some(alphas) = &self.alphas {
            if alphas.is_empty() || !alphas.iter().all(|&a| a > 0.0 && a < 1.0) {
                return Err(invalid("eval.alphas", "need at least one level, each in (0, 1)"));
            }
        }
        if let Some(size) = self.perturbation_size {
            if !(size >= 0.0 && size.is_finite()) {
                return Err(invalid("eval.perturbation_size", "must be finite and non-negative"));
            }
        }
        if let Some(eps) = self.epsilon {
            if !(0.0..0.5).contains(&eps) {
                return Err(invalid("eval.epsilon", "must lie in [0, 0.5)"));
            }
        }
        Ok(())
    }

    /// Indices into the metric table columns selected by `metrics`.
    pub fn metric_columns(&self) -> Vec<usize> {
        match &self.metrics {
            None => (0..METRIC_KEYS.len()).collect(),
            Some(names) => METRIC_KEYS
                .iter()
                .enumerate()
                .filter(|(_, k)| names.iter().any(|n| n == *k))
                .map(|(i, _)| i)
                .collect(),
        }
    }
}
