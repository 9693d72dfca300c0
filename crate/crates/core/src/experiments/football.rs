//! League-table position histograms from a club's match results.
//!
//! A season is stored as one result sequence per club; week `w` of a club is
//! its `w`-th match. The table after week `w` ranks clubs on their first `w`
//! results by points, goal difference, goals scored and finally club id,
//! where ids follow the lexicographic order of club names.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::gaussian::{fit_gaussian_baseline, gaussian_band, gaussian_predict};
use super::metrics::{evaluate_metrics, MetricTable};
use super::{Architecture, BandViolations, ExperimentError, Objective, TrainSetup};
use crate::histogram::{cumsum, DensityHistogram};
use crate::losses::{SmoothingParam, TrainingLoss};
use crate::math;
use crate::matrix::Matrix;
use crate::nn::{train, Batch, DataSource, Head, LossCurve, Network, Schedule, TauPolicy};
use crate::oracles::{EmpiricalQuantiles, QuantileBand};

/// A played match between two clubs, by index into the club list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fixture {
    pub home: usize,
    pub away: usize,
    pub home_goals: u32,
    pub away_goals: u32,
}

/// One match from a club's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchRecord {
    pub goals_for: u32,
    pub goals_against: u32,
}

impl MatchRecord {
    pub fn points(&self) -> u32 {
        match self.goals_for.cmp(&self.goals_against) {
            core::cmp::Ordering::Greater => 3,
            core::cmp::Ordering::Equal => 1,
            core::cmp::Ordering::Less => 0,
        }
    }
}

/// A complete double round robin: every club meets every other club once at
/// home and once away.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Season {
    id: String,
    clubs: Vec<String>,
    results: Vec<Vec<MatchRecord>>,
}

fn malformed(msg: String) -> ExperimentError {
    ExperimentError::MalformedSeason(msg)
}

impl Season {
    /// Builds a season from matches in chronological order. Each club's
    /// matches define its weeks.
    pub fn from_matches(id: &str, clubs: &[String], matches: &[Fixture]) -> Result<Self, ExperimentError> {
        let n = clubs.len();
        if n < 2 || n % 2 != 0 {
            return Err(malformed(format!("{id}: need an even number of clubs, got {n}")));
        }
        let distinct: BTreeSet<&String> = clubs.iter().collect();
        if distinct.len() != n {
            return Err(malformed(format!("{id}: duplicate club names")));
        }
        let mut pairs = BTreeSet::new();
        let mut results = vec![Vec::with_capacity(2 * (n - 1)); n];
        for m in matches {
            if m.home >= n || m.away >= n || m.home == m.away {
                return Err(malformed(format!("{id}: invalid pairing {} - {}", m.home, m.away)));
            }
            if !pairs.insert((m.home, m.away)) {
                return Err(malformed(format!(
                    "{id}: {} hosts {} more than once",
                    clubs[m.home], clubs[m.away]
                )));
            }
            results[m.home].push(MatchRecord {
                goals_for: m.home_goals,
                goals_against: m.away_goals,
            });
            results[m.away].push(MatchRecord {
                goals_for: m.away_goals,
                goals_against: m.home_goals,
            });
        }
        let weeks = 2 * (n - 1);
        if let Some(c) = (0..n).find(|&c| results[c].len() != weeks) {
            return Err(malformed(format!(
                "{id}: {} played {} matches, expected {weeks}",
                clubs[c],
                results[c].len()
            )));
        }
        Ok(Self::sorted(id, clubs, results))
    }

    /// Builds a season from explicit match weeks; every club must play
    /// exactly once per week.
    pub fn from_weeks(id: &str, clubs: &[String], weeks: &[Vec<Fixture>]) -> Result<Self, ExperimentError> {
        let n = clubs.len();
        if n >= 2 && weeks.len() != 2 * (n - 1) {
            return Err(malformed(format!("{id}: {} weeks, expected {}", weeks.len(), 2 * (n - 1))));
        }
        for (w, week) in weeks.iter().enumerate() {
            let mut seen = vec![false; n];
            for m in week {
                for c in [m.home, m.away] {
                    if c >= n {
                        return Err(malformed(format!("{id}: week {}: unknown club index {c}", w + 1)));
                    }
                    if seen[c] {
                        return Err(malformed(format!("{id}: week {}: {} plays twice", w + 1, clubs[c])));
                    }
                    seen[c] = true;
                }
            }
            if let Some(c) = seen.iter().position(|s| !s) {
                return Err(malformed(format!("{id}: week {}: {} does not play", w + 1, clubs[c])));
            }
        }
        let flat: Vec<Fixture> = weeks.iter().flatten().copied().collect();
        Self::from_matches(id, clubs, &flat)
    }

    fn sorted(id: &str, clubs: &[String], results: Vec<Vec<MatchRecord>>) -> Self {
        let mut order: Vec<usize> = (0..clubs.len()).collect();
        order.sort_by(|&a, &b| clubs[a].cmp(&clubs[b]));
        Self {
            id: id.into(),
            clubs: order.iter().map(|&i| clubs[i].clone()).collect(),
            results: order.iter().map(|&i| results[i].clone()).collect(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Club names; the position in this list is the club id.
    pub fn clubs(&self) -> &[String] {
        &self.clubs
    }

    pub fn weeks(&self) -> usize {
        self.results.first().map_or(0, Vec::len)
    }

    pub fn results(&self, club: usize) -> &[MatchRecord] {
        &self.results[club]
    }

    pub fn points(&self, club: usize) -> Vec<u32> {
        self.results[club].iter().map(MatchRecord::points).collect()
    }

    pub fn final_points(&self, club: usize) -> u32 {
        self.results[club].iter().map(MatchRecord::points).sum()
    }

    /// The same season with week `w` replaced by week `order[w]` for every club.
    pub fn permute_weeks(&self, order: &[usize]) -> Self {
        Self {
            id: self.id.clone(),
            clubs: self.clubs.clone(),
            results: self
                .results
                .iter()
                .map(|r| order.iter().map(|&w| r[w]).collect())
                .collect(),
        }
    }

    /// Replaces the results of `club` while keeping its id.
    pub fn with_results(&self, club: usize, results: &[MatchRecord]) -> Self {
        let mut out = self.clone();
        out.results[club] = results.to_vec();
        out
    }
}

/// `positions[w][c]`: 1-based table position of club `c` after week `w + 1`.
pub fn league_table(season: &Season) -> Vec<Vec<usize>> {
    let n = season.clubs.len();
    let (mut points, mut diff, mut scored) = (vec![0i64; n], vec![0i64; n], vec![0i64; n]);
    let mut order: Vec<usize> = (0..n).collect();
    let mut table = Vec::with_capacity(season.weeks());
    for w in 0..season.weeks() {
        for c in 0..n {
            let r = season.results[c][w];
            points[c] += r.points() as i64;
            diff[c] += r.goals_for as i64 - r.goals_against as i64;
            scored[c] += r.goals_for as i64;
        }
        order.sort_by(|&a, &b| {
            points[b]
                .cmp(&points[a])
                .then(diff[b].cmp(&diff[a]))
                .then(scored[b].cmp(&scored[a]))
                .then(a.cmp(&b))
        });
        let mut positions = vec![0; n];
        for (rank, &c) in order.iter().enumerate() {
            positions[c] = rank + 1;
        }
        table.push(positions);
    }
    table
}

/// Fraction of weeks the club spent at each table position.
pub fn position_histogram(table: &[Vec<usize>], club: usize) -> DensityHistogram {
    let n = table.first().map_or(0, Vec::len);
    let mut counts = vec![0.0; n];
    for week in table {
        counts[week[club] - 1] += 1.0;
    }
    let weeks = table.len() as f64;
    DensityHistogram::new(counts.into_iter().map(|c| c / weeks).collect()).expect("counts over weeks")
}

/// Network input: points per match scaled to `[0, 1]`.
pub fn club_features(results: &[MatchRecord]) -> Vec<f64> {
    results.iter().map(|r| r.points() as f64 / 3.0).collect()
}

/// `k` random week permutations of every season.
pub fn augment_seasons(seasons: &[Season], k: usize, rng: &mut dyn RngCore) -> Vec<Season> {
    let mut out = Vec::with_capacity(seasons.len() * k);
    for season in seasons {
        let mut order: Vec<usize> = (0..season.weeks()).collect();
        for _ in 0..k {
            order.shuffle(rng);
            out.push(season.permute_weeks(&order));
        }
    }
    out
}

/// Parameters of the synthetic league.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticLeague {
    pub clubs: usize,
    pub seasons: usize,
    pub base_goals: f64,
    pub strength_effect: f64,
    pub home_advantage: f64,
}

impl Default for SyntheticLeague {
    fn default() -> Self {
        Self {
            clubs: 18,
            seasons: 23,
            base_goals: 1.5,
            strength_effect: 0.25,
            home_advantage: 0.25,
        }
    }
}

/// Circle-method double round robin: rounds of `(home, away)` pairs.
pub fn round_robin(n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut ring: Vec<usize> = (0..n).collect();
    let mut first = Vec::with_capacity(n - 1);
    for round in 0..n - 1 {
        let pairs = (0..n / 2)
            .map(|i| {
                let (a, b) = (ring[i], ring[n - 1 - i]);
                if (round + i) % 2 == 0 {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect();
        first.push(pairs);
        ring[1..].rotate_right(1);
    }
    let second: Vec<Vec<(usize, usize)>> = first
        .iter()
        .map(|r: &Vec<(usize, usize)>| r.iter().map(|&(h, a)| (a, h)).collect())
        .collect();
    first.into_iter().chain(second).collect()
}

pub fn synthetic_season(id: &str, league: &SyntheticLeague, rng: &mut dyn RngCore) -> Result<Season, ExperimentError> {
    let n = league.clubs;
    if n < 2 || n % 2 != 0 {
        return Err(ExperimentError::InvalidConfig("synthetic league needs an even number of clubs"));
    }
    let names: Vec<String> = (1..=n).map(|i| format!("club{i:02}")).collect();
    let strength: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let goals = |rate: f64, rng: &mut dyn RngCore| -> u32 {
        let poisson: Poisson<f64> = Poisson::new(rate).expect("positive rate");
        poisson.sample(rng) as u32
    };
    let mut weeks = Vec::with_capacity(2 * (n - 1));
    for round in round_robin(n) {
        let mut week = Vec::with_capacity(n / 2);
        for (home, away) in round {
            let gap = strength[home] - strength[away];
            let home_rate = league.base_goals * math::exp(league.strength_effect * gap + league.home_advantage);
            let away_rate = league.base_goals * math::exp(-league.strength_effect * gap);
            week.push(Fixture {
                home,
                away,
                home_goals: goals(home_rate, rng),
                away_goals: goals(away_rate, rng),
            });
        }
        weeks.push(week);
    }
    Season::from_weeks(id, &names, &weeks)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FootballSource {
    Synthetic(SyntheticLeague),
    /// Seasons ingested elsewhere, already split.
    Seasons { train: Vec<Season>, test: Vec<Season> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FootballConfig {
    pub source: Option<FootballSource>,
    /// Held-out seasons at the end of a synthetic run.
    pub test_seasons: usize,
    pub replays: usize,
    /// Passes over the augmented data; the schedule's iteration count is
    /// derived from this and the batch size.
    pub epochs: usize,
    pub setup: TrainSetup,
    pub bootstrap_seasons: usize,
}

impl Default for FootballConfig {
    fn default() -> Self {
        Self {
            source: Some(FootballSource::Synthetic(SyntheticLeague::default())),
            test_seasons: 3,
            replays: 1000,
            epochs: 250,
            setup: TrainSetup {
                architecture: Architecture {
                    hidden: vec![128, 128],
                    batch_norm: false,
                    dropout: 0.5,
                },
                objective: Objective {
                    loss: TrainingLoss::EmplSmoothed(SmoothingParam::new(0.005).expect("positive")),
                    tau: TauPolicy::Uniform,
                },
                schedule: Schedule::default(),
            },
            bootstrap_seasons: 200,
        }
    }
}

/// Seasons split for training and testing, plus the augmented training set.
#[derive(Debug, Clone, PartialEq)]
pub struct FootballData {
    pub train: Vec<Season>,
    pub test: Vec<Season>,
    pub augmented: Vec<Season>,
}

pub fn prepare_football(config: &FootballConfig, rng: &mut dyn RngCore) -> Result<FootballData, ExperimentError> {
    let (train, test) = match config.source.as_ref().ok_or(ExperimentError::DataUnavailable)? {
        FootballSource::Synthetic(league) => {
            if config.test_seasons >= league.seasons {
                return Err(ExperimentError::InvalidConfig("need at least one training season"));
            }
            let mut seasons = (1..=league.seasons)
                .map(|s| synthetic_season(&format!("synthetic-{s:02}"), league, rng))
                .collect::<Result<Vec<_>, _>>()?;
            let test = seasons.split_off(league.seasons - config.test_seasons);
            (seasons, test)
        }
        FootballSource::Seasons { train, test } => (train.clone(), test.clone()),
    };
    if train.is_empty() {
        return Err(ExperimentError::DataUnavailable);
    }
    if test.is_empty() {
        return Err(ExperimentError::EmptyTestSet);
    }
    let clubs = train[0].clubs().len();
    if train.iter().chain(&test).any(|s| s.clubs().len() != clubs) {
        return Err(ExperimentError::MalformedSeason("all seasons need the same number of clubs".into()));
    }
    let augmented = augment_seasons(&train, config.replays, rng);
    Ok(FootballData { train, test, augmented })
}

/// Features and position-histogram labels for every club of every season.
pub fn club_dataset(seasons: &[Season]) -> (Matrix, Matrix) {
    let clubs = seasons.first().map_or(0, |s| s.clubs().len());
    let weeks = seasons.first().map_or(0, Season::weeks);
    let rows = seasons.len() * clubs;
    let mut features = Matrix::zeros(rows, weeks);
    let mut labels = Matrix::zeros(rows, clubs);
    let mut r = 0;
    for season in seasons {
        let table = league_table(season);
        for c in 0..clubs {
            features.row_mut(r).copy_from_slice(&club_features(season.results(c)));
            labels.row_mut(r).copy_from_slice(&position_histogram(&table, c));
            r += 1;
        }
    }
    (features, labels)
}

/// Shuffled passes over a fixed dataset.
pub struct EpochData {
    features: Matrix,
    labels: Matrix,
    order: Vec<usize>,
    cursor: usize,
}

impl EpochData {
    pub fn new(features: Matrix, labels: Matrix) -> Self {
        let rows = features.rows();
        Self {
            features,
            labels,
            order: (0..rows).collect(),
            cursor: rows,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

impl DataSource for EpochData {
    fn next_batch(&mut self, size: usize, rng: &mut dyn RngCore) -> Batch {
        let mut features = Matrix::zeros(size, self.features.cols());
        let mut labels = Matrix::zeros(size, self.labels.cols());
        for r in 0..size {
            if self.cursor == self.order.len() {
                self.order.shuffle(rng);
                self.cursor = 0;
            }
            let i = self.order[self.cursor];
            self.cursor += 1;
            features.row_mut(r).copy_from_slice(self.features.row(i));
            labels.row_mut(r).copy_from_slice(self.labels.row(i));
        }
        Batch { features, labels }
    }
}

pub fn epoch_iterations(samples: usize, epochs: usize, batch_size: usize) -> usize {
    (samples * epochs).div_ceil(batch_size.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FootballModels {
    pub empl: Network,
    pub empl_curve: LossCurve,
    pub gaussian: Network,
    pub gaussian_curve: LossCurve,
}

pub fn train_football(config: &FootballConfig, data: &FootballData, rng: &mut dyn RngCore) -> Result<FootballModels, ExperimentError> {
    let (features, labels) = club_dataset(&data.augmented);
    let (weeks, clubs) = (features.cols(), labels.cols());
    let setup = &config.setup;
    let schedule = Schedule {
        iterations: epoch_iterations(features.rows(), config.epochs, setup.schedule.batch_size),
        ..setup.schedule
    };
    let mut source = EpochData::new(features, labels);

    let mut empl = Network::new(setup.architecture.spec(weeks, clubs, Head::Quantile), rng)?;
    let empl_curve = train(&mut empl, &mut source, setup.objective.loss, setup.objective.tau, &schedule, rng)?;
    let (gaussian, gaussian_curve) = fit_gaussian_baseline(&setup.architecture, weeks, clubs, &mut source, &schedule, rng)?;
    Ok(FootballModels {
        empl,
        empl_curve,
        gaussian,
        gaussian_curve,
    })
}

/// Club with final points closest to `points`; the lowest id wins ties.
pub fn closest_club(season: &Season, points: u32) -> usize {
    (0..season.clubs().len())
        .min_by_key(|&c| (season.final_points(c).abs_diff(points), c))
        .expect("season has clubs")
}

/// Cumulative position histograms the club would have had in other seasons:
/// in each sampled season the club with the closest final points is
/// replaced by the test club's results.
pub fn bootstrap_cumulatives(
    results: &[MatchRecord],
    pool: &[Season],
    seasons: usize,
    rng: &mut dyn RngCore,
) -> Vec<DensityHistogram> {
    let points: u32 = results.iter().map(MatchRecord::points).sum();
    let mut picks: Vec<usize> = (0..pool.len()).collect();
    let chosen: Vec<usize> = if seasons <= pool.len() {
        picks.partial_shuffle(rng, seasons).0.to_vec()
    } else {
        (0..seasons).map(|_| rng.random_range(0..pool.len())).collect()
    };
    chosen
        .into_iter()
        .map(|i| {
            let host = &pool[i];
            let slot = closest_club(host, points);
            let season = host.with_results(slot, results);
            position_histogram(&league_table(&season), slot)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClubReport {
    pub season: String,
    pub club: String,
    pub final_position: usize,
    pub points: Vec<u32>,
    pub truth: Vec<f64>,
    pub empl: QuantileBand,
    pub bootstrap: QuantileBand,
    pub gaussian: QuantileBand,
    pub empl_violations: BandViolations,
    pub gaussian_violations: BandViolations,
    /// Bins where the outermost EMPL and bootstrap ranges intersect.
    pub overlap_bins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FootballReport {
    pub levels: Vec<f64>,
    pub clubs: Vec<ClubReport>,
    pub metrics: MetricTable,
    /// Every augmented season ends with its source season's final table.
    pub augmentation_preserves_tables: bool,
}

impl FootballReport {
    pub fn empl_violations(&self) -> BandViolations {
        let mut total = BandViolations::default();
        self.clubs.iter().for_each(|c| total.add(c.empl_violations));
        total
    }

    pub fn gaussian_violations(&self) -> BandViolations {
        let mut total = BandViolations::default();
        self.clubs.iter().for_each(|c| total.add(c.gaussian_violations));
        total
    }
}

/// Whether every augmented season ends with the final table of the season it
/// was derived from. `augmented` must hold `k` consecutive replays per source
/// season, in source order.
pub fn augmentation_preserves_tables(sources: &[Season], augmented: &[Season]) -> bool {
    if sources.is_empty() || augmented.len() % sources.len() != 0 {
        return false;
    }
    let k = augmented.len() / sources.len();
    sources.iter().enumerate().all(|(s, source)| {
        let expected = league_table(source).pop();
        augmented[s * k..(s + 1) * k]
            .iter()
            .all(|a| league_table(a).pop() == expected)
    })
}

pub fn evaluate_football(
    models: &FootballModels,
    config: &FootballConfig,
    data: &FootballData,
    levels: &[f64],
    rng: &mut dyn RngCore,
) -> Result<FootballReport, ExperimentError> {
    let mut clubs = Vec::new();
    let (lo, hi) = (0, levels.len().saturating_sub(1));
    for season in &data.test {
        let table = league_table(season);
        for c in 0..season.clubs().len() {
            let features = club_features(season.results(c));
            let x = Matrix::from_vec(levels.len(), features.len(), levels.iter().flat_map(|_| features.iter().copied()).collect());
            let predicted = models.empl.predict(&x, levels)?;
            let empl = QuantileBand {
                levels: levels.to_vec(),
                values: predicted.row_iter().map(<[f64]>::to_vec).collect(),
            };
            let (mean, sigma) = gaussian_predict(&models.gaussian, &features)?;
            let gaussian = QuantileBand {
                levels: levels.to_vec(),
                values: levels.iter().map(|&t| gaussian_band(&mean, &sigma, t)).collect(),
            };
            let boot = bootstrap_cumulatives(season.results(c), &data.augmented, config.bootstrap_seasons, rng);
            let bootstrap = EmpiricalQuantiles::from_samples(&boot).band(levels);

            let mut empl_violations = BandViolations::default();
            let mut gaussian_violations = BandViolations::default();
            for (e, g) in empl.values.iter().zip(&gaussian.values) {
                empl_violations.add(BandViolations::of(e));
                gaussian_violations.add(BandViolations::of(g));
            }
            let overlap_bins = if levels.is_empty() {
                0
            } else {
                (0..season.clubs().len())
                    .filter(|&j| {
                        let (a0, a1) = (empl.values[lo][j], empl.values[hi][j]);
                        let (b0, b1) = (bootstrap.values[lo][j], bootstrap.values[hi][j]);
                        a0.max(b0) <= a1.min(b1)
                    })
                    .count()
            };
            clubs.push(ClubReport {
                season: season.id().into(),
                club: season.clubs()[c].clone(),
                final_position: table.last().map_or(0, |w| w[c]),
                points: season.points(c),
                truth: cumsum(&position_histogram(&table, c)).into_inner(),
                empl,
                bootstrap,
                gaussian,
                empl_violations,
                gaussian_violations,
                overlap_bins,
            });
        }
    }
    let (features, labels) = club_dataset(&data.test);
    let labels: Vec<DensityHistogram> = labels
        .row_iter()
        .map(|r| DensityHistogram::new(r.to_vec()))
        .collect::<Result<_, _>>()?;
    let metrics = evaluate_metrics(&models.empl, &features, &labels, 0.5)?;
    Ok(FootballReport {
        levels: levels.to_vec(),
        clubs,
        metrics,
        augmentation_preserves_tables: augmentation_preserves_tables(&data.train, &data.augmented),
    })
}
