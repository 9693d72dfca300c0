//! Training, evaluation and report generation for one experiment run.
//!
//! Every random draw comes from a ChaCha8 stream derived from the run seed:
//! data preparation, training, evaluation and the metric test sets each get
//! their own stream, so re-evaluating a checkpoint never depends on how much
//! randomness training used.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use empl_core::experiments::bimodal::{evaluate_bimodal, train_bimodal, BimodalData, BimodalModels, BimodalReport};
use empl_core::experiments::football::{
    club_dataset, evaluate_football, prepare_football, train_football, FootballConfig, FootballData, FootballModels,
    FootballReport, FootballSource,
};
use empl_core::experiments::metrics::{evaluate_metrics, MetricTable};
use empl_core::experiments::urn::{evaluate_urn, train_urn, UrnConfig, UrnData, UrnEval, UrnReport};
use empl_core::experiments::ExperimentError;
use empl_core::histogram::DensityHistogram;
use empl_core::matrix::Matrix;
use empl_core::nn::{DataSource, LossCurve, Network};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::{ConfigError, EvalConfig, ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::formats::{calibration_table, loss_curve_table, metrics_table, read_football_csv, Table};
use crate::svg::{ramp, Plot, Series, Stroke};

pub const DATA_STREAM: u64 = 1;
pub const TRAIN_STREAM: u64 = 2;
pub const EVAL_STREAM: u64 = 3;
pub const METRICS_STREAM: u64 = 4;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const LOSS_CURVE_FILE: &str = "loss_curve.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.txt";

pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(CliError::io(path))
}

/// Football settings with a CSV source loaded and split.
pub fn football_config(config: &ExperimentConfig) -> Result<FootballConfig, CliError> {
    let mut fc = config.football();
    if fc.source.is_none() {
        let path = config.data.path.as_ref().ok_or_else(|| ConfigError::Invalid {
            field: "data.path".into(),
            message: "required when data.source = \"csv\"".into(),
        })?;
        let file = fs::File::open(path).map_err(CliError::io(path))?;
        let mut seasons = read_football_csv(file)?;
        let test = match &config.data.test_season_ids {
            Some(ids) => {
                if let Some(id) = ids.iter().find(|id| !seasons.iter().any(|s| s.id() == id.as_str())) {
                    return Err(ConfigError::Invalid {
                        field: "data.test_season_ids".into(),
                        message: format!("season `{id}` is not in {}", path.display()),
                    }
                    .into());
                }
                let (test, train): (Vec<_>, Vec<_>) = seasons.into_iter().partition(|s| ids.iter().any(|id| id == s.id()));
                seasons = train;
                test
            }
            None => {
                let keep = seasons.len().saturating_sub(fc.test_seasons);
                seasons.split_off(keep)
            }
        };
        fc.source = Some(FootballSource::Seasons { train: seasons, test });
    }
    Ok(fc)
}

fn prepare_football_data(config: &ExperimentConfig) -> Result<(FootballConfig, FootballData), CliError> {
    let fc = football_config(config)?;
    let data = prepare_football(&fc, &mut rng_stream(config.seed, DATA_STREAM))?;
    Ok((fc, data))
}

fn to_histograms(labels: &Matrix) -> Result<Vec<DensityHistogram>, ExperimentError> {
    labels
        .row_iter()
        .map(|r| DensityHistogram::new(r.to_vec()).map_err(ExperimentError::from))
        .collect()
}

fn urn_metrics(net: &Network, uc: &UrnConfig, samples: usize, tau: f64, seed: u64) -> Result<MetricTable, ExperimentError> {
    let batch = UrnData { config: uc }.next_batch(samples, &mut rng_stream(seed, METRICS_STREAM));
    evaluate_metrics(net, &batch.features, &to_histograms(&batch.labels)?, tau)
}

fn bimodal_metrics(net: &Network, samples: usize, tau: f64, seed: u64) -> Result<MetricTable, ExperimentError> {
    let batch = BimodalData.next_batch(samples, &mut rng_stream(seed, METRICS_STREAM));
    evaluate_metrics(net, &batch.features, &to_histograms(&batch.labels)?, tau)
}

fn football_metrics(net: &Network, data: &FootballData, tau: f64) -> Result<MetricTable, ExperimentError> {
    let (features, labels) = club_dataset(&data.test);
    evaluate_metrics(net, &features, &to_histograms(&labels)?, tau)
}

const DEFAULT_TEST_SAMPLES: usize = 4096;

/// A freshly trained run, not yet written anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRun {
    pub checkpoint: Checkpoint,
    pub curves: Vec<(String, LossCurve)>,
    pub metrics: Vec<(String, MetricTable)>,
}

pub fn train_run(config: &ExperimentConfig) -> Result<TrainedRun, CliError> {
    let mut rng = rng_stream(config.seed, TRAIN_STREAM);
    let tau = config.metrics_tau();
    let samples = config.eval.test_samples.unwrap_or(DEFAULT_TEST_SAMPLES);
    let mut networks = BTreeMap::new();
    let (curves, metrics) = match config.kind {
        ExperimentKind::Urn => {
            let uc = config.urn();
            let (net, curve) = train_urn(&uc, &mut rng)?;
            let metrics = urn_metrics(&net, &uc, samples, tau, config.seed)?;
            networks.insert("empl".to_string(), net);
            (vec![("empl".to_string(), curve)], vec![("test".to_string(), metrics)])
        }
        ExperimentKind::Bimodal => {
            let models = train_bimodal(&config.bimodal(), &mut rng)?;
            let metrics = bimodal_metrics(&models.empl, samples, tau, config.seed)?;
            networks.insert("empl".to_string(), models.empl);
            networks.insert("gaussian".to_string(), models.gaussian);
            (
                vec![("empl".to_string(), models.empl_curve), ("gaussian".to_string(), models.gaussian_curve)],
                vec![("test".to_string(), metrics)],
            )
        }
        ExperimentKind::Football => {
            let (fc, data) = prepare_football_data(config)?;
            let models = train_football(&fc, &data, &mut rng)?;
            let metrics = football_metrics(&models.empl, &data, tau)?;
            networks.insert("empl".to_string(), models.empl);
            networks.insert("gaussian".to_string(), models.gaussian);
            (
                vec![("empl".to_string(), models.empl_curve), ("gaussian".to_string(), models.gaussian_curve)],
                vec![("test".to_string(), metrics)],
            )
        }
    };
    Ok(TrainedRun {
        checkpoint: Checkpoint::new(config, networks),
        curves,
        metrics,
    })
}

fn curve_refs(curves: &[(String, LossCurve)]) -> Vec<(&str, &LossCurve)> {
    curves.iter().map(|(n, c)| (n.as_str(), c)).collect()
}

fn metric_refs(metrics: &[(String, MetricTable)]) -> Vec<(&str, &MetricTable)> {
    metrics.iter().map(|(n, m)| (n.as_str(), m)).collect()
}

/// Trains and writes the config, checkpoint, loss curve, metric table and
/// manifest into `out`.
pub fn train_to_dir(config: &ExperimentConfig, out: &Path) -> Result<TrainedRun, CliError> {
    let started = Instant::now();
    let run = train_run(config)?;
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    let mut effective = config.clone();
    effective.out = Some(out.to_path_buf());
    write_file(&out.join(CONFIG_FILE), effective.to_toml())?;
    write_file(&out.join(CHECKPOINT_FILE), run.checkpoint.to_json())?;
    write_file(&out.join(LOSS_CURVE_FILE), loss_curve_table(&curve_refs(&run.curves)).to_csv())?;
    let columns = config.eval.metric_columns();
    write_file(&out.join(METRICS_FILE), metrics_table(&metric_refs(&run.metrics), &columns).to_csv())?;
    let manifest = serde_json::json!({
        "kind": config.kind.name(),
        "seed": config.seed,
        "config_hash": run.checkpoint.config_hash,
        "checkpoint_version": run.checkpoint.version,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "files": [CONFIG_FILE, CHECKPOINT_FILE, LOSS_CURVE_FILE, METRICS_FILE],
    });
    write_file(
        &out.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )?;
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    Urn { eval: UrnEval, report: UrnReport },
    Bimodal(BimodalReport),
    Football(FootballReport),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutput {
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub seed: u64,
    pub metrics: Vec<(String, MetricTable)>,
    pub columns: Vec<usize>,
    pub evaluation: Evaluation,
}

/// Evaluates a checkpoint. `spec` overrides the eval settings stored with
/// the checkpoint's config.
pub fn evaluate_checkpoint(checkpoint: &Checkpoint, spec: Option<&EvalConfig>, seed: Option<u64>) -> Result<EvalOutput, CliError> {
    let mut config = checkpoint.config.clone();
    if let Some(spec) = spec {
        spec.validate(config.kind)?;
        config.eval = spec.overlay(&config.eval);
    }
    let seed = seed.unwrap_or(config.seed);
    let mut rng = rng_stream(seed, EVAL_STREAM);
    let tau = config.metrics_tau();
    let samples = config.eval.test_samples.unwrap_or(DEFAULT_TEST_SAMPLES);
    let empl = checkpoint.network("empl")?;
    let (metrics, evaluation) = match config.kind {
        ExperimentKind::Urn => {
            let uc = config.urn();
            let eval = UrnEval {
                test_samples: samples,
                ..config.urn_eval()
            };
            let test = urn_metrics(empl, &uc, samples, tau, seed)?;
            let report = evaluate_urn(empl, &uc, &eval, &mut rng)?;
            let metrics = vec![
                ("test".to_string(), test),
                ("large_x".to_string(), report.large_x_metrics),
                ("large_x_uniform".to_string(), report.large_x_uniform),
            ];
            (metrics, Evaluation::Urn { eval, report })
        }
        ExperimentKind::Bimodal => {
            let models = BimodalModels {
                empl: empl.clone(),
                empl_curve: LossCurve::default(),
                gaussian: checkpoint.network("gaussian")?.clone(),
                gaussian_curve: LossCurve::default(),
            };
            let test = bimodal_metrics(empl, samples, tau, seed)?;
            let report = evaluate_bimodal(&models, &config.bimodal_eval(), &mut rng)?;
            (vec![("test".to_string(), test)], Evaluation::Bimodal(report))
        }
        ExperimentKind::Football => {
            let (fc, data) = prepare_football_data(&config)?;
            let models = FootballModels {
                empl: empl.clone(),
                empl_curve: LossCurve::default(),
                gaussian: checkpoint.network("gaussian")?.clone(),
                gaussian_curve: LossCurve::default(),
            };
            let test = football_metrics(empl, &data, tau)?;
            let report = evaluate_football(&models, &fc, &data, &config.levels(), &mut rng)?;
            (vec![("test".to_string(), test)], Evaluation::Football(report))
        }
    };
    Ok(EvalOutput {
        kind: config.kind,
        config_hash: checkpoint.config_hash.clone(),
        seed,
        metrics,
        columns: config.eval.metric_columns(),
        evaluation,
    })
}

fn urn_band_table(report: &UrnReport) -> Table {
    let mut table = Table::new(&["x", "tau", "bin", "predicted", "analytic"]);
    for row in &report.bands {
        for (j, (p, a)) in row.predicted.iter().zip(&row.analytic).enumerate() {
            table.push(vec![row.draws.to_string(), row.tau.to_string(), (j + 1).to_string(), p.to_string(), a.to_string()]);
        }
    }
    table
}

fn bimodal_band_table(report: &BimodalReport) -> Table {
    let mut table = Table::new(&["panel", "b1", "b2", "xi", "tau", "bin", "truth", "empl", "gaussian"]);
    for (i, panel) in report.panels.iter().enumerate() {
        let input = panel.input;
        for (k, tau) in panel.truth.levels.iter().enumerate() {
            for j in 0..panel.truth.values[k].len() {
                table.push(vec![
                    (i + 1).to_string(),
                    input.b1.to_string(),
                    input.b2.to_string(),
                    input.xi.to_string(),
                    tau.to_string(),
                    (j + 1).to_string(),
                    panel.truth.values[k][j].to_string(),
                    panel.empl.values[k][j].to_string(),
                    panel.gaussian.values[k][j].to_string(),
                ]);
            }
        }
    }
    table
}

fn cdf_table(report: &BimodalReport) -> Table {
    let cdf = &report.cdf;
    let mut table = Table::new(&["tau", "truth", "empl", "gaussian"]);
    for (k, tau) in cdf.levels.iter().enumerate() {
        table.push(vec![tau.to_string(), cdf.truth[k].to_string(), cdf.empl[k].to_string(), cdf.gaussian[k].to_string()]);
    }
    table
}

fn football_band_table(report: &FootballReport) -> Table {
    let mut table = Table::new(&["season", "club", "tau", "bin", "truth", "empl", "bootstrap", "gaussian"]);
    for club in &report.clubs {
        for (k, tau) in report.levels.iter().enumerate() {
            for j in 0..club.truth.len() {
                table.push(vec![
                    club.season.clone(),
                    club.club.clone(),
                    tau.to_string(),
                    (j + 1).to_string(),
                    club.truth[j].to_string(),
                    club.empl.values[k][j].to_string(),
                    club.bootstrap.values[k][j].to_string(),
                    club.gaussian.values[k][j].to_string(),
                ]);
            }
        }
    }
    table
}

fn violations_table(report: &FootballReport) -> Table {
    let mut table = Table::new(&[
        "season",
        "club",
        "final_position",
        "empl_out_of_range",
        "empl_non_monotone",
        "gaussian_out_of_range",
        "gaussian_non_monotone",
        "overlap_bins",
    ]);
    for c in &report.clubs {
        table.push(vec![
            c.season.clone(),
            c.club.clone(),
            c.final_position.to_string(),
            c.empl_violations.out_of_range.to_string(),
            c.empl_violations.non_monotone.to_string(),
            c.gaussian_violations.out_of_range.to_string(),
            c.gaussian_violations.non_monotone.to_string(),
            c.overlap_bins.to_string(),
        ]);
    }
    table
}

impl EvalOutput {
    /// CSV tables by file name.
    pub fn tables(&self) -> Vec<(String, Table)> {
        let mut out = vec![(METRICS_FILE.to_string(), metrics_table(&metric_refs(&self.metrics), &self.columns))];
        match &self.evaluation {
            Evaluation::Urn { report, .. } => out.push(("bands.csv".into(), urn_band_table(report))),
            Evaluation::Bimodal(report) => {
                out.push(("bands.csv".into(), bimodal_band_table(report)));
                out.push(("cdf.csv".into(), cdf_table(report)));
                out.push(("calibration.csv".into(), calibration_table(&report.alphas, &report.empl_coverage)));
                out.push((
                    "calibration_gaussian.csv".into(),
                    calibration_table(&report.alphas, &report.gaussian_coverage),
                ));
            }
            Evaluation::Football(report) => {
                out.push(("bands.csv".into(), football_band_table(report)));
                out.push(("violations.csv".into(), violations_table(report)));
            }
        }
        out
    }

    /// Plain-text report: summary lines, then every table as a CSV block.
    pub fn report_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kind = {}", self.kind.name());
        let _ = writeln!(s, "config_hash = {}", self.config_hash);
        let _ = writeln!(s, "eval_seed = {}", self.seed);
        match &self.evaluation {
            Evaluation::Urn { report, .. } => {
                let _ = writeln!(s, "max_band_deviation = {}", report.max_deviation);
                let _ = writeln!(s, "mean_band_deviation = {}", report.mean_deviation);
                let t = &report.theorem;
                let _ = writeln!(s, "perturbation_trials = {}", t.trials);
                let _ = writeln!(s, "unperturbed_best = {}", t.unperturbed_best);
                let _ = writeln!(s, "unperturbed_loss = {}", t.unperturbed_loss);
                let _ = writeln!(s, "mean_perturbed_loss = {}", t.mean_perturbed_loss);
            }
            Evaluation::Bimodal(report) => {
                let _ = writeln!(s, "empl_max_calibration_error = {}", report.empl_max_deviation());
                let _ = writeln!(s, "gaussian_max_calibration_error = {}", report.gaussian_max_deviation());
            }
            Evaluation::Football(report) => {
                let e = report.empl_violations();
                let g = report.gaussian_violations();
                let _ = writeln!(s, "test_clubs = {}", report.clubs.len());
                let _ = writeln!(s, "empl_out_of_range = {}", e.out_of_range);
                let _ = writeln!(s, "empl_non_monotone = {}", e.non_monotone);
                let _ = writeln!(s, "gaussian_out_of_range = {}", g.out_of_range);
                let _ = writeln!(s, "gaussian_non_monotone = {}", g.non_monotone);
                let _ = writeln!(s, "augmentation_preserves_tables = {}", report.augmentation_preserves_tables);
            }
        }
        for (name, table) in self.tables() {
            let _ = writeln!(s, "\n[{}]", name.trim_end_matches(".csv"));
            s.push_str(&table.to_csv());
        }
        s
    }

    pub fn write_tables(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        let mut written = Vec::new();
        for (name, table) in self.tables() {
            let path = dir.join(name);
            write_file(&path, table.to_csv())?;
            written.push(path);
        }
        let path = dir.join(REPORT_FILE);
        write_file(&path, self.report_text())?;
        written.push(path);
        Ok(written)
    }

    /// SVG figures by file name.
    pub fn figures(&self) -> Vec<(String, String)> {
        match &self.evaluation {
            Evaluation::Urn { eval, report } => urn_figures(eval, report),
            Evaluation::Bimodal(report) => bimodal_figures(report),
            Evaluation::Football(report) => football_figures(report),
        }
    }

    pub fn write_figures(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        let mut written = Vec::new();
        for (name, svg) in self.figures() {
            let path = dir.join(name);
            write_file(&path, svg)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn bin_points(values: &[f64]) -> Vec<(f64, f64)> {
    values.iter().enumerate().map(|(j, &v)| ((j + 1) as f64, v)).collect()
}

fn level_position(levels: &[f64], k: usize) -> f64 {
    if levels.len() < 2 {
        0.5
    } else {
        k as f64 / (levels.len() - 1) as f64
    }
}

fn urn_figures(eval: &UrnEval, report: &UrnReport) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for &x in &eval.draws {
        let rows: Vec<_> = report.bands.iter().filter(|r| r.draws == x).collect();
        let bins = rows.first().map_or(1, |r| r.predicted.len());
        let mut plot = Plot::new(&format!("urn, x = {x}"), "bin", "cumulative histogram", (1.0, bins as f64), (0.0, 1.0));
        for (k, row) in rows.iter().enumerate() {
            let color = ramp(level_position(&eval.levels, k));
            let label = format!("tau = {}", row.tau);
            plot.push(Series::new(&color, Stroke::Solid, bin_points(&row.predicted)).labelled(label));
            plot.push(Series::new(&color, Stroke::Dashed, bin_points(&row.analytic)));
        }
        out.push((format!("urn_bands_x{x}.svg"), plot.render()));
    }
    out
}

fn bimodal_figures(report: &BimodalReport) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (i, panel) in report.panels.iter().enumerate() {
        let input = panel.input;
        let mut plot = Plot::new(
            &format!("bimodal, X = ({}, {}, {})", input.b1, input.b2, input.xi),
            "bin",
            "cumulative histogram",
            (1.0, panel.truth.bins().max(1) as f64),
            (0.0, 1.0),
        );
        for (k, tau) in panel.truth.levels.iter().enumerate() {
            let color = ramp(level_position(&panel.truth.levels, k));
            plot.push(Series::new(&color, Stroke::Solid, bin_points(&panel.empl.values[k])).labelled(format!("tau = {tau}")));
            plot.push(Series::new(&color, Stroke::Dashed, bin_points(&panel.truth.values[k])));
        }
        out.push((format!("bimodal_bands_{}.svg", i + 1), plot.render()));
    }

    let cdf = &report.cdf;
    let along = |values: &[f64]| cdf.levels.iter().copied().zip(values.iter().copied()).collect::<Vec<_>>();
    let mut plot = Plot::new(&format!("quantiles of bin {}", cdf.bin), "tau", "cumulative value", (0.0, 1.0), (0.0, 1.0));
    plot.push(Series::new("black", Stroke::Dashed, along(&cdf.truth)).labelled("Monte Carlo"));
    plot.push(Series::new("#1f5fbf", Stroke::Solid, along(&cdf.empl)).labelled("EMPL"));
    plot.push(Series::new("#c0392b", Stroke::Dotted, along(&cdf.gaussian)).labelled("Gaussian"));
    out.push(("bimodal_cdf.svg".into(), plot.render()));

    let along = |values: &[f64]| report.alphas.iter().copied().zip(values.iter().copied()).collect::<Vec<_>>();
    let mut plot = Plot::new("calibration", "alpha", "coverage", (0.0, 1.0), (0.0, 1.0));
    plot.push(Series::new("#888888", Stroke::Dashed, vec![(0.0, 0.0), (1.0, 1.0)]).labelled("identity"));
    plot.push(Series::new("#1f5fbf", Stroke::Solid, along(&report.empl_coverage)).labelled("EMPL"));
    plot.push(Series::new("#c0392b", Stroke::Solid, along(&report.gaussian_coverage)).labelled("Gaussian"));
    out.push(("bimodal_calibration.svg".into(), plot.render()));
    out
}

fn file_stem(text: &str) -> String {
    text.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn football_figures(report: &FootballReport) -> Vec<(String, String)> {
    let levels = &report.levels;
    let outer = [0, levels.len().saturating_sub(1)];
    let mut out = Vec::new();
    for club in &report.clubs {
        let bins = club.truth.len();
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for band in &club.gaussian.values {
            for &v in band.iter().filter(|v| v.is_finite()) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let mut plot = Plot::new(
            &format!("{} {} (final position {})", club.season, club.club, club.final_position),
            "table position",
            "cumulative histogram",
            (1.0, bins as f64),
            (lo.max(-0.5), hi.min(1.5)),
        );
        for (k, tau) in levels.iter().enumerate() {
            let color = ramp(level_position(levels, k));
            plot.push(Series::new(&color, Stroke::Solid, bin_points(&club.empl.values[k])).labelled(format!("EMPL {tau}")));
        }
        for (i, &k) in outer.iter().enumerate() {
            if k < levels.len() {
                let boot = Series::new("black", Stroke::Dashed, bin_points(&club.bootstrap.values[k]));
                let gauss = Series::new("#c0392b", Stroke::Dotted, bin_points(&club.gaussian.values[k]));
                if i == 0 {
                    plot.push(boot.labelled("bootstrap"));
                    plot.push(gauss.labelled("Gaussian"));
                } else {
                    plot.push(boot);
                    plot.push(gauss);
                }
            }
        }
        plot.push(Series::new("black", Stroke::Points, bin_points(&club.truth)).labelled("season"));
        out.push((format!("football_{}_{}.svg", file_stem(&club.season), file_stem(&club.club)), plot.render()));
    }
    out
}

/// Loss curves read back from a run's CSV, as one SVG.
pub fn loss_curve_figure(csv_text: &str) -> Result<String, CliError> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let mut curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(crate::formats::FormatError::from)?;
        let bad = || crate::formats::FormatError::Row {
            line: record.position().map_or(0, |p| p.line()),
            message: "expected model,iteration,loss".into(),
        };
        let model = record.get(0).ok_or_else(bad)?.to_string();
        let it: f64 = record.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let loss: f64 = record.get(2).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        curves.entry(model).or_default().push((it, loss));
    }
    let points = curves.values().flatten();
    let x_max = points.clone().map(|p| p.0).fold(1.0, f64::max);
    let (y_min, y_max) = points.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (y_min, y_max) = if y_min.is_finite() && y_max > y_min { (y_min, y_max) } else { (0.0, 1.0) };
    let mut plot = Plot::new("training loss", "iteration", "mean batch loss", (0.0, x_max), (y_min, y_max));
    let colors = ["#1f5fbf", "#c0392b", "#27ae60"];
    for (i, (name, pts)) in curves.into_iter().enumerate() {
        plot.push(Series::new(colors[i % colors.len()], Stroke::Solid, pts).labelled(name));
    }
    Ok(plot.render())
}

/// Files that must exist before a run directory can be reported on.
pub const RUN_FILES: [&str; 4] = [CHECKPOINT_FILE, CONFIG_FILE, LOSS_CURVE_FILE, MANIFEST_FILE];

pub fn check_run_dir(dir: &Path) -> Result<(), CliError> {
    let missing: Vec<&str> = RUN_FILES.iter().copied().filter(|f| !dir.join(f).is_file()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::IncompleteRun {
            dir: dir.to_path_buf(),
            missing: missing.join(", "),
        })
    }
}
