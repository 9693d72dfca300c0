use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use empl::formats::read_histograms;

const CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");
const MINI_LEAGUE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/mini_league.csv");

fn empl<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_empl")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// A bundled config with text replacements applied, written into `dir`.
fn shrunk(dir: &Path, name: &str, edits: &[(&str, &str)]) -> PathBuf {
    let text = fs::read_to_string(Path::new(CONFIGS).join(format!("{name}.toml"))).unwrap();
    let text = edits.iter().fold(text, |t, (from, to)| {
        assert!(t.contains(from), "{from} not in {name}");
        t.replace(from, to)
    });
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, text).unwrap();
    path
}

fn small_urn(dir: &Path) -> PathBuf {
    shrunk(dir, "urn_default", &[("iterations = 10000", "iterations = 150"), ("batch_size = 2048", "batch_size = 128")])
}

fn train(config: &Path, out: &Path) -> Output {
    let out = empl(["--config".as_ref(), config.as_os_str(), "--out".as_ref(), out.as_os_str(), "train".as_ref()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    out
}

fn csv_column(text: &str, column: &str) -> Vec<f64> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let i = reader.headers().unwrap().iter().position(|h| h == column).unwrap();
    reader.records().map(|r| r.unwrap()[i].parse().unwrap()).collect()
}

#[test]
fn emd_strategies_at_five_balls() {
    let out = empl(["oracle", "emd-strategies", "--n", "5"]);
    assert_eq!(code(&out), 0);
    let values = csv_column(&stdout(&out), "expected_w1");
    assert!((values[0] - 0.24).abs() < 1e-12);
    assert!((values[1] - 0.32).abs() < 1e-12);
    assert!((values[2] - 4.0 / 3.0).abs() < 1e-12);
    assert!(stdout(&out).contains("6/25") && stdout(&out).contains("8/25"));
}

#[test]
fn even_ball_count_is_a_usage_error() {
    let out = empl(["oracle", "emd-strategies", "--n", "4"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("odd"), "{}", stderr(&out));
}

#[test]
fn urn_oracle_single_draw_and_many_draws() {
    let out = empl(["oracle", "urn", "--n", "5", "--x", "1", "--tau", "0.5"]);
    assert_eq!(csv_column(&stdout(&out), "analytic"), [0.0, 0.0, 1.0, 1.0, 1.0]);
    let out = empl(["oracle", "urn", "--n", "5", "--x", "1000000", "--tau", "0.5"]);
    for (j, q) in csv_column(&stdout(&out), "analytic").into_iter().enumerate() {
        assert!((q - (j + 1) as f64 / 5.0).abs() < 0.002, "bin {}: {q}", j + 1);
    }
    let out = empl(["oracle", "urn", "--n", "5", "--x", "1", "--tau", "1.5"]);
    assert_eq!(code(&out), 2);
    let out = empl(["oracle", "urn", "--n", "0", "--x", "1", "--tau", "0.5"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn urn_oracle_monte_carlo_column() {
    let out = empl(["oracle", "urn", "--n", "5", "--x", "1", "--tau", "0.3", "0.7", "--samples", "2000"]);
    let text = stdout(&out);
    assert_eq!(csv_column(&text, "analytic"), csv_column(&text, "monte_carlo"));
}

#[test]
fn urn_sample_writes_histogram_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = empl(["--out".as_ref(), dir.path().as_os_str(), "oracle".as_ref(), "urn-sample".as_ref(), "--n".as_ref(), "5".as_ref(), "--x".as_ref(), "10".as_ref(), "--count".as_ref(), "7".as_ref()]);
    assert_eq!(code(&out), 0);
    let hs = read_histograms(fs::File::open(dir.path().join("oracle.csv")).unwrap()).unwrap();
    assert_eq!(hs.len(), 7);
    for h in hs {
        assert!(h.iter().all(|v| (v * 10.0 - (v * 10.0).round()).abs() < 1e-12));
    }
}

#[test]
fn zero_alpha_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = shrunk(dir.path(), "football_default", &[("alpha = 0.005", "alpha = 0.0")]);
    let out = empl(["--config".as_ref(), config.as_os_str(), "--out".as_ref(), dir.path().join("run").as_os_str(), "train".as_ref()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("loss.alpha"), "{}", stderr(&out));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn unknown_keys_and_missing_config_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = shrunk(dir.path(), "urn_default", &[("batch_size = 2048", "batch_size = 2048\nbatchsize = 5")]);
    let out = empl(["--config".as_ref(), config.as_os_str(), "--out".as_ref(), dir.path().as_os_str(), "train".as_ref()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("batchsize") && stderr(&out).contains("line"), "{}", stderr(&out));
    assert_eq!(code(&empl(["train"])), 2);
    assert_eq!(code(&empl(["--config", "/nonexistent.toml", "train"])), 2);
}

#[test]
fn train_writes_run_files_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_urn(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    train(&config, &a);
    train(&config, &b);
    for f in ["checkpoint.json", "config.toml", "loss_curve.csv", "metrics.csv", "manifest.json"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    for f in ["checkpoint.json", "loss_curve.csv", "metrics.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 2021);
    assert_eq!(manifest["kind"], "urn");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);

    // A different seed changes the run.
    let c = dir.path().join("c");
    let out = empl(["--seed".as_ref(), "7".as_ref(), "--config".as_ref(), config.as_os_str(), "--out".as_ref(), c.as_os_str(), "train".as_ref()]);
    assert_eq!(code(&out), 0);
    assert_ne!(fs::read(a.join("loss_curve.csv")).unwrap(), fs::read(c.join("loss_curve.csv")).unwrap());
}

#[test]
fn eval_band_table_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    train(&small_urn(dir.path()), &run);
    let checkpoint = run.join("checkpoint.json");
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, "levels = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]\ndraws = [1, 10, 100, 1000]\nmetrics = [\"em1\", \"is\"]\ntest_samples = 500\n").unwrap();
    let eval = |out: &Path| {
        let o = empl(["eval".as_ref(), "--checkpoint".as_ref(), checkpoint.as_os_str(), "--spec".as_ref(), spec.as_os_str(), "--out".as_ref(), out.as_os_str()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    };
    let (e1, e2) = (dir.path().join("e1"), dir.path().join("e2"));
    eval(&e1);
    eval(&e2);
    let bands = fs::read_to_string(e1.join("bands.csv")).unwrap();
    assert_eq!(bands.lines().count(), 1 + 4 * 9 * 5);
    assert!(bands.starts_with("x,tau,bin,predicted,analytic\n"));
    let metrics = fs::read_to_string(e1.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("set,samples,EM1_x100,IS_percent\ntest,500,"), "{metrics}");
    for f in ["bands.csv", "metrics.csv", "report.txt"] {
        assert_eq!(fs::read(e1.join(f)).unwrap(), fs::read(e2.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn eval_on_empty_test_set_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    train(&small_urn(dir.path()), &run);
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, "test_samples = 0\n").unwrap();
    let out = empl(["eval".as_ref(), "--checkpoint".as_ref(), run.join("checkpoint.json").as_os_str(), "--spec".as_ref(), spec.as_os_str()]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("empty"), "{}", stderr(&out));
}

#[test]
fn eval_spec_with_foreign_keys_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    train(&small_urn(dir.path()), &run);
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, "alphas = [0.5]\n").unwrap();
    let out = empl(["eval".as_ref(), "--checkpoint".as_ref(), run.join("checkpoint.json").as_os_str(), "--spec".as_ref(), spec.as_os_str()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn damaged_checkpoints_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let config = small_urn(dir.path());
    train(&config, &run);
    let good = fs::read_to_string(run.join("checkpoint.json")).unwrap();
    let eval = |path: &Path| empl(["eval".as_ref(), "--checkpoint".as_ref(), path.as_os_str(), "--out".as_ref(), dir.path().join("e").as_os_str()]);

    let truncated = dir.path().join("truncated.json");
    fs::write(&truncated, &good[..good.len() / 2]).unwrap();
    assert_eq!(code(&eval(&truncated)), 4);

    let version = dir.path().join("version.json");
    fs::write(&version, good.replacen("\"version\": 1", "\"version\": 2", 1)).unwrap();
    let out = eval(&version);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("version"), "{}", stderr(&out));

    let tampered = dir.path().join("tampered.json");
    fs::write(&tampered, good.replacen("\"seed\": 2021", "\"seed\": 2022", 1)).unwrap();
    assert_eq!(code(&eval(&tampered)), 4);

    assert_eq!(code(&eval(&dir.path().join("missing.json"))), 4);

    // A config other than the one trained.
    let elsewhere = dir.path().join("other");
    fs::create_dir(&elsewhere).unwrap();
    let other = shrunk(&elsewhere, "urn_default", &[("iterations = 10000", "iterations = 151"), ("batch_size = 2048", "batch_size = 128")]);
    let out = empl(["--config".as_ref(), other.as_os_str(), "eval".as_ref(), "--checkpoint".as_ref(), run.join("checkpoint.json").as_os_str(), "--out".as_ref(), dir.path().join("e").as_os_str()]);
    assert_eq!(code(&out), 4);
    let out = empl(["--config".as_ref(), config.as_os_str(), "eval".as_ref(), "--checkpoint".as_ref(), run.join("checkpoint.json").as_os_str(), "--out".as_ref(), dir.path().join("e").as_os_str()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn report_needs_a_finished_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = empl(["report".as_ref(), dir.path().as_os_str()]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("checkpoint.json"), "{}", stderr(&out));
}

fn is_standalone_svg(text: &str) -> bool {
    text.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\"") && text.trim_end().ends_with("</svg>") && !text.contains("href")
}

#[test]
fn urn_report_has_a_plot_per_draw_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    train(&small_urn(dir.path()), &run);
    let out = empl(["report".as_ref(), run.as_os_str()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut svgs: Vec<String> = fs::read_dir(&run)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("urn_bands_"))
        .collect();
    svgs.sort();
    assert_eq!(svgs, ["urn_bands_x1.svg", "urn_bands_x10.svg", "urn_bands_x100.svg", "urn_bands_x1000.svg"]);
    for name in svgs.iter().map(String::as_str).chain(["loss_curve.svg"]) {
        assert!(is_standalone_svg(&fs::read_to_string(run.join(name)).unwrap()), "{name}");
    }
    let report = fs::read_to_string(run.join("report.txt")).unwrap();
    assert!(report.contains("[metrics]\nset,samples,") && report.contains("[bands]\nx,tau,bin"));
}

#[test]
fn bimodal_report_has_calibration_plot() {
    let dir = tempfile::tempdir().unwrap();
    let config = shrunk(
        dir.path(),
        "bimodal_default",
        &[
            ("iterations = 10000", "iterations = 60"),
            ("batch_size = 1024", "batch_size = 64"),
            ("baseline_iterations = 500", "baseline_iterations = 30"),
            ("oracle_samples = 20000", "oracle_samples = 500"),
            ("coverage_samples = 20000", "coverage_samples = 500"),
        ],
    );
    let run = dir.path().join("run");
    train(&config, &run);
    let out = empl(["report".as_ref(), run.as_os_str()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let svg = fs::read_to_string(run.join("bimodal_calibration.svg")).unwrap();
    assert!(is_standalone_svg(&svg));
    assert!(svg.contains("identity"));
    let calibration = fs::read_to_string(run.join("calibration.csv")).unwrap();
    assert_eq!(calibration.lines().count(), 10);
    for f in ["bimodal_cdf.svg", "bimodal_bands_1.svg", "cdf.csv", "calibration_gaussian.csv"] {
        assert!(run.join(f).is_file(), "{f}");
    }
}

fn league_config(dir: &Path, test_seasons: usize) -> PathBuf {
    let text = format!(
        "kind = \"football\"\nseed = 3\n\n[architecture]\nhidden = [8]\ndropout = 0.1\n\n[loss]\nname = \"empl_smoothed\"\nalpha = 0.01\n\n\
         [schedule]\nepochs = 2\nbatch_size = 16\nlog_interval = 5\n\n[data]\nsource = \"csv\"\npath = \"{}\"\ntest_seasons = {test_seasons}\nreplays = 3\nbootstrap_seasons = 3\n",
        MINI_LEAGUE
    );
    let path = dir.join("league.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn football_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    train(&league_config(dir.path(), 1), &run);
    let out = empl(["report".as_ref(), run.as_os_str()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let violations = fs::read_to_string(run.join("violations.csv")).unwrap();
    assert_eq!(violations.lines().count(), 5);
    assert!(violations.contains("2021-22,Brugge,1,0,0,"), "{violations}");
    assert!(run.join("football_2021-22_Ajax.svg").is_file());
    let bands = fs::read_to_string(run.join("bands.csv")).unwrap();
    assert_eq!(bands.lines().count(), 1 + 4 * 9 * 4);
}

#[test]
fn football_without_test_seasons_fails_at_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let config = league_config(dir.path(), 0);
    let out = empl(["--config".as_ref(), config.as_os_str(), "--out".as_ref(), dir.path().join("run").as_os_str(), "train".as_ref()]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}
