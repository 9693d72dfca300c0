//! Command-line parsing and dispatch.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use empl_core::oracles::{
    expected_emd_strategy, expected_emd_strategy_exact, urn_quantiles, urn_sample, EmpiricalQuantiles, Strategy,
    UrnSpec,
};

use crate::checkpoint::Checkpoint;
use crate::config::{EvalConfig, ExperimentConfig};
use crate::error::CliError;
use crate::formats::{write_histograms, Table};
use crate::run::{self, CHECKPOINT_FILE, LOSS_CURVE_FILE};

#[derive(Debug, Parser)]
#[command(name = "empl", version, about = "Histogram quantile regression experiments")]
pub struct Cli {
    /// Seed overriding the one in the config.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    pub seed: Option<u64>,
    /// Output directory (for `oracle`, write oracle.csv there instead of stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Experiment config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the models described by `--config`.
    Train,
    /// Evaluate a checkpoint and write metric and band tables.
    Eval(EvalArgs),
    /// Run an analytic or Monte Carlo oracle.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Evaluate a finished run and write tables and SVG figures.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Eval settings overriding the `[eval]` section stored in the checkpoint.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `train`.
    pub run: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Cumulative quantiles of the urn histogram, per bin.
    Urn {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        x: u64,
        #[arg(long, num_args = 1.., required = true)]
        tau: Vec<f64>,
        /// Also estimate each quantile from this many sampled histograms.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Expected W1 of the median and mean strategies for one draw.
    EmdStrategies {
        #[arg(long)]
        n: u32,
    },
    /// Sampled urn histograms as histogram CSV.
    UrnSample {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        x: u64,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
}

const DEFAULT_ORACLE_SEED: u64 = 0;

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train => train(cli.config.as_deref(), cli.seed, cli.out.as_deref()),
        Command::Eval(args) => eval(&args, cli.config.as_deref(), cli.seed, cli.out.as_deref()),
        Command::Oracle(cmd) => oracle(&cmd, cli.seed.unwrap_or(DEFAULT_ORACLE_SEED), cli.out.as_deref()),
        Command::Report(args) => report(&args.run, cli.seed, cli.out.as_deref()),
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let path = path.ok_or_else(|| CliError::Usage("`--config` is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn train(config: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let config = load_config(config, seed)?;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| config.out.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass `--out` or set `out` in the config".into()))?;
    let trained = run::train_to_dir(&config, &out)?;
    println!("{}", out.join(CHECKPOINT_FILE).display());
    for (name, curve) in &trained.curves {
        if let Some((it, loss)) = curve.points.last() {
            eprintln!("{name}: loss {loss:.6} at iteration {it}");
        }
    }
    Ok(())
}

fn eval(args: &EvalArgs, config: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    if let Some(path) = config {
        checkpoint.check_config(&ExperimentConfig::load(path)?)?;
    }
    let spec = args.spec.as_deref().map(EvalConfig::load).transpose()?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| {
        args.checkpoint.parent().map(Path::to_path_buf).unwrap_or_default()
    });
    let output = run::evaluate_checkpoint(&checkpoint, spec.as_ref(), seed)?;
    for path in output.write_tables(&out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn report(dir: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    run::check_run_dir(dir)?;
    let checkpoint = Checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
    let out = out.unwrap_or(dir);
    let output = run::evaluate_checkpoint(&checkpoint, None, seed)?;
    let mut written = output.write_tables(out)?;
    written.extend(output.write_figures(out)?);
    let curve_path = dir.join(LOSS_CURVE_FILE);
    let curve_csv = fs::read_to_string(&curve_path).map_err(CliError::io(&curve_path))?;
    let svg_path = out.join("loss_curve.svg");
    fs::write(&svg_path, run::loss_curve_figure(&curve_csv)?).map_err(CliError::io(&svg_path))?;
    written.push(svg_path);
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn oracle(cmd: &OracleCommand, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let csv = match cmd {
        OracleCommand::Urn { n, x, tau, samples } => {
            if let Some(t) = tau.iter().find(|t| !(0.0..=1.0).contains(*t)) {
                return Err(CliError::Usage(format!("--tau {t} is outside [0, 1]")));
            }
            let spec = UrnSpec::new(*n, *x)?;
            let mut header = vec!["bin", "tau", "analytic"];
            let empirical = match samples {
                Some(0) => return Err(CliError::Usage("--samples must be positive".into())),
                Some(count) => {
                    header.push("monte_carlo");
                    let mut rng = run::rng_stream(seed, run::EVAL_STREAM);
                    let drawn: Vec<_> = (0..*count).map(|_| urn_sample(spec, &mut rng)).collect();
                    Some(EmpiricalQuantiles::from_samples(&drawn))
                }
                None => None,
            };
            let mut table = Table::new(&header);
            for j in 1..=*n {
                let analytic = urn_quantiles(spec, j, tau)?;
                for (t, a) in tau.iter().zip(analytic) {
                    let mut row = vec![j.to_string(), t.to_string(), a.to_string()];
                    if let Some(e) = &empirical {
                        row.push(e.quantile(j as usize - 1, *t).to_string());
                    }
                    table.push(row);
                }
            }
            table.to_csv()
        }
        OracleCommand::EmdStrategies { n } => {
            let mut table = Table::new(&["strategy", "expected_w1", "exact"]);
            for (name, strategy) in [("median", Strategy::Median), ("mean", Strategy::Mean)] {
                let exact = expected_emd_strategy_exact(strategy, *n)?;
                let value = expected_emd_strategy(strategy, *n)?;
                table.push(vec![name.into(), value.to_string(), format!("{}/{}", exact.numer, exact.denom)]);
            }
            let median = expected_emd_strategy_exact(Strategy::Median, *n)?;
            let mean = expected_emd_strategy_exact(Strategy::Mean, *n)?;
            let ratio = if median.numer == 0 {
                f64::NAN
            } else {
                (mean.numer * median.denom) as f64 / (mean.denom * median.numer) as f64
            };
            table.push(vec!["ratio".into(), ratio.to_string(), String::new()]);
            table.to_csv()
        }
        OracleCommand::UrnSample { n, x, count } => {
            let spec = UrnSpec::new(*n, *x)?;
            let mut rng = run::rng_stream(seed, run::DATA_STREAM);
            let drawn: Vec<_> = (0..*count).map(|_| urn_sample(spec, &mut rng)).collect();
            let mut buf = Vec::new();
            write_histograms(&mut buf, &drawn, true)?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
    };
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(CliError::io(dir))?;
            let path = dir.join("oracle.csv");
            fs::write(&path, csv).map_err(CliError::io(&path))?;
            println!("{}", path.display());
        }
        None => {
            let _ = std::io::stdout().lock().write_all(csv.as_bytes());
        }
    }
    Ok(())
}
