use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use frostcast::eval::{
    fit_method, load_model, read_reports, render_comparison, rmse, run_ablation, run_experiment,
    save_model, write_reports, ComparisonTable, EvalReport, RunResult, TableFormat,
};
use frostcast::nn::{LossKind, OptimizerKind};
use frostcast::synthgen::{generate_station, write_station_csv, ClimateConfig};
use frostcast::timeseries::{
    build_pairs, parse_station_csv, split_train_test, StationSeries, SupervisedPair,
};
use frostcast::{Error, Method, MethodConfig, TrainedModel};

/// Next-day minimum temperature forecasting experiments.
#[derive(Parser)]
#[command(name = "frostcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic station file.
    Generate {
        #[arg(long)]
        days: usize,
        /// Overrides the config file's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// key = value climate parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra key=value overrides applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = "synthetic")]
        station: String,
    },
    /// Fit one model on the train split of a station file and save it.
    Train {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Score a saved model on a station file's train and test splits.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
    },
    /// Multi-seed train/evaluate runs of one method.
    Experiment {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long)]
        report: PathBuf,
        /// Run r uses seed + r.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Difference table of average test RMSE against the empirical baseline.
    Compare {
        #[arg(long)]
        empirical: PathBuf,
        #[arg(long = "method", num_args = 1.., value_name = "REPORT")]
        methods: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated station order; unlisted stations follow alphabetically.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
    },
    /// Train with MSE and with the min-gap loss on paired seeds.
    AblateLoss {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[command(flatten)]
        model: ModelArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

impl From<Format> for TableFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => TableFormat::Csv,
            Format::Md => TableFormat::Markdown,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Optim {
    Adam,
    Sgd,
}

/// Hyperparameter overrides; unset flags keep the defaults.
#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_enum)]
    optimizer: Option<Optim>,
    #[arg(long)]
    grad_clip: Option<f64>,
    #[arg(long)]
    no_grad_clip: bool,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    kernel_size: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    dilations: Option<Vec<usize>>,
    #[arg(long)]
    n_estimators: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Tree learning rate.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    colsample: Option<f64>,
    #[arg(long)]
    rate_drop: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    min_child_weight: Option<f64>,
    #[arg(long)]
    afternoon_interval: Option<usize>,
}

impl ModelArgs {
    fn config(&self) -> MethodConfig {
        let mut c = MethodConfig::default();
        let t = &mut c.train;
        if let Some(v) = self.loss {
            t.loss = v;
        }
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.lr {
            t.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        match self.optimizer {
            Some(Optim::Adam) => t.optimizer = OptimizerKind::ADAM,
            Some(Optim::Sgd) => t.optimizer = OptimizerKind::Sgd,
            None => {}
        }
        if let Some(v) = self.grad_clip {
            t.grad_clip = Some(v);
        }
        if self.no_grad_clip {
            t.grad_clip = None;
        }
        if let Some(v) = self.hidden_dim {
            c.gru.hidden_dim = v;
        }
        if let Some(v) = self.channels {
            c.tcn.channels = v;
        }
        if let Some(v) = self.kernel_size {
            c.tcn.kernel_size = v;
        }
        if let Some(v) = &self.dilations {
            c.tcn.dilations = v.clone();
        }
        let g = &mut c.gbt;
        if let Some(v) = self.n_estimators {
            g.n_estimators = v;
        }
        if let Some(v) = self.max_depth {
            g.max_depth = v;
        }
        if let Some(v) = self.eta {
            g.learning_rate = v;
        }
        if let Some(v) = self.colsample {
            g.colsample_bytree = v;
        }
        if let Some(v) = self.rate_drop {
            g.rate_drop = v;
        }
        if let Some(v) = self.lambda {
            g.lambda = v;
        }
        if let Some(v) = self.gamma {
            g.gamma = v;
        }
        if let Some(v) = self.min_child_weight {
            g.min_child_weight = v;
        }
        if let Some(v) = self.afternoon_interval {
            c.afternoon_interval = v;
        }
        c
    }
}

type CliResult = Result<(), Error>;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

fn read_station(path: &Path) -> Result<StationSeries, Error> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    parse_station_csv(BufReader::new(file))
}

fn load_reports(path: &Path) -> Result<Vec<EvalReport>, Error> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_reports(BufReader::new(file))
}

fn save_reports(path: &Path, reports: &[EvalReport]) -> CliResult {
    let mut out = create(path)?;
    write_reports(reports, &mut out)?;
    out.flush()?;
    Ok(())
}

fn split(
    series: &StationSeries,
    test_fraction: f64,
) -> Result<(Vec<SupervisedPair>, Vec<SupervisedPair>), Error> {
    let pairs = build_pairs(series)?;
    split_train_test(&pairs, test_fraction)
}

fn model_rmse(model: &TrainedModel, pairs: &[SupervisedPair]) -> Result<f64, Error> {
    let pred: Vec<f64> = pairs.iter().map(|p| model.predict_min(&p.input)).collect();
    let truth: Vec<f64> = pairs.iter().map(|p| p.target_min).collect();
    rmse(&pred, &truth)
}

fn summary(r: &EvalReport) {
    println!(
        "{} {}: runs {}, avg test RMSE {:.4}, best test RMSE {:.4}",
        r.station_id, r.method, r.n_runs, r.avg_test_rmse, r.best_test_rmse
    );
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Generate {
            days,
            seed,
            out,
            config,
            overrides,
            station,
        } => {
            let mut climate = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
                    ClimateConfig::parse(&text)?
                }
                None => ClimateConfig::default(),
            };
            for kv in &overrides {
                let (k, v) = kv.split_once('=').ok_or_else(|| {
                    Error::InvalidConfig(format!("expected key=value, got {kv:?}"))
                })?;
                climate.set(k.trim(), v.trim())?;
            }
            if let Some(s) = seed {
                climate.seed = s;
            }
            let series = generate_station(&climate, days, &station)?;
            let mut sink = create(&out)?;
            write_station_csv(&series, &mut sink)?;
            sink.flush()?;
        }
        Command::Train {
            method,
            data,
            out,
            seed,
            test_fraction,
            model,
        } => {
            let series = read_station(&data)?;
            let (train, _) = split(&series, test_fraction)?;
            let mut config = model.config();
            config.train.seed = seed;
            config.gbt.seed = seed;
            let fitted = fit_method(method, &config, &train, seed)?;
            save_model(&fitted, &config, &out)?;
            println!("trained {method} on {} pairs", train.len());
        }
        Command::Evaluate {
            model,
            data,
            report,
            test_fraction,
        } => {
            let saved = load_model(&model)?;
            let series = read_station(&data)?;
            let (train, test) = split(&series, test_fraction)?;
            if train.is_empty() || test.is_empty() {
                return Err(Error::InsufficientData(
                    "both splits must be non-empty".into(),
                ));
            }
            let method = saved.model.method();
            let seed = match method {
                Method::Xgb => saved.config.gbt.seed,
                _ => saved.config.train.seed,
            };
            let run = RunResult {
                seed,
                train_rmse: model_rmse(&saved.model, &train)?,
                test_rmse: model_rmse(&saved.model, &test)?,
            };
            let r = EvalReport::from_runs(series.station_id.clone(), method, vec![run])?;
            save_reports(&report, std::slice::from_ref(&r))?;
            summary(&r);
        }
        Command::Experiment {
            method,
            data,
            runs,
            report,
            seed,
            test_fraction,
            model,
        } => {
            let series = read_station(&data)?;
            let r = run_experiment(&series, method, &model.config(), runs, test_fraction, seed)?;
            save_reports(&report, std::slice::from_ref(&r))?;
            summary(&r);
        }
        Command::Compare {
            empirical,
            methods,
            format,
            out,
            order,
        } => {
            let base = load_reports(&empirical)?;
            if let Some(r) = base.iter().find(|r| r.method != Method::Empirical) {
                return Err(Error::MethodMismatch {
                    expected: Method::Empirical.tag().into(),
                    found: r.method.tag().into(),
                });
            }
            let mut others = Vec::new();
            for path in &methods {
                others.extend(load_reports(path)?);
            }
            let table = ComparisonTable::from_reports(&base, &others)?;
            let text = render_comparison(&table, order.as_deref()).render(format.into());
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| io_err(&path, e))?,
                None => print!("{text}"),
            }
        }
        Command::AblateLoss {
            data,
            method,
            runs,
            report,
            seed,
            test_fraction,
            model,
        } => {
            let series = read_station(&data)?;
            let r = run_ablation(&series, method, &model.config(), runs, test_fraction, seed)?;
            let mut sink = create(&report)?;
            serde_json::to_writer_pretty(&mut sink, &r).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(sink)?;
            sink.flush()?;
            println!(
                "{} {}: median |min gap| mse {:.4}, custom {:.4} ({})",
                r.station_id,
                r.method,
                r.median_gap_mse,
                r.median_gap_custom,
                if r.custom_not_worse() {
                    "custom not worse"
                } else {
                    "custom worse"
                }
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_training_abort() { 3 } else { 2 })
        }
    }
}
