use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::method::{fit_method, Method, MethodConfig, TrainedModel};
use super::metrics::{median, rmse};
use crate::error::{Error, Result};
use crate::nn::LossKind;
use crate::timeseries::{build_pairs, split_train_test, StationSeries, SupervisedPair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub train_rmse: f64,
    pub test_rmse: f64,
}

/// Per-station, per-method RMSE statistics over seeded runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub station_id: String,
    pub method: Method,
    pub n_runs: usize,
    pub avg_train_rmse: f64,
    pub best_train_rmse: f64,
    pub avg_test_rmse: f64,
    pub best_test_rmse: f64,
    pub per_run: Vec<RunResult>,
}

impl EvalReport {
    /// Aggregates runs: `best_*` is the minimum, `avg_*` the arithmetic mean.
    pub fn from_runs(
        station_id: impl Into<String>,
        method: Method,
        per_run: Vec<RunResult>,
    ) -> Result<Self> {
        if per_run.is_empty() {
            return Err(Error::InsufficientData(
                "report needs at least one run".into(),
            ));
        }
        let n = per_run.len() as f64;
        let fold = |f: fn(&RunResult) -> f64| {
            let values: Vec<f64> = per_run.iter().map(f).collect();
            let avg = values.iter().sum::<f64>() / n;
            let best = values.iter().copied().fold(f64::INFINITY, f64::min);
            // the mean of n values can round just below their minimum
            (avg.max(best), best)
        };
        let (avg_train_rmse, best_train_rmse) = fold(|r| r.train_rmse);
        let (avg_test_rmse, best_test_rmse) = fold(|r| r.test_rmse);
        Ok(EvalReport {
            station_id: station_id.into(),
            method,
            n_runs: per_run.len(),
            avg_train_rmse,
            best_train_rmse,
            avg_test_rmse,
            best_test_rmse,
            per_run,
        })
    }
}

fn model_rmse(model: &TrainedModel, pairs: &[SupervisedPair]) -> Result<f64> {
    let pred: Vec<f64> = pairs.iter().map(|p| model.predict_min(&p.input)).collect();
    let truth: Vec<f64> = pairs.iter().map(|p| p.target_min).collect();
    rmse(&pred, &truth)
}

fn experiment_split(
    series: &StationSeries,
    test_fraction: f64,
) -> Result<(Vec<SupervisedPair>, Vec<SupervisedPair>)> {
    let pairs = build_pairs(series)?;
    let (train, test) = split_train_test(&pairs, test_fraction)?;
    if train.len() < 2 || test.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{} days give {} train and {} test pairs; need at least 2 and 1",
            series.days.len(),
            train.len(),
            test.len()
        )));
    }
    Ok((train, test))
}

/// Trains `method` `n_runs` times with seeds `base_seed + r` on the chronological
/// train split and scores next-day minima on both splits.
pub fn run_experiment(
    series: &StationSeries,
    method: Method,
    config: &MethodConfig,
    n_runs: usize,
    test_fraction: f64,
    base_seed: u64,
) -> Result<EvalReport> {
    if n_runs == 0 {
        return Err(Error::InvalidArgument("n_runs must be positive".into()));
    }
    let (train, test) = experiment_split(series, test_fraction)?;
    let runs = if method.is_deterministic() { 1 } else { n_runs };
    let mut per_run = Vec::with_capacity(runs);
    for r in 0..runs {
        let seed = base_seed.wrapping_add(r as u64);
        let wrap = |e: Error| Error::RunFailed {
            run: r,
            source: Box::new(e),
        };
        let model = fit_method(method, config, &train, seed).map_err(wrap)?;
        per_run.push(RunResult {
            seed,
            train_rmse: model_rmse(&model, &train)?,
            test_rmse: model_rmse(&model, &test)?,
        });
    }
    EvalReport::from_runs(series.station_id.clone(), method, per_run)
}

/// RMSE of forecasting tomorrow's minimum as today's.
pub fn persistence_rmse(pairs: &[SupervisedPair]) -> Result<f64> {
    let pred: Vec<f64> = pairs.iter().map(|p| p.input.daily_min()).collect();
    let truth: Vec<f64> = pairs.iter().map(|p| p.target_min).collect();
    rmse(&pred, &truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub seed: u64,
    /// Median over validation pairs of `|min(pred) - min(true)|`.
    pub mse_median_gap: f64,
    pub custom_median_gap: f64,
}

/// Same architecture trained with plain MSE and with the min-gap loss on paired seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub station_id: String,
    pub method: Method,
    pub runs: Vec<AblationRun>,
    pub median_gap_mse: f64,
    pub median_gap_custom: f64,
}

impl AblationReport {
    /// The min-gap loss is never worse at the median.
    pub fn custom_not_worse(&self) -> bool {
        self.median_gap_custom <= self.median_gap_mse
    }
}

pub fn run_ablation(
    series: &StationSeries,
    method: Method,
    config: &MethodConfig,
    n_runs: usize,
    test_fraction: f64,
    base_seed: u64,
) -> Result<AblationReport> {
    if !matches!(method, Method::Gru | Method::Tcn) {
        return Err(Error::InvalidArgument(format!(
            "loss ablation applies to gru or tcn, not {method}"
        )));
    }
    if n_runs == 0 {
        return Err(Error::InvalidArgument("n_runs must be positive".into()));
    }
    let (train, test) = experiment_split(series, test_fraction)?;
    let median_gap = |loss: LossKind, seed: u64, run: usize| -> Result<f64> {
        let mut cfg = config.clone();
        cfg.train.loss = loss;
        let model = fit_method(method, &cfg, &train, seed).map_err(|e| Error::RunFailed {
            run,
            source: Box::new(e),
        })?;
        let gaps: Vec<f64> = test
            .iter()
            .map(|p| (model.predict_min(&p.input) - p.target_min).abs())
            .collect();
        Ok(median(&gaps).expect("test split is non-empty"))
    };
    let mut runs = Vec::with_capacity(n_runs);
    for r in 0..n_runs {
        let seed = base_seed.wrapping_add(r as u64);
        runs.push(AblationRun {
            seed,
            mse_median_gap: median_gap(LossKind::Mse, seed, r)?,
            custom_median_gap: median_gap(LossKind::Custom, seed, r)?,
        });
    }
    let mse: Vec<f64> = runs.iter().map(|r| r.mse_median_gap).collect();
    let custom: Vec<f64> = runs.iter().map(|r| r.custom_median_gap).collect();
    Ok(AblationReport {
        station_id: series.station_id.clone(),
        method,
        median_gap_mse: median(&mse).expect("n_runs > 0"),
        median_gap_custom: median(&custom).expect("n_runs > 0"),
        runs,
    })
}

/// Reports persist as a JSON array of [`EvalReport`].
pub fn write_reports<W: Write>(reports: &[EvalReport], mut sink: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut sink, reports).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(sink)?;
    Ok(())
}

pub fn read_reports<R: Read>(source: R) -> Result<Vec<EvalReport>> {
    let reports: Vec<EvalReport> = serde_json::from_reader(source)
        .map_err(|e| Error::CorruptPayload(format!("report: {e}")))?;
    for r in &reports {
        if r.per_run.len() != r.n_runs
            || !(r.best_train_rmse <= r.avg_train_rmse && r.best_test_rmse <= r.avg_test_rmse)
        {
            return Err(Error::CorruptPayload(format!(
                "inconsistent report for {} / {}",
                r.station_id, r.method
            )));
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate_station, ClimateConfig};

    #[test]
    fn aggregation_matches_scan() {
        let runs: Vec<RunResult> = [(1.9, 2.4), (1.7, 2.1), (2.2, 2.0), (1.8, 2.6), (2.0, 2.2)]
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| RunResult {
                seed: i as u64,
                train_rmse: a,
                test_rmse: b,
            })
            .collect();
        let r = EvalReport::from_runs("s", Method::Gru, runs.clone()).unwrap();
        let mut best = f64::INFINITY;
        for run in &runs {
            if run.test_rmse < best {
                best = run.test_rmse;
            }
        }
        assert_eq!(r.best_test_rmse, best);
        assert_eq!(r.best_train_rmse, 1.7);
        assert!((r.avg_test_rmse - 11.3 / 5.0).abs() < 1e-12);
        assert!(r.best_train_rmse <= r.avg_train_rmse);

        let single = EvalReport::from_runs("s", Method::Xgb, runs[..1].to_vec()).unwrap();
        assert_eq!(single.avg_test_rmse, single.best_test_rmse);
        assert_eq!(single.avg_train_rmse, single.best_train_rmse);
        assert!(EvalReport::from_runs("s", Method::Xgb, vec![]).is_err());
    }

    #[test]
    fn empirical_collapses_to_one_run() {
        let series = generate_station(&ClimateConfig::default(), 60, "s").unwrap();
        let r = run_experiment(
            &series,
            Method::Empirical,
            &MethodConfig::default(),
            5,
            0.2,
            3,
        )
        .unwrap();
        assert_eq!(r.n_runs, 1);
        assert_eq!(r.per_run[0].seed, 3);
    }

    #[test]
    fn insufficient_data() {
        let series = generate_station(&ClimateConfig::default(), 3, "s").unwrap();
        let err = run_experiment(
            &series,
            Method::Empirical,
            &MethodConfig::default(),
            1,
            0.5,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)), "{err}");
        let series = generate_station(&ClimateConfig::default(), 30, "s").unwrap();
        assert!(run_experiment(&series, Method::Xgb, &MethodConfig::default(), 0, 0.2, 0).is_err());
        assert!(run_ablation(&series, Method::Xgb, &MethodConfig::default(), 1, 0.2, 0).is_err());
    }

    #[test]
    fn reports_round_trip() {
        let runs = vec![RunResult {
            seed: 4,
            train_rmse: 1.1,
            test_rmse: 1.6,
        }];
        let r = EvalReport::from_runs("Kamfiruz", Method::Xgb, runs).unwrap();
        let mut buf = Vec::new();
        write_reports(std::slice::from_ref(&r), &mut buf).unwrap();
        assert_eq!(read_reports(buf.as_slice()).unwrap(), vec![r.clone()]);
        assert!(read_reports("[{".as_bytes()).is_err());
        let mut bad = r;
        bad.best_test_rmse = 9.0;
        let mut buf = Vec::new();
        write_reports(&[bad], &mut buf).unwrap();
        assert!(read_reports(buf.as_slice()).is_err());
    }
}
