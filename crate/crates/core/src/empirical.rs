//! Two-point empirical baseline: next-day minimum as an affine function of the
//! afternoon air temperature and dew point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{DayRecord, SupervisedPair, INTERVALS_PER_DAY};

/// 14:30 local time.
pub const DEFAULT_AFTERNOON_INTERVAL: usize = 29;

/// `T_pred = a * t_max[k] + b * t_dew[k] + c` for the afternoon interval `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub afternoon_interval: usize,
}

impl EmpiricalModel {
    pub fn predict(&self, day: &DayRecord) -> f64 {
        let s = &day.samples[self.afternoon_interval];
        self.a * s.t_max + self.b * s.t_dew + self.c
    }

    fn predictors(&self, day: &DayRecord) -> (f64, f64) {
        let s = &day.samples[self.afternoon_interval];
        (s.t_max, s.t_dew)
    }
}

pub fn predict_empirical(model: &EmpiricalModel, day: &DayRecord) -> f64 {
    model.predict(day)
}

/// Ordinary least squares over `(t_max[k], t_dew[k], 1)`.
///
/// Predictors are centered before forming the 2x2 normal equations, which keeps the
/// system well conditioned for temperature-scale data; the intercept is recovered from
/// the means. One step of iterative refinement removes most of the remaining
/// round-off.
pub fn fit_empirical(
    train: &[SupervisedPair],
    afternoon_interval: usize,
) -> Result<EmpiricalModel> {
    if afternoon_interval >= INTERVALS_PER_DAY {
        return Err(Error::InvalidArgument(format!(
            "afternoon interval {afternoon_interval} outside 0-47"
        )));
    }
    if train.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "empirical fit needs at least 3 pairs, have {}",
            train.len()
        )));
    }
    let probe = EmpiricalModel {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        afternoon_interval,
    };
    let rows: Vec<(f64, f64, f64)> = train
        .iter()
        .map(|p| {
            let (x1, x2) = probe.predictors(&p.input);
            (x1, x2, p.target_min)
        })
        .collect();

    let (a, b, c) = solve(&rows)?;
    let mut model = EmpiricalModel {
        a,
        b,
        c,
        afternoon_interval,
    };

    // refine: solve for the correction against the current residuals
    let residual_rows: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|&(x1, x2, y)| (x1, x2, y - (model.a * x1 + model.b * x2 + model.c)))
        .collect();
    let (da, db, dc) = solve(&residual_rows)?;
    model.a += da;
    model.b += db;
    model.c += dc;
    Ok(model)
}

fn solve(rows: &[(f64, f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = rows.len() as f64;
    let m1 = rows.iter().map(|r| r.0).sum::<f64>() / n;
    let m2 = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let my = rows.iter().map(|r| r.2).sum::<f64>() / n;

    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x1, x2, y) in rows {
        let (u, v, w) = (x1 - m1, x2 - m2, y - my);
        s11 += u * u;
        s12 += u * v;
        s22 += v * v;
        s1y += u * w;
        s2y += v * w;
    }
    let det = s11 * s22 - s12 * s12;
    if s11 <= 0.0 || s22 <= 0.0 || det <= 1e-10 * s11 * s22 {
        return Err(Error::DegeneratePredictors);
    }
    let a = (s22 * s1y - s12 * s2y) / det;
    let b = (s11 * s2y - s12 * s1y) / det;
    let c = my - a * m1 - b * m2;
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(Error::DegeneratePredictors);
    }
    Ok((a, b, c))
}
