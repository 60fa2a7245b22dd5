use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::empirical::{fit_empirical, EmpiricalModel, DEFAULT_AFTERNOON_INTERVAL};
use crate::error::{Error, Result};
use crate::gbt::{fit_ensemble, BoostedEnsemble, GbtConfig};
use crate::nn::{predict_min, train, GruConfig, GruModel, TcnConfig, TcnModel, TrainConfig};
use crate::timeseries::{fit_scaler, DayRecord, Scaler, SupervisedPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Empirical,
    Gru,
    Tcn,
    Xgb,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Empirical, Method::Gru, Method::Tcn, Method::Xgb];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Empirical => "empirical",
            Method::Gru => "gru",
            Method::Tcn => "tcn",
            Method::Xgb => "xgb",
        }
    }

    /// Column label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Empirical => "Empirical",
            Method::Gru => "GRU",
            Method::Tcn => "TCN",
            Method::Xgb => "XGBoost",
        }
    }

    pub fn is_deterministic(self) -> bool {
        self == Method::Empirical
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// Hyperparameters for every method; each run only reads its own section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub afternoon_interval: usize,
    pub gru: GruConfig,
    pub tcn: TcnConfig,
    pub train: TrainConfig,
    pub gbt: GbtConfig,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            afternoon_interval: DEFAULT_AFTERNOON_INTERVAL,
            gru: GruConfig::default(),
            tcn: TcnConfig::default(),
            train: TrainConfig::default(),
            gbt: GbtConfig::default(),
        }
    }
}

/// A fitted model of any method, with the scaler its inputs expect.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Empirical(EmpiricalModel),
    Gru { model: GruModel, scaler: Scaler },
    Tcn { model: TcnModel, scaler: Scaler },
    Xgb(BoostedEnsemble),
}

impl TrainedModel {
    pub fn method(&self) -> Method {
        match self {
            TrainedModel::Empirical(_) => Method::Empirical,
            TrainedModel::Gru { .. } => Method::Gru,
            TrainedModel::Tcn { .. } => Method::Tcn,
            TrainedModel::Xgb(_) => Method::Xgb,
        }
    }

    /// Forecast of the next day's minimum temperature in °C.
    pub fn predict_min(&self, day: &DayRecord) -> f64 {
        match self {
            TrainedModel::Empirical(m) => m.predict(day),
            TrainedModel::Gru { model, scaler } => predict_min(model, day, scaler),
            TrainedModel::Tcn { model, scaler } => predict_min(model, day, scaler),
            TrainedModel::Xgb(e) => e.predict_day(day),
        }
    }
}

/// Fits `method` on the training pairs; `seed` drives initialization, batch order,
/// column sampling and dropout.
pub fn fit_method(
    method: Method,
    config: &MethodConfig,
    train_pairs: &[SupervisedPair],
    seed: u64,
) -> Result<TrainedModel> {
    match method {
        Method::Empirical => {
            fit_empirical(train_pairs, config.afternoon_interval).map(TrainedModel::Empirical)
        }
        Method::Gru => {
            let scaler = fit_scaler(train_pairs)?;
            let mut model = GruModel::new(config.gru, seed)?;
            let tc = TrainConfig {
                seed,
                ..config.train
            };
            train(&mut model, train_pairs, &scaler, &tc)?;
            Ok(TrainedModel::Gru { model, scaler })
        }
        Method::Tcn => {
            config.tcn.validate_covers_day()?;
            let scaler = fit_scaler(train_pairs)?;
            let mut model = TcnModel::new(config.tcn.clone(), seed)?;
            let tc = TrainConfig {
                seed,
                ..config.train
            };
            train(&mut model, train_pairs, &scaler, &tc)?;
            Ok(TrainedModel::Tcn { model, scaler })
        }
        Method::Xgb => {
            let gc = GbtConfig { seed, ..config.gbt };
            fit_ensemble(train_pairs, &gc).map(TrainedModel::Xgb)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
        }
        assert!("lstm".parse::<Method>().is_err());
        assert_eq!(Method::Xgb.label(), "XGBoost");
    }
}
