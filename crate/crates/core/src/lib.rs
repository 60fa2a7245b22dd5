//! Next-day minimum temperature forecasting from half-hourly station records.
//!
//! Modules, bottom up:
//!
//! * [`timeseries`]: station CSV parsing, day records, supervised pairs, splits, scaling.
//! * [`synthgen`]: seeded synthetic stations with a closed-form mean curve.
//! * [`empirical`]: the two-predictor regression baseline.
//! * [`nn`]: GRU and TCN sequence models, the min-gap loss and the training loop.
//! * [`gbt`]: exact-greedy regression trees and the DART booster.
//! * [`eval`]: multi-seed experiments, RMSE tables and model files.

pub mod empirical;
pub mod error;
pub mod eval;
pub mod gbt;
pub mod nn;
pub mod synthgen;
pub mod timeseries;

pub use error::{Error, Result};
pub use eval::{fit_method, Method, MethodConfig, TrainedModel};
pub use timeseries::{DayRecord, Sample, StationSeries, SupervisedPair};
