//! Seeded synthetic station weather with seasonal and diurnal cycles, AR(1)
//! noise and early-morning radiation-frost pulses.

use std::f64::consts::PI;
use std::io::Write;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{
    DayRecord, Sample, StationSeries, INTERVALS_PER_DAY, PLAUSIBLE_RANGE, STATION_HEADER,
};

/// Fraction of a day by which the diurnal sinusoid is shifted.
pub const DIURNAL_PHASE: f64 = 0.29;
/// Frost pulses cover intervals `0..=FROST_LAST_INTERVAL` (00:00 to 06:00).
pub const FROST_LAST_INTERVAL: usize = 12;
/// Interval at which the frost ramp reaches its peak of 1.
pub const FROST_PEAK_INTERVAL: usize = 6;

const DAYS_PER_YEAR: f64 = 365.0;

/// First calendar day of every generated series.
pub fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2001, 1, 1).expect("valid constant date")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimateConfig {
    pub annual_mean: f64,
    pub seasonal_amplitude: f64,
    pub diurnal_amplitude: f64,
    pub noise_sd: f64,
    pub ar_coeff: f64,
    pub dew_offset_mean: f64,
    pub dew_offset_sd: f64,
    pub spread: f64,
    pub frost_prob: f64,
    pub frost_depth: f64,
    pub seed: u64,
}

impl Default for ClimateConfig {
    fn default() -> Self {
        ClimateConfig {
            annual_mean: 15.0,
            seasonal_amplitude: 10.0,
            diurnal_amplitude: 7.0,
            noise_sd: 0.5,
            ar_coeff: 0.95,
            dew_offset_mean: 4.0,
            dew_offset_sd: 2.0,
            spread: 1.0,
            frost_prob: 0.1,
            frost_depth: 6.0,
            seed: 42,
        }
    }
}

impl ClimateConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("annual_mean", self.annual_mean),
            ("seasonal_amplitude", self.seasonal_amplitude),
            ("diurnal_amplitude", self.diurnal_amplitude),
            ("noise_sd", self.noise_sd),
            ("dew_offset_mean", self.dew_offset_mean),
            ("dew_offset_sd", self.dew_offset_sd),
            ("spread", self.spread),
            ("frost_depth", self.frost_depth),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite")));
            }
            if name != "annual_mean" && value < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be nonnegative")));
            }
        }
        if !(0.0..1.0).contains(&self.ar_coeff) {
            return Err(Error::InvalidConfig("ar_coeff must be in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.frost_prob) {
            return Err(Error::InvalidConfig("frost_prob must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// Sets one field by name from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::InvalidConfig(format!("bad value for {key}: {value:?}"));
        if key == "seed" {
            self.seed = value.parse().map_err(|_| bad())?;
            return Ok(());
        }
        let v: f64 = value.parse().map_err(|_| bad())?;
        let slot = match key {
            "annual_mean" => &mut self.annual_mean,
            "seasonal_amplitude" => &mut self.seasonal_amplitude,
            "diurnal_amplitude" => &mut self.diurnal_amplitude,
            "noise_sd" => &mut self.noise_sd,
            "ar_coeff" => &mut self.ar_coeff,
            "dew_offset_mean" => &mut self.dew_offset_mean,
            "dew_offset_sd" => &mut self.dew_offset_sd,
            "spread" => &mut self.spread,
            "frost_prob" => &mut self.frost_prob,
            "frost_depth" => &mut self.frost_depth,
            _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
        };
        *slot = v;
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ClimateConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key=value", n + 1))
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Noise-free base temperature for day `d`, interval `i`.
    pub fn base_curve(&self, day: usize, interval: usize) -> f64 {
        self.annual_mean
            + self.seasonal_amplitude * (2.0 * PI * day as f64 / DAYS_PER_YEAR).sin()
            + self.diurnal_amplitude
                * (2.0 * PI * interval as f64 / INTERVALS_PER_DAY as f64 - 2.0 * PI * DIURNAL_PHASE)
                    .sin()
    }
}

/// Smooth raised-sine window over the early-morning intervals, peaking at 1.
pub fn frost_ramp(interval: usize) -> f64 {
    if interval > FROST_LAST_INTERVAL {
        return 0.0;
    }
    let width = (FROST_LAST_INTERVAL + 1) as f64;
    (PI * (interval as f64 + 0.5) / width).sin().powi(2)
}

/// Generates a series; see [`generate_station_with_flags`].
pub fn generate_station(
    config: &ClimateConfig,
    n_days: usize,
    station_id: &str,
) -> Result<StationSeries> {
    generate_station_with_flags(config, n_days, station_id).map(|(s, _)| s)
}

/// Generates a series together with the per-day frost flags (flag `d` cools the early
/// morning of day `d`). The random stream is consumed identically whatever the
/// `frost_prob`, so two configs differing only in frost settings share their noise.
pub fn generate_station_with_flags(
    config: &ClimateConfig,
    n_days: usize,
    station_id: &str,
) -> Result<(StationSeries, Vec<bool>)> {
    config.validate()?;
    if n_days == 0 {
        return Err(Error::InvalidArgument("n_days must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let stationary_sd = config.noise_sd / (1.0 - config.ar_coeff.powi(2)).sqrt();
    let mut noise = stationary_sd * rng.sample::<f64, _>(StandardNormal);

    let mut days = Vec::with_capacity(n_days);
    let mut flags = Vec::with_capacity(n_days);
    let mut date = start_date();
    for d in 0..n_days {
        let frost = rng.random::<f64>() < config.frost_prob;
        flags.push(frost);
        let mut samples = [Sample::default(); INTERVALS_PER_DAY];
        for (i, slot) in samples.iter_mut().enumerate() {
            noise =
                config.ar_coeff * noise + config.noise_sd * rng.sample::<f64, _>(StandardNormal);
            let dew_draw = config.dew_offset_mean
                + config.dew_offset_sd * rng.sample::<f64, _>(StandardNormal);
            let mut base = config.base_curve(d, i) + noise;
            if frost {
                base -= config.frost_depth * frost_ramp(i);
            }
            let t_min = base - config.spread / 2.0;
            let t_max = base + config.spread / 2.0;
            let t_dew = t_min - dew_draw.max(0.0);
            for v in [t_min, t_max, t_dew] {
                if !(PLAUSIBLE_RANGE.0..=PLAUSIBLE_RANGE.1).contains(&v) {
                    return Err(Error::InvalidConfig(format!(
                        "generated temperature {v:.2} on day {d} outside plausible range"
                    )));
                }
            }
            *slot = Sample {
                t_min,
                t_max,
                t_dew,
            };
        }
        days.push(DayRecord { date, samples });
        date = date.succ_opt().expect("date within chrono range");
    }
    Ok((
        StationSeries {
            station_id: station_id.to_string(),
            days,
        },
        flags,
    ))
}

/// Writes the station file format, temperatures at 4 decimals.
pub fn write_station_csv<W: Write>(series: &StationSeries, mut sink: W) -> Result<()> {
    writeln!(sink, "{STATION_HEADER}")?;
    for day in &series.days {
        for (i, s) in day.samples.iter().enumerate() {
            writeln!(
                sink,
                "{},{},{},{},{},{}",
                series.station_id,
                day.date,
                i,
                fmt4(s.t_min),
                fmt4(s.t_max),
                fmt4(s.t_dew)
            )?;
        }
    }
    sink.flush()?;
    Ok(())
}

fn fmt4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}
