//! Station time series: half-hourly samples grouped into days, station file
//! ingestion, supervised next-day pairs, feature flattening and scaling.

use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of half-hour intervals in one day.
pub const INTERVALS_PER_DAY: usize = 48;
/// Channels observed per interval: minimum, maximum and dew point.
pub const CHANNELS: usize = 3;
/// Length of a flattened day.
pub const FEATURES_PER_DAY: usize = INTERVALS_PER_DAY * CHANNELS;

/// Lowest and highest temperature accepted at ingestion, in °C.
pub const PLAUSIBLE_RANGE: (f64, f64) = (-60.0, 60.0);

/// Header row of the station file format.
pub const STATION_HEADER: &str = "station,date,interval,t_min,t_max,t_dew";

/// One half-hourly observation in °C.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample {
    pub t_min: f64,
    pub t_max: f64,
    pub t_dew: f64,
}

impl Sample {
    /// Builds a sample, enforcing `t_dew <= t_min <= t_max` and the plausible range.
    pub fn new(t_min: f64, t_max: f64, t_dew: f64) -> Result<Self> {
        let sample = Sample {
            t_min,
            t_max,
            t_dew,
        };
        sample
            .check(0)
            .map_err(|e| Error::InvalidSample(e.to_string()))?;
        Ok(sample)
    }

    fn check(&self, line: u64) -> Result<()> {
        for value in [self.t_min, self.t_max, self.t_dew] {
            if !value.is_finite() || value < PLAUSIBLE_RANGE.0 || value > PLAUSIBLE_RANGE.1 {
                return Err(Error::OutOfRange { line, value });
            }
        }
        if self.t_min > self.t_max {
            return Err(Error::MinAboveMax {
                line,
                t_min: self.t_min,
                t_max: self.t_max,
            });
        }
        if self.t_dew > self.t_min {
            return Err(Error::DewAboveMin {
                line,
                t_dew: self.t_dew,
                t_min: self.t_min,
            });
        }
        Ok(())
    }

    pub fn channels(&self) -> [f64; CHANNELS] {
        [self.t_min, self.t_max, self.t_dew]
    }
}

/// A calendar day of 48 consecutive samples; `samples[i]` starts at `i * 30` minutes
/// after local midnight.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub samples: [Sample; INTERVALS_PER_DAY],
}

impl DayRecord {
    pub fn new(date: NaiveDate, samples: [Sample; INTERVALS_PER_DAY]) -> Result<Self> {
        for s in &samples {
            s.check(0)
                .map_err(|e| Error::InvalidSample(e.to_string()))?;
        }
        Ok(DayRecord { date, samples })
    }

    /// The `t_min` channel of every interval.
    pub fn min_channel(&self) -> [f64; INTERVALS_PER_DAY] {
        std::array::from_fn(|i| self.samples[i].t_min)
    }

    /// Lowest `t_min` over the day.
    pub fn daily_min(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.t_min)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Ordered, gap-free daily records for one station.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSeries {
    pub station_id: String,
    pub days: Vec<DayRecord>,
}

impl StationSeries {
    /// Validates that dates are strictly increasing and consecutive.
    pub fn new(station_id: impl Into<String>, days: Vec<DayRecord>) -> Result<Self> {
        for w in days.windows(2) {
            if w[0].date.succ_opt() != Some(w[1].date) {
                return Err(Error::NonConsecutiveDates {
                    line: 0,
                    prev: w[0].date.to_string(),
                    next: w[1].date.to_string(),
                });
            }
        }
        Ok(StationSeries {
            station_id: station_id.into(),
            days,
        })
    }
}

/// Input day `d` with the `t_min` channel of day `d + 1` as the target.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedPair {
    pub input: DayRecord,
    pub target_date: NaiveDate,
    pub target_seq: [f64; INTERVALS_PER_DAY],
    pub target_min: f64,
}

impl SupervisedPair {
    pub fn new(input: DayRecord, next: &DayRecord) -> Self {
        let target_seq = next.min_channel();
        SupervisedPair {
            input,
            target_date: next.date,
            target_seq,
            target_min: target_seq.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

struct PendingDay {
    date: NaiveDate,
    first_line: u64,
    rows: Vec<(u64, usize, Sample)>,
}

impl PendingDay {
    fn finish(self, last_line: u64) -> Result<DayRecord> {
        if self.rows.len() != INTERVALS_PER_DAY {
            return Err(Error::IncompleteDay {
                line: last_line,
                date: self.date.to_string(),
                found: self.rows.len(),
            });
        }
        let mut samples = [Sample::default(); INTERVALS_PER_DAY];
        for (expected, &(line, interval, sample)) in self.rows.iter().enumerate() {
            if interval != expected {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("interval {interval} out of order, expected {expected}"),
                });
            }
            samples[expected] = sample;
        }
        debug_assert!(self.first_line > 0);
        Ok(DayRecord {
            date: self.date,
            samples,
        })
    }
}

fn parse_temp(field: &str, name: &str, line: u64) -> Result<f64> {
    let value: f64 = field.parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("{name} is not a number: {field:?}"),
    })?;
    if !value.is_finite() {
        return Err(Error::OutOfRange { line, value });
    }
    Ok(value)
}

/// Parses a station file (`station,date,interval,t_min,t_max,t_dew`, rows sorted by
/// date and interval) into a validated series.
pub fn parse_station_csv<R: Read>(reader: R) -> Result<StationSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut station: Option<String> = None;
    let mut days: Vec<DayRecord> = Vec::new();
    let mut pending: Option<PendingDay> = None;
    let mut saw_header = false;
    let mut last_line = 1;

    for record in rdr.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(last_line),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(last_line);
        last_line = line;

        if !saw_header {
            let header: Vec<&str> = record.iter().collect();
            if header.join(",") != STATION_HEADER {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("expected header {STATION_HEADER:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != 6 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected 6 fields, found {}", record.len()),
            });
        }

        let id = &record[0];
        match &station {
            None => {
                if id.is_empty() {
                    return Err(Error::MalformedRow {
                        line,
                        reason: "empty station id".into(),
                    });
                }
                station = Some(id.to_string());
            }
            Some(s) if s != id => {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("station {id:?} differs from {s:?}"),
                })
            }
            Some(_) => {}
        }

        let date =
            NaiveDate::parse_from_str(&record[1], "%Y-%m-%d").map_err(|_| Error::MalformedRow {
                line,
                reason: format!("bad date {:?}", &record[1]),
            })?;
        let interval: usize = record[2].parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("bad interval {:?}", &record[2]),
        })?;
        if interval >= INTERVALS_PER_DAY {
            return Err(Error::MalformedRow {
                line,
                reason: format!("interval {interval} outside 0-47"),
            });
        }
        let sample = Sample {
            t_min: parse_temp(&record[3], "t_min", line)?,
            t_max: parse_temp(&record[4], "t_max", line)?,
            t_dew: parse_temp(&record[5], "t_dew", line)?,
        };
        sample.check(line)?;

        let same_day = pending.as_ref().map(|p| p.date == date).unwrap_or(false);
        if !same_day {
            if let Some(prev) = pending.take() {
                let prev_date = prev.date;
                days.push(prev.finish(line)?);
                if prev_date.succ_opt() != Some(date) {
                    return Err(Error::NonConsecutiveDates {
                        line,
                        prev: prev_date.to_string(),
                        next: date.to_string(),
                    });
                }
            }
            pending = Some(PendingDay {
                date,
                first_line: line,
                rows: Vec::with_capacity(INTERVALS_PER_DAY),
            });
        }
        if let Some(p) = pending.as_mut() {
            p.rows.push((line, interval, sample));
        }
    }

    if !saw_header {
        return Err(Error::EmptySeries);
    }
    match pending {
        Some(p) => days.push(p.finish(last_line)?),
        None => return Err(Error::EmptySeries),
    }
    Ok(StationSeries {
        station_id: station.unwrap_or_default(),
        days,
    })
}

/// One pair per consecutive couple of days, chronologically.
pub fn build_pairs(series: &StationSeries) -> Result<Vec<SupervisedPair>> {
    if series.days.len() < 2 {
        return Err(Error::InsufficientDays {
            needed: 2,
            have: series.days.len(),
        });
    }
    Ok(series
        .days
        .windows(2)
        .map(|w| SupervisedPair::new(w[0].clone(), &w[1]))
        .collect())
}

/// Interval-major layout: `3*i + {0,1,2}` hold `t_min`, `t_max`, `t_dew` of interval `i`.
pub fn flatten_features(day: &DayRecord) -> [f64; FEATURES_PER_DAY] {
    let mut out = [0.0; FEATURES_PER_DAY];
    for (i, s) in day.samples.iter().enumerate() {
        out[CHANNELS * i] = s.t_min;
        out[CHANNELS * i + 1] = s.t_max;
        out[CHANNELS * i + 2] = s.t_dew;
    }
    out
}

/// Inverse of [`flatten_features`] for the sample block.
pub fn unflatten_samples(features: &[f64; FEATURES_PER_DAY]) -> [Sample; INTERVALS_PER_DAY] {
    std::array::from_fn(|i| Sample {
        t_min: features[CHANNELS * i],
        t_max: features[CHANNELS * i + 1],
        t_dew: features[CHANNELS * i + 2],
    })
}

/// Chronological split: the last `ceil(n * test_fraction)` pairs form the test set.
pub fn split_train_test<T: Clone>(pairs: &[T], test_fraction: f64) -> Result<(Vec<T>, Vec<T>)> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no pairs to split".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n = pairs.len();
    // Absorb representation error such as 0.7 * 10 = 7.000000000000001.
    let test_len = ((n as f64 * test_fraction) - 1e-9)
        .ceil()
        .clamp(1.0, n as f64) as usize;
    let (train, test) = pairs.split_at(n - test_len);
    Ok((train.to_vec(), test.to_vec()))
}

/// Standardization fitted on training inputs (all three channels pooled).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: f64,
    pub sd: f64,
}

impl Scaler {
    pub const IDENTITY: Scaler = Scaler { mean: 0.0, sd: 1.0 };

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return Err(Error::InsufficientData("no values to fit a scaler".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !sd.is_finite() || sd <= 1e-12 * mean.abs().max(1.0) {
            return Err(Error::ZeroVariance);
        }
        Ok(Scaler { mean, sd })
    }

    pub fn apply(&self, value: f64) -> f64 {
        (value - self.mean) / self.sd
    }

    pub fn invert(&self, value: f64) -> f64 {
        value * self.sd + self.mean
    }

    /// Standardized 48x3 input sequence of a day.
    pub fn standardize_day(&self, day: &DayRecord) -> [[f64; CHANNELS]; INTERVALS_PER_DAY] {
        std::array::from_fn(|i| day.samples[i].channels().map(|v| self.apply(v)))
    }
}

/// Fits a [`Scaler`] over every temperature of the training inputs.
pub fn fit_scaler(train: &[SupervisedPair]) -> Result<Scaler> {
    if train.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    Scaler::from_values(
        train
            .iter()
            .flat_map(|p| p.input.samples.iter().flat_map(|s| s.channels())),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn csv_for(days: usize, bad: impl Fn(usize, usize) -> Option<String>) -> String {
        let mut out = String::from(STATION_HEADER);
        out.push('\n');
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        for d in 0..days {
            let date = start + chrono::Days::new(d as u64);
            for i in 0..48 {
                match bad(d, i) {
                    Some(row) if row.is_empty() => {}
                    Some(row) => {
                        out.push_str(&row);
                        out.push('\n');
                    }
                    None => {
                        let base = (i as f64) / 10.0 + d as f64;
                        out.push_str(&format!(
                            "st1,{date},{i},{:.4},{:.4},{:.4}\n",
                            base,
                            base + 1.0,
                            base - 2.0
                        ));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn parses_two_days() {
        let series = parse_station_csv(csv_for(2, |_, _| None).as_bytes()).unwrap();
        assert_eq!(series.station_id, "st1");
        assert_eq!(series.days.len(), 2);
        assert_eq!(series.days[1].samples[10].t_min, 2.0);
    }

    #[test]
    fn rejects_incomplete_day() {
        let text = csv_for(2, |d, i| (d == 0 && i == 47).then(String::new));
        let err = parse_station_csv(text.as_bytes()).unwrap_err();
        assert!(
            matches!(err, Error::IncompleteDay { found: 47, .. }),
            "{err}"
        );
        assert!(err.to_string().contains("incomplete day"));

        let text = csv_for(1, |_, i| (i == 47).then(String::new));
        let err = parse_station_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::IncompleteDay { found: 47, .. }));
    }

    #[test]
    fn rejects_dew_above_min() {
        let text = csv_for(1, |_, i| {
            (i == 3).then(|| "st1,2020-01-01,3,3,4,5".to_string())
        });
        let err = parse_station_csv(text.as_bytes()).unwrap_err();
        assert!(err
            .to_string()
            .contains("dew point exceeds minimum temperature"));
        // header is line 1, interval 3 is line 5
        assert!(matches!(err, Error::DewAboveMin { line: 5, .. }));
    }

    #[test]
    fn rejects_other_violations() {
        let cases = [
            "st1,2020-01-01,3,5,4,1",
            "st1,2020-01-01,3,71,72,70",
            "st1,2020-01-01,3,abc,1,0",
            "st1,2020-01-01,3,NaN,1,0",
            "st1,2020-13-01,3,1,2,0",
            "st2,2020-01-01,3,1,2,0",
            "st1,2020-01-01,3,1,2",
            "st1,2020-01-01,99,1,2,0",
        ];
        for row in cases {
            let text = csv_for(1, |_, i| (i == 3).then(|| row.to_string()));
            assert!(parse_station_csv(text.as_bytes()).is_err(), "{row}");
        }
    }

    #[test]
    fn rejects_gaps_and_bad_headers() {
        let text = csv_for(3, |_, _| None).replace("2020-01-02", "2020-01-05");
        let err = parse_station_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::NonConsecutiveDates { .. }), "{err}");

        let text = csv_for(1, |_, _| None).replacen("t_dew", "dew", 1);
        assert!(parse_station_csv(text.as_bytes()).is_err());
        assert_eq!(parse_station_csv("".as_bytes()), Err(Error::EmptySeries));
        assert_eq!(
            parse_station_csv(format!("{STATION_HEADER}\n").as_bytes()),
            Err(Error::EmptySeries)
        );

        // swapped intervals are caught even though the count is right
        let text = csv_for(1, |_, i| match i {
            4 => Some("st1,2020-01-01,5,1,2,0".into()),
            5 => Some("st1,2020-01-01,4,1,2,0".into()),
            _ => None,
        });
        assert!(matches!(
            parse_station_csv(text.as_bytes()),
            Err(Error::MalformedRow { line: 6, .. })
        ));
    }

    #[test]
    fn pairs_and_min() {
        let series = parse_station_csv(csv_for(10, |_, _| None).as_bytes()).unwrap();
        let pairs = build_pairs(&series).unwrap();
        assert_eq!(pairs.len(), 9);
        for (i, p) in pairs.iter().enumerate() {
            let mut brute = f64::INFINITY;
            for s in &series.days[i + 1].samples {
                if s.t_min < brute {
                    brute = s.t_min;
                }
            }
            assert_eq!(p.target_min, brute);
            assert_eq!(p.input.date, series.days[i].date);
        }

        let one = StationSeries::new("x", series.days[..1].to_vec()).unwrap();
        assert_eq!(
            build_pairs(&one),
            Err(Error::InsufficientDays { needed: 2, have: 1 })
        );
    }

    #[test]
    fn flatten_layout() {
        let date = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let constant = DayRecord::new(date, [Sample::new(1.0, 2.0, 0.0).unwrap(); 48]).unwrap();
        let flat = flatten_features(&constant);
        assert_eq!(flat.len(), 144);
        for chunk in flat.chunks(3) {
            assert_eq!(chunk, &[1.0, 2.0, 0.0]);
        }

        let series = parse_station_csv(csv_for(1, |_, _| None).as_bytes()).unwrap();
        let day = &series.days[0];
        let flat = flatten_features(day);
        assert_eq!(flat[3], day.samples[1].t_min);
        assert_eq!(unflatten_samples(&flat), day.samples);
    }

    #[test]
    fn split_rules() {
        let pairs: Vec<usize> = (0..100).collect();
        let (train, test) = split_train_test(&pairs, 0.2).unwrap();
        assert_eq!((train.len(), test.len()), (80, 20));
        assert_eq!(test, (80..100).collect::<Vec<_>>());

        let (train, test) = split_train_test(&pairs[..5], 0.5).unwrap();
        assert_eq!((train.len(), test.len()), (2, 3));

        let (train, test) = split_train_test(&pairs[..10], 0.7).unwrap();
        assert_eq!((train.len(), test.len()), (3, 7));

        assert!(split_train_test::<usize>(&[], 0.2).is_err());
        assert!(split_train_test(&pairs, 0.0).is_err());
        assert!(split_train_test(&pairs, 1.0).is_err());
        assert!(split_train_test(&pairs, f64::NAN).is_err());
    }

    #[test]
    fn scaler_two_points() {
        let s = Scaler::from_values([0.0, 10.0]).unwrap();
        assert_eq!(s, Scaler { mean: 5.0, sd: 5.0 });
        assert_eq!(s.apply(10.0), 1.0);
        assert_eq!(Scaler::from_values([3.3; 144]), Err(Error::ZeroVariance));
        assert!(fit_scaler(&[]).is_err());
    }

    #[test]
    fn sample_constructor() {
        assert!(Sample::new(1.0, 2.0, 0.5).is_ok());
        assert!(Sample::new(1.0, 0.5, 0.0).is_err());
        assert!(Sample::new(1.0, 2.0, 1.5).is_err());
        assert!(Sample::new(f64::INFINITY, f64::INFINITY, 0.0).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scaler_round_trip(mean in -30.0f64..30.0, sd in 0.1f64..20.0, xs in prop::collection::vec(-60.0f64..60.0, 1000)) {
                let s = Scaler { mean, sd };
                for x in xs {
                    prop_assert!((s.invert(s.apply(x)) - x).abs() < 1e-9);
                }
            }

            #[test]
            fn split_is_chronological_partition(n in 1usize..400, frac in 0.01f64..0.99) {
                let items: Vec<usize> = (0..n).collect();
                let (train, test) = split_train_test(&items, frac).unwrap();
                let joined: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
                prop_assert_eq!(joined, items);
                prop_assert!(!test.is_empty());
                if let (Some(a), Some(b)) = (train.last(), test.first()) {
                    prop_assert!(a < b);
                }
            }
        }
    }
}
