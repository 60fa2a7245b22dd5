#![no_main]

use frostcast::synthgen::write_station_csv;
use frostcast::timeseries::{build_pairs, parse_station_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(series) = parse_station_csv(data) else {
        return;
    };
    let mut out = Vec::new();
    write_station_csv(&series, &mut out).unwrap();
    // rounding to the file precision is monotone, so the invariants survive
    let again = parse_station_csv(out.as_slice()).expect("written series re-parses");
    assert_eq!(again.station_id, series.station_id);
    assert_eq!(again.days.len(), series.days.len());
    for (a, b) in again.days.iter().zip(&series.days) {
        assert_eq!(a.date, b.date);
    }
    if series.days.len() >= 2 {
        assert_eq!(build_pairs(&series).unwrap().len(), series.days.len() - 1);
    }
});
