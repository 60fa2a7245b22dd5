#![no_main]

use frostcast::synthgen::{generate_station, ClimateConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = ClimateConfig::parse(text) else {
        return;
    };
    assert!(config.validate().is_ok());
    if let Ok(series) = generate_station(&config, 3, "fuzz") {
        assert_eq!(series.days.len(), 3);
    }
});
