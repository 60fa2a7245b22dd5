#![no_main]

use frostcast::eval::{read_reports, render_reports, write_reports};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(reports) = read_reports(data) else {
        return;
    };
    let mut out = Vec::new();
    write_reports(&reports, &mut out).unwrap();
    assert_eq!(read_reports(out.as_slice()).unwrap(), reports);
    let _ = render_reports(&reports, None);
});
