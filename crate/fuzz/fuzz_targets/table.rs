#![no_main]

use frostcast::eval::{Table, TableFormat};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else {
        return;
    };
    let format = if selector % 2 == 0 {
        TableFormat::Csv
    } else {
        TableFormat::Markdown
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let Ok(table) = Table::parse(text, format) else {
        return;
    };
    let rendered = table.render(format);
    let again = Table::parse(&rendered, format).expect("rendered table re-parses");
    assert_eq!(again.render(format), rendered);
});
