#![no_main]

use frostcast::eval::{decode_model, encode_model, MODEL_FORMAT_VERSION};
use libfuzzer_sys::fuzz_target;
use sha2::{Digest, Sha256};

const TAGS: [&str; 4] = ["empirical", "gru", "tcn", "xgb"];

// Odd selector bytes treat the rest as a payload and seal it with a valid checksum,
// so mutations reach the body decoder instead of stopping at the digest.
fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let owned;
    let file = if selector % 2 == 0 {
        text
    } else {
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        let tag = TAGS[(selector as usize >> 1) % TAGS.len()];
        owned = format!(
            "frostcast-model\nformat_version = {MODEL_FORMAT_VERSION}\nmethod = {tag}\nchecksum = sha256:{digest}\npayload = {text}\n"
        );
        &owned
    };
    let Ok(saved) = decode_model(file) else {
        return;
    };
    let again =
        decode_model(&encode_model(&saved.model, &saved.config)).expect("re-encoded model decodes");
    assert_eq!(again, saved);
});
