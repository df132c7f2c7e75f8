#![no_main]

use libfuzzer_sys::fuzz_target;
use lmg::io::parse_timeseries_json;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_timeseries_json(text);
    }
});
