#![no_main]

use libfuzzer_sys::fuzz_target;
use lmg::config::{parse_alpha_range, parse_window};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((lo, hi, n)) = parse_alpha_range(text) {
        assert!(lo < hi && n >= 2);
    }
    if let Ok([a, b]) = parse_window(text) {
        assert!(a < b);
    }
});
