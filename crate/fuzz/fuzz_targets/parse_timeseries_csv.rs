#![no_main]

use libfuzzer_sys::fuzz_target;
use lmg::io::{parse_timeseries_csv, timeseries_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(rows) = parse_timeseries_csv(text) else {
        return;
    };
    if rows.is_empty()
        || rows
            .iter()
            .any(|r| r.t.is_nan() || r.jx.is_nan() || r.jy.is_nan() || r.jz.is_nan())
    {
        return;
    }
    let Ok(out) = timeseries_to_csv(&rows) else {
        return;
    };
    let back = parse_timeseries_csv(&out).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!(a.t.to_bits(), b.t.to_bits());
        assert_eq!(a.jz.to_bits(), b.jz.to_bits());
    }
});
