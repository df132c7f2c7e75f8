//! Replays the checked-in fuzz seeds through the parsers on stable.

use std::fs;
use std::path::PathBuf;

use lmg::config::{parse_alpha_range, parse_window, ConfigFile};
use lmg::io::{parse_timeseries_csv, parse_timeseries_json, timeseries_to_csv};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn config_seeds_resolve_and_round_trip() {
    for (path, text) in seeds("parse_config") {
        let cfg = ConfigFile::parse(&text)
            .and_then(|f| f.resolve())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = ConfigFile::parse(&cfg.to_toml().unwrap())
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(again, cfg, "{}", path.display());
    }
}

#[test]
fn csv_seeds_parse_and_round_trip() {
    for (path, text) in seeds("parse_timeseries_csv") {
        let rows =
            parse_timeseries_csv(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let back = parse_timeseries_csv(&timeseries_to_csv(&rows).unwrap()).unwrap();
        assert_eq!(back, rows, "{}", path.display());
    }
}

#[test]
fn json_seeds_parse() {
    for (path, text) in seeds("parse_timeseries_json") {
        let doc =
            parse_timeseries_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(!doc.rows.is_empty());
    }
}

#[test]
fn range_seeds_parse_as_one_kind() {
    for (path, text) in seeds("parse_ranges") {
        let ok = parse_alpha_range(&text).is_ok() || parse_window(&text).is_ok();
        assert!(ok, "{}: {text:?}", path.display());
    }
}

mod arbitrary_input {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn parsers_never_panic(s in "\\PC{0,200}") {
            let _ = ConfigFile::parse(&s).map(|f| f.resolve());
            let _ = parse_timeseries_csv(&s);
            let _ = parse_timeseries_json(&s);
            let _ = parse_alpha_range(&s);
            let _ = parse_window(&s);
        }

        #[test]
        fn csv_shaped_input_never_panics(
            header in prop::sample::select(vec!["t,Jx,Jy,Jz", "t,Jx,Jy,Jz,var_x,var_y,var_z,energy", "t,Jx,Jy,Jz,energy"]),
            body in prop::collection::vec("[-0-9.eEnaif,]{0,40}", 0..6),
        ) {
            let text = format!("{header}\n{}", body.join("\n"));
            let _ = parse_timeseries_csv(&text);
        }
    }
}
