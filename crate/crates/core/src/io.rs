//! Time-series files.
//!
//! CSV columns are always, in this order, `t,Jx,Jy,Jz,var_x,var_y,var_z,energy`;
//! a solver may omit the dispersion or energy columns but never reorders them.
//! Floats are written in the shortest form that parses back to the identical
//! `f64` (at most 17 significant digits). The JSON form carries the same
//! records plus a metadata header.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExactObservables;
use crate::model::{HfPoint, ModelParams};
use crate::smf::EnsembleStats;

/// Canonical column order.
pub const COLUMNS: [&str; 8] = ["t", "Jx", "Jy", "Jz", "var_x", "var_y", "var_z", "energy"];

pub const LANDSCAPE_COLUMNS: [&str; 3] = ["alpha", "phi", "energy"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::config(format!(
                "unknown format '{other}' (expected csv or json)"
            ))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// One record of a time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub t: f64,
    #[serde(rename = "Jx")]
    pub jx: f64,
    #[serde(rename = "Jy")]
    pub jy: f64,
    #[serde(rename = "Jz")]
    pub jz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
}

impl TimeseriesRow {
    pub fn full(t: f64, mean: [f64; 3], var: [f64; 3], energy: f64) -> Self {
        TimeseriesRow {
            t,
            jx: mean[0],
            jy: mean[1],
            jz: mean[2],
            var_x: Some(var[0]),
            var_y: Some(var[1]),
            var_z: Some(var[2]),
            energy: Some(energy),
        }
    }

    fn presence(&self) -> [bool; 4] {
        [
            self.var_x.is_some(),
            self.var_y.is_some(),
            self.var_z.is_some(),
            self.energy.is_some(),
        ]
    }

    fn values(&self) -> impl Iterator<Item = f64> {
        [self.t, self.jx, self.jy, self.jz].into_iter().chain(
            [self.var_x, self.var_y, self.var_z, self.energy]
                .into_iter()
                .flatten(),
        )
    }
}

impl From<&ExactObservables> for TimeseriesRow {
    fn from(o: &ExactObservables) -> Self {
        TimeseriesRow::full(o.time, o.mean, o.var, o.energy)
    }
}

impl From<&EnsembleStats> for TimeseriesRow {
    fn from(s: &EnsembleStats) -> Self {
        TimeseriesRow::full(s.time, s.mean, s.var, s.mean_energy)
    }
}

/// Run description stored in the JSON header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub solver: String,
    pub params: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trajectories: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antithetic: Option<bool>,
}

impl Metadata {
    pub fn new(solver: &str, params: ModelParams) -> Self {
        Metadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            solver: solver.to_string(),
            params,
            scheme: None,
            dt: None,
            seed: None,
            n_trajectories: None,
            antithetic: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesDocument {
    pub metadata: Metadata,
    pub columns: Vec<String>,
    pub rows: Vec<TimeseriesRow>,
}

fn schema(rows: &[TimeseriesRow]) -> Result<Vec<&'static str>> {
    let first = rows
        .first()
        .ok_or_else(|| Error::config("refusing to write an empty time series"))?
        .presence();
    if rows.iter().any(|r| r.presence() != first) {
        return Err(Error::config("time series rows do not share a schema"));
    }
    let mut cols = COLUMNS[..4].to_vec();
    cols.extend(
        COLUMNS[4..]
            .iter()
            .zip(first)
            .filter(|(_, p)| *p)
            .map(|(c, _)| *c),
    );
    Ok(cols)
}

pub fn timeseries_to_csv(rows: &[TimeseriesRow]) -> Result<String> {
    let cols = schema(rows)?;
    let mut out = cols.join(",");
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row.values() {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn timeseries_to_json(rows: &[TimeseriesRow], metadata: &Metadata) -> Result<String> {
    let columns = schema(rows)?.into_iter().map(String::from).collect();
    let doc = TimeseriesDocument {
        metadata: metadata.clone(),
        columns,
        rows: rows.to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn parse_float(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(format!("line {line}: '{}' is not a number", field.trim())))
}

/// Parses the CSV form; accepts optional blanks after separators.
pub fn parse_timeseries_csv(text: &str) -> Result<Vec<TimeseriesRow>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::parse("empty input"))?;
    let header: Vec<&str> = header.split(',').map(str::trim).collect();
    if header.len() < 4 || header[..4] != COLUMNS[..4] {
        return Err(Error::parse(format!(
            "header must start with {}",
            COLUMNS[..4].join(",")
        )));
    }
    // optional columns must appear as an ordered subset of the canonical tail
    let mut present = [false; 4];
    let mut cursor = 4;
    for name in &header[4..] {
        let pos = COLUMNS[cursor..]
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::parse(format!("unexpected or out-of-order column '{name}'")))?;
        cursor += pos;
        present[cursor - 4] = true;
        cursor += 1;
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::parse(format!(
                "line {lineno}: expected {} fields, found {}",
                header.len(),
                fields.len()
            )));
        }
        let mut values = fields.iter().map(|f| parse_float(f, lineno));
        let mut next = || values.next().expect("length checked");
        let (t, jx, jy, jz) = (next()?, next()?, next()?, next()?);
        let mut optional = [None; 4];
        for (slot, &p) in optional.iter_mut().zip(&present) {
            if p {
                *slot = Some(next()?);
            }
        }
        rows.push(TimeseriesRow {
            t,
            jx,
            jy,
            jz,
            var_x: optional[0],
            var_y: optional[1],
            var_z: optional[2],
            energy: optional[3],
        });
    }
    Ok(rows)
}

pub fn parse_timeseries_json(text: &str) -> Result<TimeseriesDocument> {
    let doc: TimeseriesDocument =
        serde_json::from_str(text).map_err(|e| Error::parse(e.to_string()))?;
    let expected = if doc.rows.is_empty() {
        return Err(Error::parse("document has no rows"));
    } else {
        schema(&doc.rows).map_err(|e| Error::parse(e.to_string()))?
    };
    if doc.columns != expected {
        return Err(Error::parse(format!(
            "declared columns {:?} do not match the records ({:?})",
            doc.columns, expected
        )));
    }
    Ok(doc)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Serializes `rows` and writes them to `path`. Nothing is written on error.
pub fn emit_timeseries(
    rows: &[TimeseriesRow],
    format: Format,
    path: &Path,
    metadata: &Metadata,
) -> Result<()> {
    let text = render_timeseries(rows, format, metadata)?;
    write_file(path, &text)
}

pub fn render_timeseries(
    rows: &[TimeseriesRow],
    format: Format,
    metadata: &Metadata,
) -> Result<String> {
    match format {
        Format::Csv => timeseries_to_csv(rows),
        Format::Json => timeseries_to_json(rows, metadata),
    }
}

#[derive(Serialize)]
struct LandscapeDocument<'a> {
    metadata: &'a Metadata,
    columns: [&'static str; 3],
    rows: &'a [HfPoint],
}

pub fn render_landscape(points: &[HfPoint], format: Format, metadata: &Metadata) -> Result<String> {
    if points.is_empty() {
        return Err(Error::config("refusing to write an empty landscape"));
    }
    match format {
        Format::Csv => {
            let mut out = LANDSCAPE_COLUMNS.join(",");
            out.push('\n');
            for p in points {
                writeln!(out, "{},{},{}", p.alpha, p.phi, p.energy).expect("writing to a String");
            }
            Ok(out)
        }
        Format::Json => {
            let doc = LandscapeDocument {
                metadata,
                columns: LANDSCAPE_COLUMNS,
                rows: points,
            };
            let mut s =
                serde_json::to_string_pretty(&doc).map_err(|e| Error::parse(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, text)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn meta() -> Metadata {
        Metadata::new("exact", ModelParams::with_chi(40, 0.5).unwrap())
    }

    #[test]
    fn initial_exact_row() {
        let row = TimeseriesRow::full(0.0, [0.0, 0.0, -20.0], [10.0, 10.0, 0.0], -20.0);
        let csv = timeseries_to_csv(&[row]).unwrap();
        assert_eq!(
            csv,
            "t,Jx,Jy,Jz,var_x,var_y,var_z,energy\n0,0,0,-20,10,10,0,-20\n"
        );
    }

    #[test]
    fn spaced_rows_parse() {
        let rows = parse_timeseries_csv(
            "t, Jx, Jy, Jz, var_x, var_y, var_z, energy\n0, 0, 0, -20, 10, 10, 0, -20\n",
        )
        .unwrap();
        assert_eq!(
            rows[0],
            TimeseriesRow::full(0.0, [0.0, 0.0, -20.0], [10.0, 10.0, 0.0], -20.0)
        );
    }

    #[test]
    fn partial_schema() {
        let row = TimeseriesRow {
            energy: None,
            var_y: None,
            ..TimeseriesRow::full(1.5, [1.0, 2.0, 3.0], [4.0, 5.0, 6.0], 7.0)
        };
        let csv = timeseries_to_csv(&[row]).unwrap();
        assert!(csv.starts_with("t,Jx,Jy,Jz,var_x,var_z\n"));
        assert_eq!(parse_timeseries_csv(&csv).unwrap(), vec![row]);
        assert!(parse_timeseries_csv("t,Jx,Jy,Jz,var_z,var_x\n1,2,3,4,5,6\n").is_err());
    }

    #[test]
    fn empty_rows_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        assert!(emit_timeseries(&[], Format::Csv, &path, &meta()).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn mixed_schema_rejected() {
        let a = TimeseriesRow::full(0.0, [0.0; 3], [0.0; 3], 0.0);
        let b = TimeseriesRow { energy: None, ..a };
        assert!(timeseries_to_csv(&[a, b]).is_err());
    }

    #[test]
    fn io_error_names_path() {
        let path = Path::new("/nonexistent-dir/x.csv");
        let row = TimeseriesRow::full(0.0, [0.0; 3], [0.0; 3], 0.0);
        let err = emit_timeseries(&[row], Format::Csv, path, &meta()).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }

    #[test]
    fn malformed_csv() {
        assert!(parse_timeseries_csv("").is_err());
        assert!(parse_timeseries_csv("a,b\n").is_err());
        assert!(parse_timeseries_csv("t,Jx,Jy,Jz\n1,2,3\n").is_err());
        assert!(parse_timeseries_csv("t,Jx,Jy,Jz\n1,2,3,x\n").is_err());
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            any::<f64>().prop_filter("finite", |x| x.is_finite()),
            -1e3..1e3f64
        ]
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(vals in proptest::collection::vec(proptest::array::uniform8(finite()), 1..20)) {
            let rows: Vec<TimeseriesRow> = vals
                .iter()
                .map(|v| TimeseriesRow::full(v[0], [v[1], v[2], v[3]], [v[4], v[5], v[6]], v[7]))
                .collect();
            let csv = timeseries_to_csv(&rows).unwrap();
            let back = parse_timeseries_csv(&csv).unwrap();
            for (a, b) in rows.iter().zip(&back) {
                let av: Vec<u64> = a.values().map(f64::to_bits).collect();
                let bv: Vec<u64> = b.values().map(f64::to_bits).collect();
                prop_assert_eq!(av, bv);
            }
            let json = timeseries_to_json(&rows, &meta()).unwrap();
            let doc = parse_timeseries_json(&json).unwrap();
            prop_assert_eq!(doc.rows, rows);
        }
    }
}
