//! Exact-versus-ensemble comparison on a shared time grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::TimeseriesRow;

/// Observables compared, in column order.
pub const OBSERVABLES: [&str; 6] = ["Jx", "Jy", "Jz", "var_x", "var_y", "var_z"];

fn observable(row: &TimeseriesRow, i: usize) -> Option<f64> {
    match i {
        0 => Some(row.jx),
        1 => Some(row.jy),
        2 => Some(row.jz),
        3 => row.var_x,
        4 => row.var_y,
        5 => row.var_z,
        _ => None,
    }
}

/// Closed time interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(Error::config(format!("invalid window [{start}, {end}]")));
        }
        Ok(Window { start, end })
    }

    fn contains(&self, t: f64) -> bool {
        let slack = 1e-9 * self.end.abs().max(1.0);
        t >= self.start - slack && t <= self.end + slack
    }
}

/// Early window for instantaneous agreement, late window for time averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Windows {
    pub early: Window,
    pub late: Option<Window>,
}

impl Windows {
    /// `[0, 10]` and `[10, 50]`, clipped to `[0, t_end]`; the late window is
    /// dropped when nothing of it remains.
    pub fn defaults_for(t_end: f64) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(Error::config("comparison needs t_end > 0"));
        }
        let early = Window::new(0.0, t_end.min(10.0))?;
        let late = if t_end > 10.0 {
            Some(Window::new(10.0, t_end.min(50.0))?)
        } else {
            None
        };
        Ok(Windows { early, late })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSummary {
    pub name: String,
    pub early_max_abs_dev: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub late_avg_exact: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub late_avg_smf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub late_avg_abs_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub exact: TimeseriesRow,
    pub smf: TimeseriesRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub windows: Windows,
    pub summary: Vec<ObservableSummary>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn get(&self, name: &str) -> Option<&ObservableSummary> {
        self.summary.iter().find(|s| s.name == name)
    }
}

/// Trapezoid-rule time average of `(t, y)` samples.
pub fn time_average(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::config(
            "time average needs at least two samples in the window",
        ));
    }
    let span = points[points.len() - 1].0 - points[0].0;
    if !(span > 0.0) {
        return Err(Error::config("time average over an empty interval"));
    }
    let integral: f64 = points
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    Ok(integral / span)
}

pub fn compare_report(
    exact: &[TimeseriesRow],
    smf: &[TimeseriesRow],
    windows: Windows,
) -> Result<ComparisonReport> {
    if exact.is_empty() || exact.len() != smf.len() {
        return Err(Error::config(format!(
            "time grids differ in length ({} exact vs {} smf)",
            exact.len(),
            smf.len()
        )));
    }
    if let Some((a, b)) = exact
        .iter()
        .zip(smf)
        .find(|(a, b)| a.t.to_bits() != b.t.to_bits())
    {
        return Err(Error::config(format!(
            "time grids differ: {} vs {}",
            a.t, b.t
        )));
    }
    let (t0, t1) = (exact[0].t, exact[exact.len() - 1].t);
    for w in std::iter::once(&windows.early).chain(windows.late.as_ref()) {
        let slack = 1e-9 * t1.abs().max(1.0);
        if w.start < t0 - slack || w.end > t1 + slack {
            return Err(Error::config(format!(
                "window [{}, {}] lies outside the simulated range [{t0}, {t1}]",
                w.start, w.end
            )));
        }
    }

    let mut summary = Vec::with_capacity(OBSERVABLES.len());
    for (i, name) in OBSERVABLES.iter().enumerate() {
        let pairs: Vec<(f64, f64, f64)> = exact
            .iter()
            .zip(smf)
            .filter_map(|(e, s)| Some((e.t, observable(e, i)?, observable(s, i)?)))
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let early_max_abs_dev = pairs
            .iter()
            .filter(|(t, _, _)| windows.early.contains(*t))
            .map(|(_, e, s)| (e - s).abs())
            .fold(0.0, f64::max);
        let (mut late_avg_exact, mut late_avg_smf, mut late_avg_abs_diff) = (None, None, None);
        if let Some(late) = windows.late {
            let inside: Vec<_> = pairs.iter().filter(|(t, _, _)| late.contains(*t)).collect();
            let ex = time_average(&inside.iter().map(|(t, e, _)| (*t, *e)).collect::<Vec<_>>())?;
            let sm = time_average(&inside.iter().map(|(t, _, s)| (*t, *s)).collect::<Vec<_>>())?;
            late_avg_exact = Some(ex);
            late_avg_smf = Some(sm);
            late_avg_abs_diff = Some((ex - sm).abs());
        }
        summary.push(ObservableSummary {
            name: name.to_string(),
            early_max_abs_dev,
            late_avg_exact,
            late_avg_smf,
            late_avg_abs_diff,
        });
    }
    Ok(ComparisonReport {
        windows,
        summary,
        rows: exact
            .iter()
            .zip(smf)
            .map(|(e, s)| ComparisonRow { exact: *e, smf: *s })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64) -> Vec<TimeseriesRow> {
        (0..=200)
            .map(|k| {
                let t = 0.1 * k as f64;
                TimeseriesRow::full(t, [0.0, 0.0, f(t)], [10.0, 10.0, 0.0], -20.0)
            })
            .collect()
    }

    #[test]
    fn identical_inputs() {
        let a = series(|t| t.sin());
        let r = compare_report(&a, &a, Windows::defaults_for(20.0).unwrap()).unwrap();
        for s in &r.summary {
            assert_eq!(s.early_max_abs_dev, 0.0);
            assert_eq!(s.late_avg_abs_diff, Some(0.0));
        }
    }

    #[test]
    fn deviation_and_average() {
        let a = series(|t| t);
        let b = series(|t| t + 0.5);
        let r = compare_report(&a, &b, Windows::defaults_for(20.0).unwrap()).unwrap();
        let jz = r.get("Jz").unwrap();
        assert!((jz.early_max_abs_dev - 0.5).abs() < 1e-12);
        // average of t over [10, 20] is 15
        assert!((jz.late_avg_exact.unwrap() - 15.0).abs() < 1e-9);
        assert!((jz.late_avg_abs_diff.unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let pts: Vec<(f64, f64)> = (0..=10).map(|k| (k as f64, 3.0 * k as f64 + 1.0)).collect();
        assert!((time_average(&pts).unwrap() - 16.0).abs() < 1e-12);
        assert!(time_average(&pts[..1]).is_err());
    }

    #[test]
    fn rejects_mismatched_grids_and_windows() {
        let a = series(|t| t);
        let mut b = a.clone();
        b[3].t += 1e-3;
        assert!(compare_report(&a, &b, Windows::defaults_for(20.0).unwrap()).is_err());
        assert!(compare_report(&a, &a[..10], Windows::defaults_for(20.0).unwrap()).is_err());
        let w = Windows {
            early: Window::new(0.0, 10.0).unwrap(),
            late: Some(Window::new(10.0, 50.0).unwrap()),
        };
        assert!(compare_report(&a, &a, w).is_err());
        assert!(Window::new(2.0, 1.0).is_err());
    }

    #[test]
    fn default_windows_clip() {
        let w = Windows::defaults_for(10.0).unwrap();
        assert_eq!(
            w.early,
            Window {
                start: 0.0,
                end: 10.0
            }
        );
        assert!(w.late.is_none());
        let w = Windows::defaults_for(100.0).unwrap();
        assert_eq!(
            w.late,
            Some(Window {
                start: 10.0,
                end: 50.0
            })
        );
    }
}
