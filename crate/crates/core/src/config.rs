//! Run configuration: defaults, the TOML config file and flag overrides.
//!
//! Precedence is flags over file over built-in defaults. The defaults follow
//! the reference setup: `N = 40`, RK2 with `dt = 0.01`, `10^5` trajectories,
//! output every `0.1`.

use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::compare::{Window, Windows};
use crate::error::{Error, Result};
use crate::io::Format;
use crate::meanfield::{IntegratorConfig, Scheme, SpinVector};
use crate::model::ModelParams;
use crate::smf::EnsembleConfig;

/// Couplings of the three reference runs: below, above and far above threshold.
pub const CHI_PRESETS: [f64; 3] = [0.5, 1.8, 5.0];

pub const DEFAULT_N: usize = 40;
pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_T_END: f64 = 50.0;
pub const DEFAULT_OUT_INTERVAL: f64 = 0.1;
pub const DEFAULT_TRAJECTORIES: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Exact,
    Tdhf,
    Smf,
    Compare,
    HfScan,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Exact => "exact",
            Solver::Tdhf => "tdhf",
            Solver::Smf => "smf",
            Solver::Compare => "compare",
            Solver::HfScan => "hf-scan",
        }
    }

    fn uses_ensemble(self) -> bool {
        matches!(self, Solver::Smf | Solver::Compare)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSettings {
    pub n_trajectories: u64,
    pub master_seed: u64,
    pub antithetic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub n_points: usize,
    pub phi: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            alpha_min: -std::f64::consts::FRAC_PI_2,
            alpha_max: std::f64::consts::FRAC_PI_2,
            n_points: 401,
            phi: 0.0,
        }
    }
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: Solver,
    pub params: ModelParams,
    pub integrator: IntegratorConfig,
    pub output_interval: f64,
    pub ensemble: EnsembleSettings,
    /// Worker threads for the ensemble; `None` uses all cores.
    pub threads: Option<usize>,
    pub scan: ScanSettings,
    /// Initial `(jx, jy)` of a single TDHF trajectory (`jz` follows from `|j| = 1/2`).
    pub tdhf_start: (f64, f64),
    pub windows: Option<Windows>,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    pub plot_script: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.integrator.validate()?;
        let iv = self.output_interval;
        if !(iv.is_finite() && iv > 0.0) {
            return Err(Error::config(format!(
                "--out-interval must be > 0, got {iv}"
            )));
        }
        let ratio = iv / self.integrator.dt;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::config(format!(
                "--out-interval {iv} is not an integer multiple of --dt {}",
                self.integrator.dt
            )));
        }
        if self.solver.uses_ensemble() {
            self.ensemble_config().validate()?;
        }
        if self.threads == Some(0) {
            return Err(Error::config("--threads must be >= 1"));
        }
        if self.solver == Solver::HfScan {
            let s = &self.scan;
            if s.n_points < 2 || !(s.alpha_min < s.alpha_max) || !s.phi.is_finite() {
                return Err(Error::config(format!(
                    "invalid alpha range {}:{}:{}",
                    s.alpha_min, s.alpha_max, s.n_points
                )));
            }
        }
        if self.solver == Solver::Tdhf {
            self.tdhf_initial()?;
        }
        if let (Solver::Compare, Some(w)) = (self.solver, self.windows) {
            let t_end = self.integrator.t_end;
            for win in std::iter::once(w.early).chain(w.late) {
                if win.start < 0.0 || win.end > t_end {
                    return Err(Error::config(format!(
                        "window [{}, {}] lies outside [0, {t_end}]",
                        win.start, win.end
                    )));
                }
            }
        }
        Ok(())
    }

    /// Output times `0, dt_out, 2 dt_out, ...` up to `t_end`.
    pub fn sample_times(&self) -> Vec<f64> {
        let iv = self.output_interval;
        let n = (self.integrator.t_end / iv + 1e-9).floor() as usize;
        (0..=n).map(|k| k as f64 * iv).collect()
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            n_trajectories: self.ensemble.n_trajectories,
            master_seed: self.ensemble.master_seed,
            integrator: self.integrator,
            sample_times: self.sample_times(),
            antithetic: self.ensemble.antithetic,
        }
    }

    pub fn windows_or_default(&self) -> Result<Windows> {
        match self.windows {
            Some(w) => Ok(w),
            None => Windows::defaults_for(self.integrator.t_end),
        }
    }

    pub fn tdhf_initial(&self) -> Result<SpinVector> {
        let (jx, jy) = self.tdhf_start;
        let perp = jx * jx + jy * jy;
        if !(jx.is_finite() && jy.is_finite()) || perp > 0.25 {
            return Err(Error::config(format!(
                "TDHF start (jx, jy) = ({jx}, {jy}) must satisfy jx^2 + jy^2 <= 1/4"
            )));
        }
        Ok(SpinVector::new(jx, jy, -(0.25 - perp).sqrt()))
    }

    /// Every field spelled out, suitable for writing back to disk.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            solver: Some(self.solver),
            model: ModelSection {
                n: Some(self.params.n_particles),
                chi: Some(self.params.chi),
                epsilon: Some(self.params.epsilon),
            },
            integrator: IntegratorSection {
                scheme: Some(self.integrator.scheme),
                dt: Some(self.integrator.dt),
                t_end: Some(self.integrator.t_end),
                out_interval: Some(self.output_interval),
            },
            ensemble: EnsembleSection {
                trajectories: Some(self.ensemble.n_trajectories),
                seed: Some(Seed(self.ensemble.master_seed)),
                antithetic: Some(self.ensemble.antithetic),
                threads: self.threads,
            },
            scan: ScanSection {
                alpha_min: Some(self.scan.alpha_min),
                alpha_max: Some(self.scan.alpha_max),
                points: Some(self.scan.n_points),
                phi: Some(self.scan.phi),
            },
            tdhf: TdhfSection {
                jx0: Some(self.tdhf_start.0),
                jy0: Some(self.tdhf_start.1),
            },
            compare: CompareSection {
                early: self.windows.map(|w| [w.early.start, w.early.end]),
                late: self.windows.and_then(|w| w.late).map(|l| [l.start, l.end]),
            },
            output: OutputSection {
                format: Some(self.format),
                path: self.output_path.clone(),
                plot_script: self.plot_script.clone(),
            },
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.to_file()).map_err(|e| Error::parse(e.to_string()))
    }
}

/// Seeds are full `u64`; values beyond the TOML integer range are stored as strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed(pub u64);

impl Serialize for Seed {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match i64::try_from(self.0) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&self.0.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Seed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(v) => u64::try_from(v)
                .map(Seed)
                .map_err(|_| serde::de::Error::custom("seed must be non-negative")),
            Repr::Str(s) => s
                .parse()
                .map(Seed)
                .map_err(|_| serde::de::Error::custom(format!("invalid seed '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_interval: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<Seed>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub antithetic: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdhfSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jx0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jy0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub early: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub late: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plot_script: Option<PathBuf>,
}

/// The on-disk configuration: every key optional.
///
/// ```toml
/// solver = "smf"
/// [model]
/// n = 40
/// chi = 5.0
/// [integrator]
/// scheme = "rk2"
/// dt = 0.01
/// t_end = 50.0
/// out_interval = 0.1
/// [ensemble]
/// trajectories = 100000
/// seed = 42
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<Solver>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub tdhf: TdhfSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn window(pair: [f64; 2]) -> Result<Window> {
    Window::new(pair[0], pair[1])
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(format!("config: {}", e.message())))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::parse(format!("{}: {e}", path.display())))
    }

    /// Overlays every key set in `other` on top of `self`.
    pub fn overlay(mut self, other: ConfigFile) -> ConfigFile {
        macro_rules! take {
            ($($sec:ident . $field:ident),* $(,)?) => {
                $( if other.$sec.$field.is_some() { self.$sec.$field = other.$sec.$field; } )*
            };
        }
        if other.solver.is_some() {
            self.solver = other.solver;
        }
        take!(
            model.n,
            model.chi,
            model.epsilon,
            integrator.scheme,
            integrator.dt,
            integrator.t_end,
            integrator.out_interval,
            ensemble.trajectories,
            ensemble.seed,
            ensemble.antithetic,
            ensemble.threads,
            scan.alpha_min,
            scan.alpha_max,
            scan.points,
            scan.phi,
            tdhf.jx0,
            tdhf.jy0,
            compare.early,
            compare.late,
            output.format,
            output.path,
            output.plot_script,
        );
        self
    }

    /// Fills unset keys with defaults and validates the result.
    pub fn resolve(&self) -> Result<RunConfig> {
        let solver = self.solver.ok_or_else(|| {
            Error::config("no solver selected (use a subcommand or `solver = ...`)")
        })?;
        let chi = self
            .model
            .chi
            .ok_or_else(|| Error::config("coupling not set (use --chi or [model] chi)"))?;
        let params = ModelParams::new(
            self.model.n.unwrap_or(DEFAULT_N),
            self.model.epsilon.unwrap_or(1.0),
            chi,
        )?;
        let integrator = IntegratorConfig::new(
            self.integrator.scheme.unwrap_or_default(),
            self.integrator.dt.unwrap_or(DEFAULT_DT),
            self.integrator.t_end.unwrap_or(DEFAULT_T_END),
        )?;
        let scan_default = ScanSettings::default();
        let windows = match (self.compare.early, self.compare.late) {
            (None, None) => None,
            (Some(early), late) => Some(Windows {
                early: window(early)?,
                late: late.map(window).transpose()?,
            }),
            (None, Some(_)) => {
                return Err(Error::config("a late window needs an early window as well"));
            }
        };
        let cfg = RunConfig {
            solver,
            params,
            integrator,
            output_interval: self.integrator.out_interval.unwrap_or(DEFAULT_OUT_INTERVAL),
            ensemble: EnsembleSettings {
                n_trajectories: self.ensemble.trajectories.unwrap_or(DEFAULT_TRAJECTORIES),
                master_seed: self.ensemble.seed.map_or(0, |s| s.0),
                antithetic: self.ensemble.antithetic.unwrap_or(false),
            },
            threads: self.ensemble.threads,
            scan: ScanSettings {
                alpha_min: self.scan.alpha_min.unwrap_or(scan_default.alpha_min),
                alpha_max: self.scan.alpha_max.unwrap_or(scan_default.alpha_max),
                n_points: self.scan.points.unwrap_or(scan_default.n_points),
                phi: self.scan.phi.unwrap_or(scan_default.phi),
            },
            tdhf_start: (self.tdhf.jx0.unwrap_or(0.0), self.tdhf.jy0.unwrap_or(0.0)),
            windows,
            output_path: self.output.path.clone(),
            format: self.output.format.unwrap_or_default(),
            plot_script: self.output.plot_script.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `MIN:MAX:COUNT`, e.g. `-1.5708:1.5708:400`.
pub fn parse_alpha_range(spec: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(Error::parse(format!(
            "alpha range '{spec}' must look like MIN:MAX:COUNT"
        )));
    };
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| Error::parse(format!("alpha range: bad minimum '{lo}'")))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| Error::parse(format!("alpha range: bad maximum '{hi}'")))?;
    let n: usize = n
        .trim()
        .parse()
        .map_err(|_| Error::parse(format!("alpha range: bad point count '{n}'")))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::parse(format!(
            "alpha range needs finite MIN < MAX, got {lo}:{hi}"
        )));
    }
    if n < 2 {
        return Err(Error::parse(format!(
            "alpha range needs at least 2 points, got {n}"
        )));
    }
    Ok((lo, hi, n))
}

/// Parses `START:END`.
pub fn parse_window(spec: &str) -> Result<[f64; 2]> {
    let Some((a, b)) = spec.split_once(':') else {
        return Err(Error::parse(format!(
            "window '{spec}' must look like START:END"
        )));
    };
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::parse(format!("window: '{s}' is not a number")))
    };
    let w = [parse(a)?, parse(b)?];
    Window::new(w[0], w[1]).map_err(|e| Error::parse(e.to_string()))?;
    Ok(w)
}
