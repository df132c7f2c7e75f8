//! The `lmg` command-line driver.
//!
//! Exit codes: 0 on success, 1 for configuration errors, 2 for numerical failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::compare::{compare_report, ComparisonReport};
use crate::config::{
    parse_alpha_range, parse_window, CompareSection, ConfigFile, EnsembleSection,
    IntegratorSection, ModelSection, OutputSection, RunConfig, ScanSection, Seed, Solver,
    TdhfSection,
};
use crate::error::{Error, Result};
use crate::exact::exact_timeseries;
use crate::io::{self, Format, Metadata, TimeseriesRow};
use crate::meanfield::{coherent_dispersions, integrate_trajectory, mf_conserved, Scheme};
use crate::model::{landscape_scan, HfPoint};
use crate::smf::run_ensemble;
use crate::verify;

#[derive(Debug, Parser)]
#[command(
    name = "lmg",
    version,
    about = "Exact, TDHF and stochastic mean-field dynamics of the LMG model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hartree-Fock energy as a function of alpha.
    HfScan {
        #[command(flatten)]
        common: CommonArgs,
        /// Azimuthal angle of the slice (default 0).
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<f64>,
        /// MIN:MAX:COUNT grid in alpha (default -pi/2:pi/2:401).
        #[arg(long, allow_hyphen_values = true)]
        alpha_range: Option<String>,
    },
    /// Exact evolution of |j,-j>.
    Exact {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// One deterministic mean-field trajectory.
    Tdhf {
        #[command(flatten)]
        common: CommonArgs,
        /// Initial jx (default 0, the symmetric saddle).
        #[arg(long, allow_hyphen_values = true)]
        jx0: Option<f64>,
        /// Initial jy (default 0).
        #[arg(long, allow_hyphen_values = true)]
        jy0: Option<f64>,
    },
    /// Stochastic mean-field ensemble.
    Smf {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Exact and ensemble runs on one grid plus a deviation report.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// START:END for instantaneous deviations (default 0:10).
        #[arg(long)]
        early_window: Option<String>,
        /// START:END for time averages (default 10:50).
        #[arg(long)]
        late_window: Option<String>,
    },
    /// Run the built-in invariant checks.
    Verify,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Particle number N (default 40).
    #[arg(long)]
    n: Option<usize>,
    /// Scaled coupling chi (required).
    #[arg(long, allow_hyphen_values = true)]
    chi: Option<f64>,
    /// Single-particle splitting (default 1).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Integrator step (default 0.01).
    #[arg(long)]
    dt: Option<f64>,
    /// Final time (default 50).
    #[arg(long)]
    t_end: Option<f64>,
    /// Output spacing, a multiple of dt (default 0.1).
    #[arg(long)]
    out_interval: Option<f64>,
    /// Ensemble size (default 100000).
    #[arg(long)]
    traj: Option<u64>,
    /// Master seed (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// rk2 or rk4 (default rk2).
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    /// Pair each trajectory with its (jx, jy) mirror.
    #[arg(long)]
    antithetic: bool,
    /// csv or json (default csv).
    #[arg(long, value_parser = parse_format)]
    format: Option<Format>,
    /// Output file (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for ensembles (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Also write a gnuplot script for the output file.
    #[arg(long)]
    plot_script: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl CommonArgs {
    fn to_file(&self, solver: Solver) -> ConfigFile {
        ConfigFile {
            solver: Some(solver),
            model: ModelSection {
                n: self.n,
                chi: self.chi,
                epsilon: self.epsilon,
            },
            integrator: IntegratorSection {
                scheme: self.scheme,
                dt: self.dt,
                t_end: self.t_end,
                out_interval: self.out_interval,
            },
            ensemble: EnsembleSection {
                trajectories: self.traj,
                seed: self.seed.map(Seed),
                antithetic: self.antithetic.then_some(true),
                threads: self.threads,
            },
            output: OutputSection {
                format: self.format,
                path: self.out.clone(),
                plot_script: self.plot_script.clone(),
            },
            ..Default::default()
        }
    }
}

fn build_config(common: &CommonArgs, flags: ConfigFile) -> Result<RunConfig> {
    let file = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    file.overlay(flags).resolve()
}

/// Result of one run, before it is written anywhere.
#[derive(Debug, Clone)]
pub enum RunOutput {
    Series {
        rows: Vec<TimeseriesRow>,
        metadata: Metadata,
    },
    Landscape {
        points: Vec<HfPoint>,
        metadata: Metadata,
    },
    Comparison {
        exact: Vec<TimeseriesRow>,
        smf: Vec<TimeseriesRow>,
        report: ComparisonReport,
        metadata: Metadata,
    },
}

fn metadata(cfg: &RunConfig) -> Metadata {
    let mut m = Metadata::new(cfg.solver.name(), cfg.params);
    if matches!(cfg.solver, Solver::Tdhf | Solver::Smf | Solver::Compare) {
        m.scheme = Some(cfg.integrator.scheme.to_string());
        m.dt = Some(cfg.integrator.dt);
    }
    if matches!(cfg.solver, Solver::Smf | Solver::Compare) {
        m.seed = Some(cfg.ensemble.master_seed);
        m.n_trajectories = Some(cfg.ensemble.n_trajectories);
        m.antithetic = Some(cfg.ensemble.antithetic);
    }
    m
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::config(format!("cannot start {n} worker threads: {e}"))),
    }
}

fn smf_rows(cfg: &RunConfig) -> Result<Vec<TimeseriesRow>> {
    let run = with_pool(cfg.threads, || {
        run_ensemble(&cfg.params, &cfg.ensemble_config())
    })??;
    Ok(run.stats.iter().map(TimeseriesRow::from).collect())
}

fn exact_rows(cfg: &RunConfig) -> Result<Vec<TimeseriesRow>> {
    Ok(exact_timeseries(&cfg.params, &cfg.sample_times())?
        .iter()
        .map(TimeseriesRow::from)
        .collect())
}

/// Executes a resolved configuration.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let metadata = metadata(cfg);
    match cfg.solver {
        Solver::HfScan => Ok(RunOutput::Landscape {
            points: landscape_scan(
                &cfg.params,
                cfg.scan.alpha_min,
                cfg.scan.alpha_max,
                cfg.scan.n_points,
                cfg.scan.phi,
            )?,
            metadata,
        }),
        Solver::Exact => Ok(RunOutput::Series {
            rows: exact_rows(cfg)?,
            metadata,
        }),
        Solver::Tdhf => {
            let n = cfg.params.n_particles as f64;
            let j0 = cfg.tdhf_initial()?;
            let traj = integrate_trajectory(j0, &cfg.params, &cfg.integrator, &cfg.sample_times())?;
            let rows = traj
                .iter()
                .map(|(t, j)| {
                    TimeseriesRow::full(
                        *t,
                        j.to_array().map(|c| n * c),
                        coherent_dispersions(*j, cfg.params.n_particles),
                        n * mf_conserved(*j, &cfg.params).energy_per_particle,
                    )
                })
                .collect();
            Ok(RunOutput::Series { rows, metadata })
        }
        Solver::Smf => Ok(RunOutput::Series {
            rows: smf_rows(cfg)?,
            metadata,
        }),
        Solver::Compare => {
            let exact = exact_rows(cfg)?;
            let smf = smf_rows(cfg)?;
            let report = compare_report(&exact, &smf, cfg.windows_or_default()?)?;
            Ok(RunOutput::Comparison {
                exact,
                smf,
                report,
                metadata,
            })
        }
    }
}

fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn gnuplot_series(data: &Path, title: &str) -> String {
    let d = data.display();
    format!(
        "# gnuplot script for {d}\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 't'\n\
         set multiplot layout 2,1 title '{title}'\n\
         plot '{d}' using 1:4 with lines\n\
         plot '{d}' using 1:5 with lines, '' using 1:6 with lines, '' using 1:7 with lines\n\
         unset multiplot\n"
    )
}

fn gnuplot_landscape(data: &Path, title: &str) -> String {
    let d = data.display();
    format!(
        "# gnuplot script for {d}\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'alpha'\n\
         set title '{title}'\n\
         plot '{d}' using 1:3 with lines\n"
    )
}

fn format_summary(report: &ComparisonReport) -> String {
    let mut s =
        String::from("observable  early_max_dev  late_avg_exact  late_avg_smf  late_abs_diff\n");
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
    for o in &report.summary {
        s.push_str(&format!(
            "{:<10}  {:>13.6}  {:>14}  {:>12}  {:>13}\n",
            o.name,
            o.early_max_abs_dev,
            opt(o.late_avg_exact),
            opt(o.late_avg_smf),
            opt(o.late_avg_abs_diff)
        ));
    }
    s
}

/// Writes `output` to the configured destination (stdout when no path is set).
pub fn write_output(cfg: &RunConfig, output: &RunOutput, stdout: &mut dyn Write) -> Result<()> {
    if cfg.plot_script.is_some() && cfg.output_path.is_none() {
        return Err(Error::config("--plot-script needs --out"));
    }
    let title = format!("N={} chi={}", cfg.params.n_particles, cfg.params.chi);
    let emit = |text: &str, path: Option<&Path>, stdout: &mut dyn Write| -> Result<()> {
        match path {
            Some(p) => io::write_text(p, text),
            None => stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e)),
        }
    };
    match output {
        RunOutput::Series { rows, metadata } => {
            let text = io::render_timeseries(rows, cfg.format, metadata)?;
            emit(&text, cfg.output_path.as_deref(), stdout)?;
            if let (Some(script), Some(data)) = (&cfg.plot_script, &cfg.output_path) {
                io::write_text(script, &gnuplot_series(data, &title))?;
            }
        }
        RunOutput::Landscape { points, metadata } => {
            let text = io::render_landscape(points, cfg.format, metadata)?;
            emit(&text, cfg.output_path.as_deref(), stdout)?;
            if let (Some(script), Some(data)) = (&cfg.plot_script, &cfg.output_path) {
                io::write_text(script, &gnuplot_landscape(data, &title))?;
            }
        }
        RunOutput::Comparison {
            exact,
            smf,
            report,
            metadata,
        } => {
            if let Some(path) = &cfg.output_path {
                let ext = cfg.format.extension();
                let mut exact_meta = metadata.clone();
                exact_meta.solver = "exact".into();
                let mut smf_meta = metadata.clone();
                smf_meta.solver = "smf".into();
                let exact_path = sibling(path, "exact", ext);
                let smf_path = sibling(path, "smf", ext);
                io::emit_timeseries(exact, cfg.format, &exact_path, &exact_meta)?;
                io::emit_timeseries(smf, cfg.format, &smf_path, &smf_meta)?;
                let json = serde_json::json!({ "metadata": metadata, "report": report });
                let text = serde_json::to_string_pretty(&json)
                    .map_err(|e| Error::parse(e.to_string()))?
                    + "\n";
                io::write_text(path, &text)?;
                if let Some(script) = &cfg.plot_script {
                    let mut s = gnuplot_series(&smf_path, &title);
                    s.push_str(&gnuplot_series(&exact_path, &title));
                    io::write_text(script, &s)?;
                }
            }
            emit(&format_summary(report), None, stdout)?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<()> {
    let (common, mut flags) = match command {
        Command::Verify => {
            let checks = verify::run_all();
            let mut failed = Vec::new();
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                writeln!(stdout, "{tag}  {}  {}", c.name, c.detail)
                    .map_err(|e| Error::io("<stdout>", e))?;
                if !c.passed {
                    failed.push(c.name);
                }
            }
            if failed.is_empty() {
                return Ok(());
            }
            return Err(Error::Eigen(format!(
                "verification failed: {}",
                failed.join(", ")
            )));
        }
        Command::HfScan {
            common,
            phi,
            alpha_range,
        } => {
            let mut f = common.to_file(Solver::HfScan);
            f.scan = ScanSection {
                phi,
                ..Default::default()
            };
            if let Some(spec) = alpha_range {
                let (lo, hi, n) = parse_alpha_range(&spec)?;
                f.scan.alpha_min = Some(lo);
                f.scan.alpha_max = Some(hi);
                f.scan.points = Some(n);
            }
            (common, f)
        }
        Command::Exact { common } => {
            let f = common.to_file(Solver::Exact);
            (common, f)
        }
        Command::Tdhf { common, jx0, jy0 } => {
            let mut f = common.to_file(Solver::Tdhf);
            f.tdhf = TdhfSection { jx0, jy0 };
            (common, f)
        }
        Command::Smf { common } => {
            let f = common.to_file(Solver::Smf);
            (common, f)
        }
        Command::Compare {
            common,
            early_window,
            late_window,
        } => {
            let mut f = common.to_file(Solver::Compare);
            f.compare = CompareSection {
                early: early_window.as_deref().map(parse_window).transpose()?,
                late: late_window.as_deref().map(parse_window).transpose()?,
            };
            (common, f)
        }
    };
    if flags.solver.is_none() {
        flags.solver = Some(Solver::Exact);
    }
    let cfg = build_config(&common, flags)?;
    if !cfg.params.is_validated_regime() {
        eprintln!("warning: chi < 0 lies outside the validated regime");
    }
    let output = run(&cfg)?;
    write_output(&cfg, &output, stdout)
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("{first} (see --help)");
            return 1;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match dispatch(cli.command, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
