//! Exact, mean-field and stochastic mean-field dynamics of the
//! Lipkin-Meshkov-Glick model started from the symmetric state `|j, -j>`.
//!
//! * [`model`]: parameters and the static Hartree-Fock energy surface.
//! * [`exact`]: spectral propagation in the `j = N/2` multiplet.
//! * [`meanfield`]: the TDHF equations of motion and fixed-step integrators.
//! * [`smf`]: sampled initial fluctuations and ensemble moments.
//! * [`io`], [`config`], [`compare`], [`cli`]: the command-line driver.

// `!(x < y)` is used on purpose so that NaN falls into the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod compare;
pub mod config;
pub mod error;
pub mod exact;
pub mod io;
pub mod meanfield;
pub mod model;
pub mod smf;
pub mod verify;

pub use error::{Error, Result};
pub use exact::{exact_timeseries, ExactObservables, ExactSolver};
pub use meanfield::{IntegratorConfig, Scheme, SpinVector};
pub use model::{hf_energy, hf_minimize, landscape_scan, HfPoint, ModelParams};
pub use smf::{run_ensemble, EnsembleConfig, EnsembleRun, EnsembleStats};
