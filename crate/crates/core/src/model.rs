//! Model parameters and the static Hartree-Fock energy surface.
//!
//! Energies are in units of the level spacing `epsilon` and times in units of
//! `hbar / epsilon`. The coupling is given through the dimensionless
//! `chi = V (N - 1) / epsilon`; the bare interaction `V` is derived from it.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Particle number, level spacing and dimensionless coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_particles: usize,
    pub epsilon: f64,
    pub chi: f64,
}

impl ModelParams {
    /// Validated constructor.
    pub fn new(n_particles: usize, epsilon: f64, chi: f64) -> Result<Self> {
        let params = ModelParams {
            n_particles,
            epsilon,
            chi,
        };
        params.validate()?;
        Ok(params)
    }

    /// Shorthand with `epsilon = 1`.
    pub fn with_chi(n_particles: usize, chi: f64) -> Result<Self> {
        Self::new(n_particles, 1.0, chi)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::config(format!(
                "n_particles must be >= 2, got {}",
                self.n_particles
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::config(format!(
                "epsilon must be finite and > 0, got {}",
                self.epsilon
            )));
        }
        if !self.chi.is_finite() {
            return Err(Error::config(format!(
                "chi must be finite, got {}",
                self.chi
            )));
        }
        Ok(())
    }

    /// Bare two-body strength `V = chi * epsilon / (N - 1)`.
    pub fn interaction(&self) -> f64 {
        self.chi * self.epsilon / (self.n_particles as f64 - 1.0)
    }

    /// Quasi-spin `j = N / 2`.
    pub fn spin(&self) -> f64 {
        self.n_particles as f64 / 2.0
    }

    /// Negative couplings are accepted but lie outside the validated regime.
    pub fn is_validated_regime(&self) -> bool {
        self.chi >= 0.0
    }
}

/// A point of the Hartree-Fock energy surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HfPoint {
    pub alpha: f64,
    pub phi: f64,
    pub energy: f64,
}

/// Mean-field energy of the Slater determinant with angles `(alpha, phi)`:
///
/// `E = -(eps N / 2) [cos 2a + (chi / 2) sin^2 2a cos 2phi]`.
pub fn hf_energy(alpha: f64, phi: f64, params: &ModelParams) -> f64 {
    let n = params.n_particles as f64;
    let s = (2.0 * alpha).sin();
    -(params.epsilon * n / 2.0)
        * ((2.0 * alpha).cos() + 0.5 * params.chi * s * s * (2.0 * phi).cos())
}

/// Global minimizer with `alpha` reported in `[0, pi/2]`.
///
/// For `chi <= 1` the minimum sits at `alpha = 0`; above threshold it moves to
/// `cos 2a = 1 / chi` with `phi = 0`. The mirror solution `-alpha` is
/// degenerate and not reported. For `chi < 0` the `y` direction is favored
/// instead, giving `cos 2a = 1 / |chi|` at `phi = pi / 2`.
pub fn hf_minimize(params: &ModelParams) -> HfPoint {
    let chi = params.chi;
    let (alpha, phi) = if chi > 1.0 {
        (0.5 * (1.0 / chi).acos(), 0.0)
    } else if chi < -1.0 {
        (0.5 * (-1.0 / chi).acos(), FRAC_PI_2)
    } else {
        (0.0, 0.0)
    };
    HfPoint {
        alpha,
        phi,
        energy: hf_energy(alpha, phi, params),
    }
}

/// Closed-form minimum energy, `-(eps N / 4)(|chi| + 1/|chi|)` above threshold
/// and `-eps N / 2` otherwise.
pub fn hf_minimum_energy(params: &ModelParams) -> f64 {
    let n = params.n_particles as f64;
    let c = params.chi.abs();
    if c > 1.0 {
        -(params.epsilon * n / 4.0) * (c + 1.0 / c)
    } else {
        -(params.epsilon * n / 2.0)
    }
}

/// Uniform scan of the energy surface in `alpha` at fixed `phi`.
pub fn landscape_scan(
    params: &ModelParams,
    alpha_min: f64,
    alpha_max: f64,
    n_points: usize,
    phi: f64,
) -> Result<Vec<HfPoint>> {
    if n_points < 2 {
        return Err(Error::config(format!(
            "landscape scan needs at least 2 points, got {n_points}"
        )));
    }
    if !(alpha_min.is_finite() && alpha_max.is_finite() && alpha_min < alpha_max) {
        return Err(Error::config(format!(
            "landscape scan needs alpha_min < alpha_max, got [{alpha_min}, {alpha_max}]"
        )));
    }
    let step = (alpha_max - alpha_min) / (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|i| {
            let alpha = if i == n_points - 1 {
                alpha_max
            } else {
                alpha_min + i as f64 * step
            };
            HfPoint {
                alpha,
                phi,
                energy: hf_energy(alpha, phi, params),
            }
        })
        .collect())
}
