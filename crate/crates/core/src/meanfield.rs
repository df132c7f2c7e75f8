//! Time-dependent Hartree-Fock evolution of the scaled quasi-spin vector.
//!
//! With `j_i = <J_i> / N` the mean-field flow reads
//!
//! ```text
//! djx/dt = eps (-jy + 2 chi jy jz)
//! djy/dt = eps ( jx + 2 chi jx jz)
//! djz/dt = -4 eps chi jx jy
//! ```
//!
//! It conserves the spin length `|j|^2` and the energy per particle
//! `eps (jz - chi (jx^2 - jy^2))`.

use std::ops::{Add, Mul, Neg};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Scaled quasi-spin expectation `<J> / N` of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpinVector {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

impl SpinVector {
    pub const fn new(jx: f64, jy: f64, jz: f64) -> Self {
        SpinVector { jx, jy, jz }
    }

    /// The symmetric configuration `(0, 0, -1/2)` reached by `|j, -j>`.
    pub const fn saddle() -> Self {
        SpinVector::new(0.0, 0.0, -0.5)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.jx, self.jy, self.jz]
    }

    pub fn is_finite(&self) -> bool {
        self.jx.is_finite() && self.jy.is_finite() && self.jz.is_finite()
    }

    /// Parity image `(-jx, -jy, jz)`.
    pub fn mirrored(self) -> Self {
        SpinVector::new(-self.jx, -self.jy, self.jz)
    }
}

impl Add for SpinVector {
    type Output = SpinVector;
    fn add(self, o: SpinVector) -> SpinVector {
        SpinVector::new(self.jx + o.jx, self.jy + o.jy, self.jz + o.jz)
    }
}

impl Mul<SpinVector> for f64 {
    type Output = SpinVector;
    fn mul(self, v: SpinVector) -> SpinVector {
        SpinVector::new(self * v.jx, self * v.jy, self * v.jz)
    }
}

impl Neg for SpinVector {
    type Output = SpinVector;
    fn neg(self) -> SpinVector {
        SpinVector::new(-self.jx, -self.jy, -self.jz)
    }
}

/// Time derivative of `j` under the mean-field flow.
#[inline]
pub fn mf_rhs(j: SpinVector, params: &ModelParams) -> SpinVector {
    let eps = params.epsilon;
    let chi = params.chi;
    SpinVector::new(
        eps * (-j.jy + 2.0 * chi * j.jy * j.jz),
        eps * (j.jx + 2.0 * chi * j.jx * j.jz),
        -4.0 * eps * chi * j.jx * j.jy,
    )
}

/// Quantities conserved by the exact flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conserved {
    pub spin_length_sq: f64,
    /// Mean-field energy per particle, `eps (jz - chi (jx^2 - jy^2))`.
    pub energy_per_particle: f64,
}

impl Conserved {
    /// Componentwise absolute difference.
    pub fn drift_from(&self, reference: &Conserved) -> (f64, f64) {
        (
            (self.spin_length_sq - reference.spin_length_sq).abs(),
            (self.energy_per_particle - reference.energy_per_particle).abs(),
        )
    }
}

pub fn mf_conserved(j: SpinVector, params: &ModelParams) -> Conserved {
    Conserved {
        spin_length_sq: j.jx * j.jx + j.jy * j.jy + j.jz * j.jz,
        energy_per_particle: params.epsilon * (j.jz - params.chi * (j.jx * j.jx - j.jy * j.jy)),
    }
}

/// Dispersions of the product (coherent) state carrying mean spin `j`:
/// `N (1/4 - j_i^2)`.
pub fn coherent_dispersions(j: SpinVector, n_particles: usize) -> [f64; 3] {
    let n = n_particles as f64;
    j.to_array().map(|c| n * (0.25 - c * c))
}

/// Fixed-step explicit Runge-Kutta schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Heun's method (trapezoidal predictor-corrector), second order.
    #[default]
    Rk2,
    /// Classical fourth-order Runge-Kutta.
    Rk4,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk2" | "heun" => Ok(Scheme::Rk2),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(Error::config(format!(
                "unknown scheme '{other}' (expected rk2 or rk4)"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Rk2 => "rk2",
            Scheme::Rk4 => "rk4",
        })
    }
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::Rk2 => 2,
            Scheme::Rk4 => 4,
        }
    }

    #[inline]
    pub fn step(self, y: SpinVector, h: f64, params: &ModelParams) -> SpinVector {
        match self {
            Scheme::Rk2 => {
                let k1 = mf_rhs(y, params);
                let k2 = mf_rhs(y + h * k1, params);
                y + (0.5 * h) * (k1 + k2)
            }
            Scheme::Rk4 => {
                let k1 = mf_rhs(y, params);
                let k2 = mf_rhs(y + (0.5 * h) * k1, params);
                let k3 = mf_rhs(y + (0.5 * h) * k2, params);
                let k4 = mf_rhs(y + h * k3, params);
                y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            }
        }
    }
}

// Relative slack used when deciding whether a time is a multiple of dt.
const GRID_TOL: f64 = 1e-9;

/// Step size and horizon of a fixed-step integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            scheme: Scheme::Rk2,
            dt: 0.01,
            t_end: 50.0,
        }
    }
}

impl IntegratorConfig {
    pub fn new(scheme: Scheme, dt: f64, t_end: f64) -> Result<Self> {
        let cfg = IntegratorConfig { scheme, dt, t_end };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config(format!(
                "dt must be finite and > 0, got {}",
                self.dt
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::config(format!(
                "t_end must be finite and >= 0, got {}",
                self.t_end
            )));
        }
        Ok(())
    }

    /// `ceil(t_end / dt)`, treating ratios within rounding of an integer as exact.
    pub fn n_steps(&self) -> usize {
        let ratio = self.t_end / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= GRID_TOL * nearest.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        }
    }

    /// Time after `k` steps; the last step is shortened to land on `t_end`.
    pub fn step_time(&self, k: usize) -> f64 {
        if k >= self.n_steps() {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }

    /// True when `t` coincides with a grid point (a multiple of `dt`, or `t_end`).
    pub fn is_on_grid(&self, t: f64) -> bool {
        if t == self.t_end {
            return true;
        }
        let ratio = t / self.dt;
        (ratio - ratio.round()).abs() <= GRID_TOL * ratio.abs().max(1.0)
    }

    /// Nearest step index for each sample time.
    pub fn sample_steps(&self, sample_times: &[f64]) -> Result<Vec<usize>> {
        let n = self.n_steps();
        let slack = GRID_TOL * self.t_end.max(self.dt);
        let mut prev = f64::NEG_INFINITY;
        sample_times
            .iter()
            .map(|&t| {
                if !t.is_finite() || t < -slack || t > self.t_end + slack {
                    return Err(Error::config(format!(
                        "sample time {t} outside [0, {}]",
                        self.t_end
                    )));
                }
                if t < prev {
                    return Err(Error::config("sample times must be sorted"));
                }
                prev = t;
                if t >= self.t_end - slack {
                    return Ok(n);
                }
                Ok(((t / self.dt).round().max(0.0) as usize).min(n))
            })
            .collect()
    }

    /// Rejects sample times that are not grid points.
    pub fn check_aligned(&self, sample_times: &[f64]) -> Result<()> {
        match sample_times.iter().find(|&&t| !self.is_on_grid(t)) {
            Some(t) => Err(Error::config(format!(
                "sample time {t} is not an integer multiple of dt = {}",
                self.dt
            ))),
            None => Ok(()),
        }
    }
}

/// Integrates from `j0`, calling `record(i, state)` for each `sample_steps[i]`.
///
/// `sample_steps` must be non-decreasing (see [`IntegratorConfig::sample_steps`]).
pub fn integrate_with<F>(
    j0: SpinVector,
    params: &ModelParams,
    cfg: &IntegratorConfig,
    sample_steps: &[usize],
    mut record: F,
) -> Result<SpinVector>
where
    F: FnMut(usize, &SpinVector),
{
    let n = cfg.n_steps();
    let mut next = 0;
    let mut y = j0;
    if !y.is_finite() {
        return Err(Error::NonFinite {
            step: 0,
            time: 0.0,
            state: y.to_array(),
        });
    }
    while next < sample_steps.len() && sample_steps[next] == 0 {
        record(next, &y);
        next += 1;
    }
    let last_needed = sample_steps.last().copied().unwrap_or(0).min(n);
    for k in 1..=last_needed {
        let h = cfg.step_time(k) - cfg.step_time(k - 1);
        y = cfg.scheme.step(y, h, params);
        if !y.is_finite() {
            return Err(Error::NonFinite {
                step: k,
                time: cfg.step_time(k),
                state: y.to_array(),
            });
        }
        while next < sample_steps.len() && sample_steps[next] == k {
            record(next, &y);
            next += 1;
        }
    }
    Ok(y)
}

/// Fixed-step trajectory sampled at `sample_times`.
pub fn integrate_trajectory(
    j0: SpinVector,
    params: &ModelParams,
    cfg: &IntegratorConfig,
    sample_times: &[f64],
) -> Result<Vec<(f64, SpinVector)>> {
    cfg.validate()?;
    let steps = cfg.sample_steps(sample_times)?;
    let mut out = Vec::with_capacity(sample_times.len());
    integrate_with(j0, params, cfg, &steps, |i, y| {
        out.push((sample_times[i], *y))
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn params(chi: f64) -> ModelParams {
        ModelParams::with_chi(40, chi).unwrap()
    }

    #[test]
    fn rhs_examples() {
        for chi in [0.0, 0.5, 5.0, -2.0] {
            let r = mf_rhs(SpinVector::saddle(), &params(chi));
            assert!(r.jx == 0.0 && r.jy == 0.0 && r.jz == 0.0);
        }
        let r = mf_rhs(SpinVector::new(0.3, -0.2, 0.7), &params(0.0));
        assert_eq!(r, SpinVector::new(0.2, 0.3, 0.0));
        let r = mf_rhs(SpinVector::new(0.1, 0.0, -0.4), &params(5.0));
        assert_eq!(r.jx, 0.0);
        assert!((r.jy + 0.3).abs() < 1e-15);
        assert_eq!(r.jz, 0.0);
    }

    // Literal matrix product from the printed equations of motion.
    fn matrix_rhs(j: SpinVector, chi: f64, eps: f64) -> SpinVector {
        let m = [
            [0.0, -1.0 + chi * j.jz, chi * j.jy],
            [1.0 + chi * j.jz, 0.0, chi * j.jx],
            [-2.0 * chi * j.jy, -2.0 * chi * j.jx, 0.0],
        ];
        let v = j.to_array();
        let row = |r: usize| eps * (m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2]);
        SpinVector::new(row(0), row(1), row(2))
    }

    proptest! {
        #[test]
        fn rhs_matches_matrix_form(jx in -1.0..1.0f64, jy in -1.0..1.0f64, jz in -1.0..1.0f64,
                                   chi in -10.0..10.0f64, eps in 0.1..3.0f64) {
            let p = ModelParams::new(40, eps, chi).unwrap();
            let j = SpinVector::new(jx, jy, jz);
            let a = mf_rhs(j, &p);
            let b = matrix_rhs(j, chi, eps);
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn flow_commutes_with_parity(jx in -1.0..1.0f64, jy in -1.0..1.0f64, jz in -1.0..1.0f64,
                                     chi in -10.0..10.0f64) {
            let p = params(chi);
            let j = SpinVector::new(jx, jy, jz);
            let lhs = mf_rhs(j.mirrored(), &p);
            let rhs = mf_rhs(j, &p).mirrored();
            for (x, y) in lhs.to_array().iter().zip(rhs.to_array()) {
                prop_assert!((x - y).abs() <= 1e-14);
            }
        }

        #[test]
        fn conserved_quantities_have_zero_rate(jx in -1.0..1.0f64, jy in -1.0..1.0f64,
                                               jz in -1.0..1.0f64, chi in -10.0..10.0f64) {
            let p = params(chi);
            let j = SpinVector::new(jx, jy, jz);
            let d = mf_rhs(j, &p);
            let dlen = 2.0 * (j.jx * d.jx + j.jy * d.jy + j.jz * d.jz);
            let de = d.jz - chi * 2.0 * (j.jx * d.jx - j.jy * d.jy);
            prop_assert!(dlen.abs() <= 1e-12 * (1.0 + chi.abs()));
            prop_assert!(de.abs() <= 1e-12 * (1.0 + chi * chi));
        }
    }

    #[test]
    fn conserved_examples() {
        let c = mf_conserved(SpinVector::saddle(), &params(3.0));
        assert_eq!((c.spin_length_sq, c.energy_per_particle), (0.25, -0.5));
        let c = mf_conserved(SpinVector::new(0.5, 0.0, 0.0), &params(2.0));
        assert_eq!((c.spin_length_sq, c.energy_per_particle), (0.25, -0.5));
        assert_eq!(
            coherent_dispersions(SpinVector::saddle(), 40),
            [10.0, 10.0, 0.0]
        );
    }

    #[test]
    fn step_grid() {
        let cfg = IntegratorConfig::new(Scheme::Rk2, 0.01, 50.0).unwrap();
        assert_eq!(cfg.n_steps(), 5000);
        assert_eq!(cfg.step_time(5000), 50.0);
        let cfg = IntegratorConfig::new(Scheme::Rk2, 0.3, 1.0).unwrap();
        assert_eq!(cfg.n_steps(), 4);
        assert!((cfg.step_time(3) - 0.9).abs() < 1e-15);
        assert_eq!(cfg.step_time(4), 1.0);
        assert!(cfg.is_on_grid(0.6) && cfg.is_on_grid(1.0) && !cfg.is_on_grid(0.5));
        assert!(IntegratorConfig::new(Scheme::Rk4, 0.0, 1.0).is_err());
        assert!(IntegratorConfig::new(Scheme::Rk4, 0.1, -1.0).is_err());
        assert_eq!(cfg.sample_steps(&[0.0, 0.31, 1.0]).unwrap(), vec![0, 1, 4]);
        assert!(cfg.sample_steps(&[0.5, 0.2]).is_err());
        assert!(cfg.sample_steps(&[1.5]).is_err());
        assert!(cfg.check_aligned(&[0.0, 0.3, 0.5]).is_err());
    }

    #[test]
    fn shortened_last_step_lands_exactly() {
        // chi = 0: closed-form rotation; 0.3 does not divide 1.0
        let cfg = IntegratorConfig::new(Scheme::Rk4, 0.3e-2, 1.0).unwrap();
        let j0 = SpinVector::new(0.3, 0.1, -0.2);
        let out = integrate_trajectory(j0, &params(0.0), &cfg, &[1.0]).unwrap();
        let (c, s) = (1.0f64.cos(), 1.0f64.sin());
        assert!((out[0].1.jx - (0.3 * c - 0.1 * s)).abs() < 1e-10);
        assert!((out[0].1.jy - (0.3 * s + 0.1 * c)).abs() < 1e-10);
    }

    #[test]
    fn saddle_is_frozen() {
        let times: Vec<f64> = (0..=50).map(|k| k as f64).collect();
        for scheme in [Scheme::Rk2, Scheme::Rk4] {
            let cfg = IntegratorConfig::new(scheme, 0.01, 50.0).unwrap();
            for (_, j) in
                integrate_trajectory(SpinVector::saddle(), &params(5.0), &cfg, &times).unwrap()
            {
                assert_eq!(j, SpinVector::saddle());
            }
        }
    }

    #[test]
    fn larmor_rotation() {
        let cfg = IntegratorConfig::new(Scheme::Rk4, 1e-3, 10.0).unwrap();
        let (a, b) = (0.03, -0.02);
        let out =
            integrate_trajectory(SpinVector::new(a, b, -0.5), &params(0.0), &cfg, &[10.0]).unwrap();
        let (c, s) = (10f64.cos(), 10f64.sin());
        let j = out[0].1;
        assert!((j.jx - (a * c - b * s)).abs() <= 1e-9);
        assert!((j.jy - (a * s + b * c)).abs() <= 1e-9);
        assert_eq!(j.jz, -0.5);
    }

    #[test]
    fn saddle_instability() {
        let cfg = IntegratorConfig::new(Scheme::Rk4, 1e-3, 20.0).unwrap();
        let times: Vec<f64> = (0..=2000).map(|k| 0.01 * k as f64).collect();
        let out =
            integrate_trajectory(SpinVector::new(1e-3, 0.0, -0.5), &params(5.0), &cfg, &times)
                .unwrap();
        assert!(out.iter().any(|(_, j)| (j.jz + 0.5).abs() > 0.1));
    }

    #[test]
    fn linearization_at_saddle() {
        // Finite-difference Jacobian in the (jx, jy) plane at the saddle.
        for (chi, unstable) in [
            (0.25, false),
            (0.5, false),
            (0.99, false),
            (1.01, true),
            (1.8, true),
            (5.0, true),
        ] {
            let p = params(chi);
            let h = 1e-7;
            let col = |dx: f64, dy: f64| {
                let plus = mf_rhs(SpinVector::new(dx, dy, -0.5), &p);
                let minus = mf_rhs(SpinVector::new(-dx, -dy, -0.5), &p);
                (
                    (plus.jx - minus.jx) / (2.0 * h),
                    (plus.jy - minus.jy) / (2.0 * h),
                )
            };
            let (a, c) = col(h, 0.0);
            let (b, d) = col(0.0, h);
            // eigenvalues of [[a, b], [c, d]]: trace zero, so lambda^2 = -det
            let lambda_sq = -(a * d - b * c);
            assert!((lambda_sq - (chi * chi - 1.0)).abs() < 1e-6);
            assert_eq!(lambda_sq > 0.0, unstable, "chi {chi}");
        }
    }

    #[test]
    fn non_finite_aborts_with_step() {
        let cfg = IntegratorConfig::new(Scheme::Rk4, 1.0, 100.0).unwrap();
        let err = integrate_trajectory(
            SpinVector::new(1e3, 1e3, 1e3),
            &params(50.0),
            &cfg,
            &[100.0],
        )
        .unwrap_err();
        match err {
            Error::NonFinite { step, .. } => assert!(step >= 1),
            other => panic!("unexpected {other}"),
        }
    }
}
