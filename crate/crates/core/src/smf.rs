//! Stochastic mean-field ensembles.
//!
//! Each trajectory starts from `|j, -j>` dressed with Gaussian quantal noise:
//! `jx, jy ~ Normal(0, 1/(4N))` independently, `jz = -1/2` exactly. The
//! trajectories then follow the deterministic mean-field flow, and means and
//! dispersions are moments over the ensemble:
//! `J_i = N mean(j_i)`, `Delta_i^2 = N^2 (mean(j_i^2) - mean(j_i)^2)`.
//!
//! Reproducibility: trajectory `k` draws from ChaCha8 seeded with the master
//! seed on stream `k`, and Gaussian pairs come from the Box-Muller transform.
//! Trajectories are grouped into fixed-size chunks whose partial sums are
//! merged in chunk order, so results do not depend on the thread count.

use std::f64::consts::TAU;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::{integrate_with, mf_conserved, IntegratorConfig, SpinVector};
use crate::model::ModelParams;

/// Trajectories per work item. Fixed so that the merge tree is independent of
/// the scheduler.
pub const CHUNK_SIZE: u64 = 512;

/// Initial-state distribution for `N` particles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingSpec {
    pub n_particles: usize,
    pub sigma: f64,
    pub jz0: f64,
}

impl SamplingSpec {
    pub fn new(n_particles: usize) -> Self {
        SamplingSpec {
            n_particles,
            sigma: (1.0 / (4.0 * n_particles as f64)).sqrt(),
            jz0: -0.5,
        }
    }

    pub fn variance(&self) -> f64 {
        1.0 / (4.0 * self.n_particles as f64)
    }
}

/// Random stream of trajectory `index`.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn unit_open_closed(rng: &mut impl RngCore) -> f64 {
    // (0, 1]
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn unit_closed_open(rng: &mut impl RngCore) -> f64 {
    // [0, 1)
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Two independent standard normals via Box-Muller.
pub fn standard_normal_pair(rng: &mut impl RngCore) -> (f64, f64) {
    let r = (-2.0 * unit_open_closed(rng).ln()).sqrt();
    let theta = TAU * unit_closed_open(rng);
    (r * theta.cos(), r * theta.sin())
}

/// One fluctuating initial condition.
pub fn sample_initial(spec: &SamplingSpec, rng: &mut impl RngCore) -> SpinVector {
    let (gx, gy) = standard_normal_pair(rng);
    SpinVector::new(spec.sigma * gx, spec.sigma * gy, spec.jz0)
}

/// Ensemble size, seeding and time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_trajectories: u64,
    pub master_seed: u64,
    pub integrator: IntegratorConfig,
    pub sample_times: Vec<f64>,
    /// Pair trajectory `2k + 1` with the parity mirror of trajectory `2k`.
    pub antithetic: bool,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories < 2 {
            return Err(Error::config(format!(
                "an ensemble needs at least 2 trajectories, got {}",
                self.n_trajectories
            )));
        }
        if self.antithetic && !self.n_trajectories.is_multiple_of(2) {
            return Err(Error::config(format!(
                "antithetic sampling needs an even trajectory count, got {}",
                self.n_trajectories
            )));
        }
        if self.sample_times.is_empty() {
            return Err(Error::config("no sample times requested"));
        }
        self.integrator.validate()?;
        self.integrator.sample_steps(&self.sample_times)?;
        self.integrator.check_aligned(&self.sample_times)
    }

    /// Initial condition of trajectory `index`.
    pub fn initial_state(&self, spec: &SamplingSpec, index: u64) -> SpinVector {
        if self.antithetic {
            let base = sample_initial(spec, &mut trajectory_rng(self.master_seed, index / 2));
            if index % 2 == 1 {
                base.mirrored()
            } else {
                base
            }
        } else {
            sample_initial(spec, &mut trajectory_rng(self.master_seed, index))
        }
    }
}

/// Moments of the ensemble at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub time: f64,
    /// `(J_x, J_y, J_z)` in particle units.
    pub mean: [f64; 3],
    /// `(Delta_x^2, Delta_y^2, Delta_z^2)`, population convention.
    pub var: [f64; 3],
    pub n_trajectories: u64,
    /// Ensemble average of the mean-field energy `N eps (jz - chi (jx^2 - jy^2))`.
    pub mean_energy: f64,
}

/// Output of [`run_ensemble`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRun {
    pub stats: Vec<EnsembleStats>,
    /// Largest `| |j|^2(t) - |j|^2(0) |` over all trajectories and samples.
    pub worst_spin_drift: f64,
    /// Largest drift of the energy per particle.
    pub worst_energy_drift: f64,
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// First and second moments of one scalar. Second moments are accumulated
/// about a fixed shift so that small spreads around large means keep their
/// precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentAccumulator {
    shift: f64,
    count: u64,
    raw: CompensatedSum,
    shifted: CompensatedSum,
    shifted_sq: CompensatedSum,
}

impl MomentAccumulator {
    pub fn new(shift: f64) -> Self {
        MomentAccumulator {
            shift,
            count: 0,
            raw: CompensatedSum::default(),
            shifted: CompensatedSum::default(),
            shifted_sq: CompensatedSum::default(),
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        let d = x - self.shift;
        self.count += 1;
        self.raw.add(x);
        self.shifted.add(d);
        self.shifted_sq.add(d * d);
    }

    /// Accumulators must share the same shift.
    pub fn merge(&mut self, other: &MomentAccumulator) {
        debug_assert_eq!(self.shift.to_bits(), other.shift.to_bits());
        self.count += other.count;
        self.raw.merge(&other.raw);
        self.shifted.merge(&other.shifted);
        self.shifted_sq.merge(&other.shifted_sq);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.raw.value() / self.count as f64
    }

    /// Population variance (divide by the count).
    pub fn variance(&self) -> f64 {
        let m = self.count as f64;
        let d1 = self.shifted.value() / m;
        (self.shifted_sq.value() / m - d1 * d1).max(0.0)
    }
}

#[derive(Debug, Clone)]
struct TimeAccumulator {
    spin: [MomentAccumulator; 3],
    energy: CompensatedSum,
}

impl TimeAccumulator {
    fn new(shift: &SpinVector) -> Self {
        TimeAccumulator {
            spin: shift.to_array().map(MomentAccumulator::new),
            energy: CompensatedSum::default(),
        }
    }

    fn push(&mut self, j: &SpinVector, params: &ModelParams) {
        for (acc, x) in self.spin.iter_mut().zip(j.to_array()) {
            acc.push(x);
        }
        self.energy
            .add(mf_conserved(*j, params).energy_per_particle);
    }

    fn merge(&mut self, other: &TimeAccumulator) {
        for (a, b) in self.spin.iter_mut().zip(&other.spin) {
            a.merge(b);
        }
        self.energy.merge(&other.energy);
    }

    fn finish(&self, time: f64, n_particles: usize) -> EnsembleStats {
        let n = n_particles as f64;
        let count = self.spin[0].count();
        EnsembleStats {
            time,
            mean: self.spin.map(|a| n * a.mean()),
            var: self.spin.map(|a| n * n * a.variance()),
            n_trajectories: count,
            mean_energy: n * self.energy.value() / count as f64,
        }
    }
}

/// Moments of a set of scalar spin vectors at a single time (reported as `t = 0`).
pub fn ensemble_stats(samples: &[SpinVector], params: &ModelParams) -> Result<EnsembleStats> {
    if samples.len() < 2 {
        return Err(Error::config(format!(
            "ensemble statistics need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let mut acc = TimeAccumulator::new(&samples[0]);
    for j in samples {
        acc.push(j, params);
    }
    Ok(acc.finish(0.0, params.n_particles))
}

struct ChunkResult {
    times: Vec<TimeAccumulator>,
    spin_drift: f64,
    energy_drift: f64,
}

/// Propagates the whole ensemble and returns per-sample-time moments.
///
/// Runs on the ambient rayon pool; output is bitwise independent of its size.
pub fn run_ensemble(params: &ModelParams, cfg: &EnsembleConfig) -> Result<EnsembleRun> {
    params.validate()?;
    cfg.validate()?;
    let spec = SamplingSpec::new(params.n_particles);
    let steps = cfg.integrator.sample_steps(&cfg.sample_times)?;
    let integrator = cfg.integrator;

    let trajectory_error = |index: u64, e: Error| Error::Trajectory {
        index,
        seed: cfg.master_seed,
        source: Box::new(e),
    };

    // Trajectory 0 fixes the per-time shifts of the second-moment accumulators.
    let mut shifts = Vec::with_capacity(steps.len());
    integrate_with(
        cfg.initial_state(&spec, 0),
        params,
        &integrator,
        &steps,
        |_, j| shifts.push(*j),
    )
    .map_err(|e| trajectory_error(0, e))?;

    let n_chunks = cfg.n_trajectories.div_ceil(CHUNK_SIZE);
    let chunks: Vec<Result<ChunkResult>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut times: Vec<TimeAccumulator> = shifts.iter().map(TimeAccumulator::new).collect();
            let mut spin_drift = 0.0f64;
            let mut energy_drift = 0.0f64;
            let end = ((c + 1) * CHUNK_SIZE).min(cfg.n_trajectories);
            for index in c * CHUNK_SIZE..end {
                let j0 = cfg.initial_state(&spec, index);
                let reference = mf_conserved(j0, params);
                integrate_with(j0, params, &integrator, &steps, |i, j| {
                    times[i].push(j, params);
                    let (ds, de) = mf_conserved(*j, params).drift_from(&reference);
                    spin_drift = spin_drift.max(ds);
                    energy_drift = energy_drift.max(de);
                })
                .map_err(|e| trajectory_error(index, e))?;
            }
            Ok(ChunkResult {
                times,
                spin_drift,
                energy_drift,
            })
        })
        .collect();

    let mut merged: Vec<TimeAccumulator> = shifts.iter().map(TimeAccumulator::new).collect();
    let mut worst_spin_drift = 0.0f64;
    let mut worst_energy_drift = 0.0f64;
    for chunk in chunks {
        let chunk = chunk?;
        for (m, t) in merged.iter_mut().zip(&chunk.times) {
            m.merge(t);
        }
        worst_spin_drift = worst_spin_drift.max(chunk.spin_drift);
        worst_energy_drift = worst_energy_drift.max(chunk.energy_drift);
    }

    let stats = merged
        .iter()
        .zip(&cfg.sample_times)
        .map(|(acc, &t)| acc.finish(t, params.n_particles))
        .collect();
    Ok(EnsembleRun {
        stats,
        worst_spin_drift,
        worst_energy_drift,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::meanfield::Scheme;

    fn params(chi: f64) -> ModelParams {
        ModelParams::with_chi(40, chi).unwrap()
    }

    fn config(m: u64, t_end: f64, interval_steps: usize, antithetic: bool) -> EnsembleConfig {
        let integrator = IntegratorConfig::new(Scheme::Rk2, 0.01, t_end).unwrap();
        let n = integrator.n_steps() / interval_steps;
        EnsembleConfig {
            n_trajectories: m,
            master_seed: 7,
            integrator,
            sample_times: (0..=n)
                .map(|k| (k * interval_steps) as f64 * 0.01)
                .collect(),
            antithetic,
        }
    }

    #[test]
    fn sampler_moments() {
        let spec = SamplingSpec::new(40);
        assert_eq!(spec.sigma * spec.sigma, 1.0 / 160.0);
        let m = 100_000u64;
        let draws: Vec<SpinVector> = (0..m)
            .map(|k| sample_initial(&spec, &mut trajectory_rng(42, k)))
            .collect();
        assert!(draws.iter().all(|j| j.jz == -0.5));
        let mf = m as f64;
        let mx = draws.iter().map(|j| j.jx).sum::<f64>() / mf;
        let my = draws.iter().map(|j| j.jy).sum::<f64>() / mf;
        let vx = draws.iter().map(|j| (j.jx - mx).powi(2)).sum::<f64>() / mf;
        let vy = draws.iter().map(|j| (j.jy - my).powi(2)).sum::<f64>() / mf;
        let cov = draws.iter().map(|j| (j.jx - mx) * (j.jy - my)).sum::<f64>() / mf;
        let target = 1.0 / 160.0;
        for v in [vx, vy] {
            assert!((0.98 * target..=1.02 * target).contains(&v), "{v}");
        }
        assert!(cov.abs() <= 3.0 / mf.sqrt() * target, "{cov}");
    }

    #[test]
    fn sampler_concentrates_for_large_n() {
        let spec = SamplingSpec::new(1_000_000);
        let mut rng = trajectory_rng(1, 0);
        for _ in 0..1000 {
            let j = sample_initial(&spec, &mut rng);
            assert!(j.jx.abs() < 6.0 * spec.sigma && spec.sigma < 1e-3);
        }
    }

    #[test]
    fn streams_are_distinct_and_repeatable() {
        let spec = SamplingSpec::new(40);
        let a = sample_initial(&spec, &mut trajectory_rng(3, 0));
        let b = sample_initial(&spec, &mut trajectory_rng(3, 1));
        let c = sample_initial(&spec, &mut trajectory_rng(4, 0));
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, sample_initial(&spec, &mut trajectory_rng(3, 0)));
    }

    #[test]
    fn stats_examples() {
        let p = params(1.0);
        let same = vec![SpinVector::new(0.1, 0.2, -0.3); 5];
        let s = ensemble_stats(&same, &p).unwrap();
        assert_eq!(s.var, [0.0; 3]);
        let a = 0.125;
        let pair = [SpinVector::new(a, 0.0, 0.0), SpinVector::new(-a, 0.0, 0.0)];
        let s = ensemble_stats(&pair, &p).unwrap();
        assert_eq!(s.mean[0], 0.0);
        assert_eq!(s.var[0], 1600.0 * a * a);
        assert!(ensemble_stats(&pair[..1], &p).is_err());
    }

    fn two_pass(xs: &[f64]) -> (f64, f64) {
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m)
    }

    proptest! {
        #[test]
        fn accumulator_matches_two_pass(
            offset in -100.0..100.0f64,
            spread in 1e-6..10.0f64,
            xs in proptest::collection::vec(-1.0..1.0f64, 2..400),
            split in 0usize..400,
        ) {
            let data: Vec<f64> = xs.iter().map(|x| offset + spread * x).collect();
            let (mean, var) = two_pass(&data);
            let split = split.min(data.len());
            let mut left = MomentAccumulator::new(data[0]);
            let mut right = MomentAccumulator::new(data[0]);
            data[..split].iter().for_each(|&x| left.push(x));
            data[split..].iter().for_each(|&x| right.push(x));
            left.merge(&right);
            prop_assert!((left.mean() - mean).abs() <= 1e-12 * mean.abs().max(spread));
            if var > 0.0 {
                prop_assert!((left.variance() - var).abs() <= 1e-12 * var.max(1e-300) + 1e-13 * spread * spread);
            }
        }
    }

    #[test]
    fn initial_moments() {
        let cfg = config(100_000, 0.0, 1, false);
        let run = run_ensemble(&params(5.0), &cfg).unwrap();
        let s = run.stats[0];
        assert_eq!(s.mean[2], -20.0);
        assert_eq!(s.var[2], 0.0);
        for v in &s.var[..2] {
            assert!((v - 10.0).abs() <= 0.2, "{v}");
        }
        let bound = 4.0 * 40.0 * SamplingSpec::new(40).sigma / (1e5f64).sqrt();
        assert!(s.mean[0].abs() <= bound && s.mean[1].abs() <= bound);
    }

    #[test]
    fn free_precession_keeps_jz() {
        let cfg = config(2_000, 5.0, 50, false);
        let run = run_ensemble(&params(0.0), &cfg).unwrap();
        let perp0 = run.stats[0].var[0] + run.stats[0].var[1];
        // Heun on a rigid rotation scales |j_perp|^2 by 1 + h^4/4 per step
        let h: f64 = 0.01;
        for s in &run.stats {
            assert_eq!(s.mean[2], -20.0);
            let steps = (s.time / h).round() as i32;
            let growth = (1.0 + h.powi(4) / 4.0).powi(steps);
            let perp = s.var[0] + s.var[1];
            assert!((perp / perp0 - growth).abs() < 1e-10, "t {}", s.time);
        }
    }

    #[test]
    fn antithetic_means_vanish() {
        let cfg = config(2_000, 10.0, 100, true);
        let run = run_ensemble(&params(5.0), &cfg).unwrap();
        for s in &run.stats {
            assert_eq!(s.mean[0], 0.0);
            assert_eq!(s.mean[1], 0.0);
        }
        let mut odd = cfg.clone();
        odd.n_trajectories = 2_001;
        assert!(run_ensemble(&params(5.0), &odd).is_err());
    }

    #[test]
    fn deterministic_across_pools() {
        let cfg = config(3_000, 5.0, 10, false);
        let p = params(1.8);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_ensemble(&p, &cfg).unwrap())
        };
        let a = run(1);
        let b = run(8);
        assert_eq!(a, b);
        for (x, y) in a.stats.iter().zip(&b.stats) {
            for i in 0..3 {
                assert_eq!(x.var[i].to_bits(), y.var[i].to_bits());
            }
        }
    }

    #[test]
    fn config_validation() {
        let p = params(1.0);
        let mut cfg = config(1, 1.0, 10, false);
        assert!(run_ensemble(&p, &cfg).is_err());
        cfg.n_trajectories = 10;
        cfg.sample_times = vec![0.0, 0.005];
        assert!(run_ensemble(&p, &cfg).is_err());
        cfg.sample_times = vec![];
        assert!(run_ensemble(&p, &cfg).is_err());
    }

    #[test]
    fn failing_trajectory_reports_index() {
        let p = ModelParams::with_chi(2, 1e6).unwrap();
        let integrator = IntegratorConfig::new(Scheme::Rk2, 1.0, 200.0).unwrap();
        let cfg = EnsembleConfig {
            n_trajectories: 4,
            master_seed: 9,
            integrator,
            sample_times: vec![200.0],
            antithetic: false,
        };
        match run_ensemble(&p, &cfg).unwrap_err() {
            Error::Trajectory { seed, .. } => assert_eq!(seed, 9),
            other => panic!("unexpected {other}"),
        }
    }
}
