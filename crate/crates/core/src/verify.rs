//! Self-checks run by `lmg verify`: fast invariants of every solver.

use crate::error::Result;
use crate::exact::{
    build_spin_matrices, exact_timeseries, ExactSolver, QuantumState, SpinMultipletBasis,
};
use crate::meanfield::{integrate_trajectory, mf_conserved, IntegratorConfig, Scheme, SpinVector};
use crate::model::{hf_minimize, hf_minimum_energy, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, worst: f64, bound: f64) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: worst <= bound,
        detail: format!("worst {worst:.3e} (bound {bound:.0e})"),
    }
}

fn two_level() -> Result<CheckOutcome> {
    let times: Vec<f64> = (0..=200).map(|k| 0.1 * k as f64).collect();
    let mut worst = 0.0f64;
    for chi in [0.5, 2.0, 10.0] {
        let p = ModelParams::with_chi(2, chi)?;
        let v = p.interaction();
        let w2 = 1.0 + v * v;
        for o in exact_timeseries(&p, &times)? {
            let want = -(1.0 + v * v * (2.0 * w2.sqrt() * o.time).cos()) / w2;
            worst = worst.max((o.mean[2] - want).abs());
        }
    }
    Ok(outcome("two-level closed form", worst, 1e-10))
}

fn exact_invariants() -> Result<Vec<CheckOutcome>> {
    let times: Vec<f64> = (0..=100).map(|k| 0.5 * k as f64).collect();
    let (mut norm, mut energy, mut parity, mut casimir) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for chi in [0.5, 1.8, 5.0] {
        let solver = ExactSolver::new(&ModelParams::with_chi(40, chi)?)?;
        let j = solver.basis.j();
        let prepared = solver
            .propagator()
            .prepare(&QuantumState::lowest_weight(solver.basis))?;
        let e0 = solver
            .hamiltonian
            .expectation(&prepared.state_at(0.0).amplitudes);
        for &t in &times {
            let psi = prepared.state_at(t);
            norm = norm.max((psi.norm() - 1.0).abs());
            energy = energy.max((solver.hamiltonian.expectation(&psi.amplitudes) - e0).abs());
            for op in [&solver.spins.jx, &solver.spins.jy] {
                parity = parity.max(op.expectation(&psi.amplitudes).abs());
            }
            let c: f64 = solver
                .spins
                .components()
                .iter()
                .map(|op| (&op.entries * &psi.amplitudes).norm_squared())
                .sum();
            casimir = casimir.max((c - j * (j + 1.0)).abs());
        }
    }
    Ok(vec![
        outcome("exact norm conservation", norm, 1e-12),
        outcome("exact energy conservation", energy, 1e-10),
        outcome("exact parity selection <Jx>, <Jy>", parity, 1e-10),
        outcome("exact spin Casimir", casimir, 1e-10),
    ])
}

fn commutator() -> CheckOutcome {
    let s = build_spin_matrices(SpinMultipletBasis::new(40));
    let (x, y, z) = (&s.jx.entries, &s.jy.entries, &s.jz.entries);
    let i = nalgebra::Complex::new(0.0, 1.0);
    let defect = (x * y - y * x - z.map(|e| e * i))
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max);
    outcome("[Jx, Jy] = i Jz", defect, 1e-12)
}

fn saddle() -> Result<CheckOutcome> {
    let p = ModelParams::with_chi(40, 5.0)?;
    let cfg = IntegratorConfig::new(Scheme::Rk2, 0.01, 50.0)?;
    let times: Vec<f64> = (0..=500).map(|k| 0.1 * k as f64).collect();
    let worst = integrate_trajectory(SpinVector::saddle(), &p, &cfg, &times)?
        .iter()
        .map(|(_, j)| {
            let s = SpinVector::saddle();
            (j.jx - s.jx)
                .abs()
                .max((j.jy - s.jy).abs())
                .max((j.jz - s.jz).abs())
        })
        .fold(0.0, f64::max);
    Ok(outcome("TDHF saddle stationarity", worst, 1e-14))
}

fn meanfield_conservation() -> Result<CheckOutcome> {
    let cfg = IntegratorConfig::new(Scheme::Rk4, 1e-3, 50.0)?;
    let mut worst = 0.0f64;
    for chi in [0.5, 1.8, 5.0] {
        let p = ModelParams::with_chi(40, chi)?;
        for j0 in [
            SpinVector::new(0.08, 0.0, -0.4936),
            SpinVector::new(0.02, -0.05, -0.497),
        ] {
            let c0 = mf_conserved(j0, &p);
            let last = integrate_trajectory(j0, &p, &cfg, &[50.0])?[0].1;
            let (ds, de) = mf_conserved(last, &p).drift_from(&c0);
            worst = worst.max(ds).max(de);
        }
    }
    Ok(outcome(
        "TDHF conserved quantities (RK4, dt=1e-3)",
        worst,
        1e-8,
    ))
}

fn hf_threshold() -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for chi in [0.5, 0.99] {
        worst = worst.max(hf_minimize(&ModelParams::with_chi(40, chi)?).alpha.abs());
    }
    for chi in [1.8, 5.0] {
        let p = ModelParams::with_chi(40, chi)?;
        let m = hf_minimize(&p);
        worst = worst.max(((2.0 * m.alpha).cos() - 1.0 / chi).abs());
        let e = hf_minimum_energy(&p);
        worst = worst.max(((m.energy - e) / e).abs());
    }
    Ok(outcome("HF minimizer threshold", worst, 1e-10))
}

/// Runs every check; numerical failures inside a check count as failures.
pub fn run_all() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut push = |r: Result<Vec<CheckOutcome>>, name: &'static str| match r {
        Ok(v) => out.extend(v),
        Err(e) => out.push(CheckOutcome {
            name,
            passed: false,
            detail: e.to_string(),
        }),
    };
    push(two_level().map(|c| vec![c]), "two-level closed form");
    push(exact_invariants(), "exact invariants");
    push(Ok(vec![commutator()]), "[Jx, Jy] = i Jz");
    push(saddle().map(|c| vec![c]), "TDHF saddle stationarity");
    push(
        meanfield_conservation().map(|c| vec![c]),
        "TDHF conserved quantities",
    );
    push(hf_threshold().map(|c| vec![c]), "HF minimizer threshold");
    out
}
