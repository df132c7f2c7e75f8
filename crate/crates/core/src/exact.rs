//! Exact quantal dynamics in the `j = N/2` quasi-spin multiplet.
//!
//! States are expanded on `|j, m>` with `m = -j, ..., +j` (index `a` holds
//! `m = a - j`). Time evolution is spectral: the Hamiltonian is diagonalized
//! once and every requested time is reached by phase rotation, so there is no
//! time-step error.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

pub type Complex64 = Complex<f64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The `2j + 1 = N + 1` dimensional multiplet with maximal quasi-spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinMultipletBasis {
    n_particles: usize,
}

impl SpinMultipletBasis {
    pub fn new(n_particles: usize) -> Self {
        SpinMultipletBasis { n_particles }
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn j(&self) -> f64 {
        self.n_particles as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.n_particles + 1
    }

    /// Magnetic quantum number of basis index `a`.
    pub fn m(&self, a: usize) -> f64 {
        a as f64 - self.j()
    }

    pub fn m_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.m(a)).collect()
    }
}

/// Dense Hermitian operator on the multiplet.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub basis: SpinMultipletBasis,
    pub entries: DMatrix<Complex64>,
}

impl OperatorMatrix {
    fn from_real(basis: SpinMultipletBasis, m: &DMatrix<f64>) -> Self {
        OperatorMatrix {
            basis,
            entries: m.map(|x| Complex64::new(x, 0.0)),
        }
    }

    /// Largest `|A_ab - conj(A_ba)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let a = &self.entries;
        let mut worst = 0.0f64;
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                worst = worst.max((a[(r, c)] - a[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im == 0.0)
    }

    /// `<psi| A |psi>` (real part; imaginary part vanishes for Hermitian `A`).
    pub fn expectation(&self, psi: &DVector<Complex64>) -> f64 {
        psi.dotc(&(&self.entries * psi)).re
    }
}

/// The quasi-spin operators `(Jx, Jy, Jz)`.
#[derive(Debug, Clone)]
pub struct SpinMatrices {
    pub jx: OperatorMatrix,
    pub jy: OperatorMatrix,
    pub jz: OperatorMatrix,
}

impl SpinMatrices {
    pub fn components(&self) -> [&OperatorMatrix; 3] {
        [&self.jx, &self.jy, &self.jz]
    }
}

/// Normalized state vector on the multiplet.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub basis: SpinMultipletBasis,
    pub amplitudes: DVector<Complex64>,
}

impl QuantumState {
    /// `|j, -j>`: every particle in the lower level.
    pub fn lowest_weight(basis: SpinMultipletBasis) -> Self {
        let mut amplitudes = DVector::from_element(basis.dim(), ZERO);
        amplitudes[0] = Complex64::new(1.0, 0.0);
        QuantumState { basis, amplitudes }
    }

    pub fn from_amplitudes(basis: SpinMultipletBasis, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::config(format!(
                "state has {} amplitudes, basis dimension is {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        let state = QuantumState {
            basis,
            amplitudes: DVector::from_vec(amplitudes),
        };
        if (state.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "state is not normalized (norm {})",
                state.norm()
            )));
        }
        Ok(state)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }
}

/// Means and dispersions of the quasi-spin components at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactObservables {
    pub time: f64,
    pub mean: [f64; 3],
    pub var: [f64; 3],
    pub energy: f64,
}

/// `Jz` diagonal, `J+-` from the ladder elements
/// `<j, m+-1| J+- |j, m> = sqrt(j(j+1) - m(m+-1))`.
pub fn build_spin_matrices(basis: SpinMultipletBasis) -> SpinMatrices {
    let d = basis.dim();
    let j = basis.j();
    let mut jz = DMatrix::<f64>::zeros(d, d);
    let mut jplus = DMatrix::<f64>::zeros(d, d);
    for a in 0..d {
        let m = basis.m(a);
        jz[(a, a)] = m;
        if a + 1 < d {
            jplus[(a + 1, a)] = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
        }
    }
    let jminus = jplus.transpose();
    let jx = (&jplus + &jminus) * 0.5;
    // Jy = (J+ - J-) / 2i = -i (J+ - J-) / 2
    let jy = (&jplus - &jminus).map(|x| Complex64::new(0.0, -0.5 * x));
    SpinMatrices {
        jx: OperatorMatrix::from_real(basis, &jx),
        jy: OperatorMatrix { basis, entries: jy },
        jz: OperatorMatrix::from_real(basis, &jz),
    }
}

/// `H = eps Jz - (V/2)(J+^2 + J-^2)`, which equals `eps Jz - V (Jx^2 - Jy^2)`.
pub fn build_hamiltonian(
    params: &ModelParams,
    basis: SpinMultipletBasis,
) -> Result<OperatorMatrix> {
    params.validate()?;
    if basis.n_particles() != params.n_particles {
        return Err(Error::config(format!(
            "basis built for N = {} but parameters have N = {}",
            basis.n_particles(),
            params.n_particles
        )));
    }
    let d = basis.dim();
    let j = basis.j();
    let v = params.interaction();
    let ladder = |m: f64| (j * (j + 1.0) - m * (m + 1.0)).sqrt();
    let mut h = DMatrix::<f64>::zeros(d, d);
    for a in 0..d {
        h[(a, a)] = params.epsilon * basis.m(a);
        if a + 2 < d {
            // <m+2| J+^2 |m>
            let m = basis.m(a);
            let elem = -0.5 * v * ladder(m) * ladder(m + 1.0);
            h[(a + 2, a)] = elem;
            h[(a, a + 2)] = elem;
        }
    }
    Ok(OperatorMatrix::from_real(basis, &h))
}

#[derive(Debug, Clone)]
struct SpectralBlock {
    indices: Vec<usize>,
    energies: Vec<f64>,
    // columns are eigenvectors restricted to `indices`
    vectors: DMatrix<Complex64>,
}

/// Eigendecomposition of a Hermitian operator, used to propagate states.
///
/// With block reduction enabled the matrix is first split into the connected
/// components of its sparsity graph (for the LMG Hamiltonian: the two parity
/// sectors of `m + j`), so amplitudes in uncoupled sectors stay exactly zero.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    basis: SpinMultipletBasis,
    blocks: Vec<SpectralBlock>,
}

/// Residual bound `||H v - E v|| <= RESIDUAL_TOL * ||H||` checked after every
/// decomposition.
pub const RESIDUAL_TOL: f64 = 1e-10;

impl SpectralPropagator {
    /// Full dense decomposition of the whole matrix.
    pub fn dense(h: &OperatorMatrix) -> Result<Self> {
        let all: Vec<usize> = (0..h.basis.dim()).collect();
        Self::from_blocks(h, vec![all])
    }

    /// Decomposition block by block over the connected components of `h`.
    pub fn block_reduced(h: &OperatorMatrix) -> Result<Self> {
        Self::from_blocks(h, connected_components(&h.entries))
    }

    fn from_blocks(h: &OperatorMatrix, components: Vec<Vec<usize>>) -> Result<Self> {
        if h.entries.nrows() != h.basis.dim() || h.entries.ncols() != h.basis.dim() {
            return Err(Error::config("operator shape does not match its basis"));
        }
        let scale = h.entries.norm();
        if h.hermiticity_defect() > 1e-14 * scale.max(1.0) {
            return Err(Error::config("Hamiltonian is not Hermitian"));
        }
        let real = h.is_real();
        let mut blocks = Vec::with_capacity(components.len());
        for indices in components {
            let k = indices.len();
            let sub = DMatrix::from_fn(k, k, |r, c| h.entries[(indices[r], indices[c])]);
            let max_iter = 1000 * k.max(1);
            let (energies, vectors) = if real {
                let sub = sub.map(|z| z.re);
                let eig = SymmetricEigen::try_new(sub, f64::EPSILON, max_iter)
                    .ok_or_else(|| Error::Eigen(format!("no convergence for block of size {k}")))?;
                (
                    eig.eigenvalues.iter().copied().collect::<Vec<_>>(),
                    eig.eigenvectors.map(|x| Complex64::new(x, 0.0)),
                )
            } else {
                let eig = SymmetricEigen::try_new(sub, f64::EPSILON, max_iter)
                    .ok_or_else(|| Error::Eigen(format!("no convergence for block of size {k}")))?;
                (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
            };
            blocks.push(SpectralBlock {
                indices,
                energies,
                vectors,
            });
        }
        let prop = SpectralPropagator {
            basis: h.basis,
            blocks,
        };
        prop.check_residual(h, scale)?;
        Ok(prop)
    }

    fn check_residual(&self, h: &OperatorMatrix, scale: f64) -> Result<()> {
        let d = self.basis.dim();
        let bound = RESIDUAL_TOL * scale.max(f64::MIN_POSITIVE);
        for block in &self.blocks {
            for (col, &e) in block.energies.iter().enumerate() {
                let mut v = DVector::from_element(d, ZERO);
                for (r, &idx) in block.indices.iter().enumerate() {
                    v[idx] = block.vectors[(r, col)];
                }
                let resid = (&h.entries * &v - v.scale(e)).norm();
                if !(resid <= bound) {
                    return Err(Error::Eigen(format!(
                        "residual {resid:e} exceeds {bound:e} for eigenvalue {e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// All eigenvalues in ascending order.
    pub fn energies(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| b.energies.iter().copied())
            .collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Returns a propagator that maps `psi0` to `psi(t)` for any `t`.
    pub fn prepare(&self, psi0: &QuantumState) -> Result<PreparedEvolution<'_>> {
        if psi0.basis != self.basis {
            return Err(Error::config(
                "initial state and Hamiltonian use different bases",
            ));
        }
        let coefficients = self
            .blocks
            .iter()
            .map(|b| {
                let restricted = DVector::from_iterator(
                    b.indices.len(),
                    b.indices.iter().map(|&i| psi0.amplitudes[i]),
                );
                b.vectors.ad_mul(&restricted)
            })
            .collect();
        Ok(PreparedEvolution {
            prop: self,
            initial: psi0.clone(),
            coefficients,
        })
    }
}

/// An initial state expanded in the eigenbasis.
#[derive(Debug, Clone)]
pub struct PreparedEvolution<'a> {
    prop: &'a SpectralPropagator,
    initial: QuantumState,
    coefficients: Vec<DVector<Complex64>>,
}

impl PreparedEvolution<'_> {
    /// `psi(t) = sum_k exp(-i E_k t) <k|psi0> |k>`.
    pub fn state_at(&self, t: f64) -> QuantumState {
        if t == 0.0 {
            return self.initial.clone();
        }
        let mut amplitudes = DVector::from_element(self.prop.basis.dim(), ZERO);
        for (block, coeff) in self.prop.blocks.iter().zip(&self.coefficients) {
            let phased = DVector::from_iterator(
                coeff.len(),
                coeff
                    .iter()
                    .zip(&block.energies)
                    .map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t)),
            );
            let local = &block.vectors * phased;
            for (r, &idx) in block.indices.iter().enumerate() {
                amplitudes[idx] = local[r];
            }
        }
        QuantumState {
            basis: self.prop.basis,
            amplitudes,
        }
    }
}

fn connected_components(m: &DMatrix<Complex64>) -> Vec<Vec<usize>> {
    let d = m.nrows();
    let mut label = vec![usize::MAX; d];
    let mut components = Vec::new();
    for start in 0..d {
        if label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        label[start] = id;
        let mut stack = vec![start];
        while let Some(a) = stack.pop() {
            for b in 0..d {
                if label[b] == usize::MAX && (m[(a, b)] != ZERO || m[(b, a)] != ZERO) {
                    label[b] = id;
                    members.push(b);
                    stack.push(b);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// Spectral propagation of `state0` under `h` to each time in `times`.
pub fn evolve_exact(
    state0: &QuantumState,
    h: &OperatorMatrix,
    times: &[f64],
) -> Result<Vec<QuantumState>> {
    let prop = SpectralPropagator::block_reduced(h)?;
    let prepared = prop.prepare(state0)?;
    Ok(times.iter().map(|&t| prepared.state_at(t)).collect())
}

/// Means `<J_i>`, dispersions `<J_i^2> - <J_i>^2` and `<H>` of `state`.
pub fn exact_observables(
    state: &QuantumState,
    spins: &SpinMatrices,
    h: &OperatorMatrix,
    time: f64,
) -> ExactObservables {
    let psi = &state.amplitudes;
    let mut mean = [0.0; 3];
    let mut var = [0.0; 3];
    for (i, op) in spins.components().into_iter().enumerate() {
        let applied = &op.entries * psi;
        let m = psi.dotc(&applied).re;
        // <J^2> = ||J psi||^2 for Hermitian J
        let second = applied.norm_squared();
        mean[i] = m;
        var[i] = (second - m * m).max(0.0);
    }
    ExactObservables {
        time,
        mean,
        var,
        energy: h.expectation(psi),
    }
}

/// Operators and spectrum for one parameter set, reusable across time grids.
#[derive(Debug, Clone)]
pub struct ExactSolver {
    pub params: ModelParams,
    pub basis: SpinMultipletBasis,
    pub spins: SpinMatrices,
    pub hamiltonian: OperatorMatrix,
    propagator: SpectralPropagator,
}

impl ExactSolver {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let basis = SpinMultipletBasis::new(params.n_particles);
        let hamiltonian = build_hamiltonian(params, basis)?;
        let propagator = SpectralPropagator::block_reduced(&hamiltonian)?;
        Ok(ExactSolver {
            params: *params,
            basis,
            spins: build_spin_matrices(basis),
            hamiltonian,
            propagator,
        })
    }

    pub fn propagator(&self) -> &SpectralPropagator {
        &self.propagator
    }

    /// Observables along the evolution of `state0`.
    pub fn observe(&self, state0: &QuantumState, times: &[f64]) -> Result<Vec<ExactObservables>> {
        let prepared = self.propagator.prepare(state0)?;
        Ok(times
            .iter()
            .map(|&t| exact_observables(&prepared.state_at(t), &self.spins, &self.hamiltonian, t))
            .collect())
    }

    /// Observables along the evolution of `|j, -j>`.
    pub fn timeseries(&self, times: &[f64]) -> Result<Vec<ExactObservables>> {
        self.observe(&QuantumState::lowest_weight(self.basis), times)
    }
}

/// Exact means and dispersions from `|j, -j>` at each requested time.
pub fn exact_timeseries(params: &ModelParams, times: &[f64]) -> Result<Vec<ExactObservables>> {
    ExactSolver::new(params)?.timeseries(times)
}
