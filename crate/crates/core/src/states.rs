//! Thermofield-double states, their time evolution, and the four bases the
//! trajectories are expressed in.
//!
//! The doubled Hilbert space is never built: the TFD state and its evolution
//! live in the `N`-dimensional span of `|n,n>`, which is isomorphic to the
//! energy eigenbasis of a single copy. Time is single-copy time, i.e. phases
//! `exp(-i E_n t)`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;

use crate::ensemble::HermitianMatrix;
use crate::error::{invalid, Error, Result};
use crate::krylov::{
    krylov_project, lanczos_tridiagonalize, propagate_tridiagonal, spread_complexity,
    validate_times, ComplexityCurve, DiagonalOperator, KrylovData, DEFAULT_BREAKDOWN_TOLERANCE,
};
use crate::numerics::{norm, ComplexMatrix};

/// Unitarity defect above which a basis change is rejected.
pub const UNITARITY_TOLERANCE: f64 = 1e-8;

/// Representation a trajectory is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Basis {
    Energy,
    Krylov,
    Original,
    PseudoRandom,
}

impl Basis {
    pub const ALL: [Basis; 4] = [Basis::Energy, Basis::Krylov, Basis::Original, Basis::PseudoRandom];

    pub fn name(self) -> &'static str {
        match self {
            Basis::Energy => "energy",
            Basis::Krylov => "krylov",
            Basis::Original => "original",
            Basis::PseudoRandom => "pseudo_random",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect();
        match key.to_ascii_lowercase().as_str() {
            "energy" => Ok(Basis::Energy),
            "krylov" => Ok(Basis::Krylov),
            "original" => Ok(Basis::Original),
            "pseudorandom" => Ok(Basis::PseudoRandom),
            _ => Err(invalid!(
                "unknown basis '{s}' (expected energy, krylov, original or pseudo_random)"
            )),
        }
    }
}

/// Integer time grid `0, 1, ..., 3N - 1`.
pub fn time_grid(n: usize) -> Vec<f64> {
    (0..3 * n).map(|t| t as f64).collect()
}

/// Amplitude vectors `ψ(t)` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub basis: Basis,
    pub beta: f64,
    pub sample_id: usize,
    /// One column per grid time; column 0 is `ψ(0)`.
    pub psi_t: ComplexMatrix,
    pub times: Vec<f64>,
}

impl StateTrajectory {
    pub fn psi0(&self) -> &[Complex64] {
        self.psi_t.column(0)
    }

    pub fn dim(&self) -> usize {
        self.psi_t.rows()
    }

    /// Largest `| ||ψ(t)|| - 1 |` over the grid.
    pub fn norm_drift(&self) -> f64 {
        self.psi_t.columns().map(|c| (norm(c) - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// TFD amplitudes `exp(-β E_n / 2) / sqrt(Z)` in the energy eigenbasis.
pub fn tfd_state(energies: &[f64], beta: f64) -> Result<Vec<Complex64>> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(invalid!("inverse temperature must be finite and non-negative, got {beta}"));
    }
    if energies.is_empty() {
        return Err(invalid!("empty spectrum"));
    }
    let log_w: Vec<f64> = energies.iter().map(|e| -0.5 * beta * e).collect();
    let shift = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|x| libm::exp(x - shift)).collect();
    let z = libm::sqrt(w.iter().map(|x| x * x).sum::<f64>());
    Ok(w.into_iter().map(|x| Complex64::new(x / z, 0.0)).collect())
}

/// `ψ_n(t) = exp(-i E_n t) ψ_n(0)`, one column per grid time.
pub fn evolve_eigenbasis(
    psi0: &[Complex64],
    energies: &[f64],
    times: &[f64],
) -> Result<ComplexMatrix> {
    if psi0.len() != energies.len() {
        return Err(invalid!("state has length {}, spectrum {}", psi0.len(), energies.len()));
    }
    validate_times(times)?;
    let mut out = ComplexMatrix::zeros(psi0.len(), times.len());
    for (col, &t) in times.iter().enumerate() {
        for ((dst, &p), &e) in out.column_mut(col).iter_mut().zip(psi0).zip(energies) {
            let phase = -e * t;
            *dst = p * Complex64::new(libm::cos(phase), libm::sin(phase));
        }
    }
    Ok(out)
}

fn apply_adjoint(
    traj: &StateTrajectory,
    unitary: &ComplexMatrix,
    basis: Basis,
) -> Result<StateTrajectory> {
    if traj.basis != Basis::Energy {
        return Err(invalid!("expected an energy-basis trajectory, got {}", traj.basis));
    }
    if unitary.rows() != traj.dim() || !unitary.is_square() {
        return Err(invalid!(
            "unitary is {}x{}, trajectory dimension {}",
            unitary.rows(),
            unitary.cols(),
            traj.dim()
        ));
    }
    let defect = unitary.unitarity_defect();
    if defect > UNITARITY_TOLERANCE {
        return Err(invalid!("matrix is not unitary (max |U†U - I| = {defect:e})"));
    }
    let mut psi_t = ComplexMatrix::zeros(traj.dim(), traj.times.len());
    for (j, col) in traj.psi_t.columns().enumerate() {
        unitary.adjoint_matvec(col, psi_t.column_mut(j));
    }
    Ok(StateTrajectory { basis, psi_t, times: traj.times.clone(), ..*traj })
}

/// Rewrites an energy-basis trajectory as `U_s† ψ(t)`.
///
/// `diagonalizer` is the sample's `U_s` with `U_s H U_s† = diag(E)` (see
/// [`crate::numerics::EigenDecomposition::diagonalizer`]); `U_s† ψ` is then
/// the state in the basis the Hamiltonian was sampled in.
pub fn to_original_basis(
    traj: &StateTrajectory,
    diagonalizer: &ComplexMatrix,
) -> Result<StateTrajectory> {
    apply_adjoint(traj, diagonalizer, Basis::Original)
}

/// Same as [`to_original_basis`] but with one fixed unitary `U_0` shared by
/// every sample.
pub fn to_pseudorandom_basis(
    traj: &StateTrajectory,
    reference: &ComplexMatrix,
) -> Result<StateTrajectory> {
    apply_adjoint(traj, reference, Basis::PseudoRandom)
}

/// Projects every column onto the Krylov basis built from the same
/// `(H, ψ(0))`.
pub fn to_krylov_basis(traj: &StateTrajectory, kd: &KrylovData) -> Result<StateTrajectory> {
    if traj.basis != Basis::Energy {
        return Err(invalid!("expected an energy-basis trajectory, got {}", traj.basis));
    }
    let mut psi_t = ComplexMatrix::zeros(kd.dim(), traj.times.len());
    for (j, col) in traj.psi_t.columns().enumerate() {
        psi_t.column_mut(j).copy_from_slice(&krylov_project(kd, col)?);
    }
    Ok(StateTrajectory { basis: Basis::Krylov, psi_t, times: traj.times.clone(), ..*traj })
}

/// Real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RealGrid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }
}

/// `|Re ψ_n(t) + Im ψ_n(t)|`, rows indexed by `n`, columns by time.
pub fn amplitude_grid(traj: &StateTrajectory) -> RealGrid {
    let (rows, cols) = (traj.psi_t.rows(), traj.psi_t.cols());
    let mut data = Vec::with_capacity(rows * cols);
    for n in 0..rows {
        for t in 0..cols {
            let z = traj.psi_t[(n, t)];
            data.push((z.re + z.im).abs());
        }
    }
    RealGrid { rows, cols, data }
}

/// Everything computed for one `(sample, β)` pair.
#[derive(Debug, Clone)]
pub struct SampleEvolution {
    pub energy: StateTrajectory,
    pub krylov: KrylovData,
    /// Complexity from the tridiagonal route, normalised by `N`.
    pub curve: ComplexityCurve,
}

impl SampleEvolution {
    pub fn compute(
        h: &HermitianMatrix,
        beta: f64,
        sample_id: usize,
        times: &[f64],
    ) -> Result<Self> {
        let energies = &h.eig().eigenvalues;
        let psi0 = tfd_state(energies, beta)?;
        let psi_t = evolve_eigenbasis(&psi0, energies, times)?;
        let energy =
            StateTrajectory { basis: Basis::Energy, beta, sample_id, psi_t, times: times.to_vec() };
        let krylov =
            lanczos_tridiagonalize(&DiagonalOperator(energies), &psi0, DEFAULT_BREAKDOWN_TOLERANCE)?;
        let mut curve = spread_complexity(&propagate_tridiagonal(&krylov, times)?, times)?;
        curve.normalization = h.dim();
        Ok(Self { energy, krylov, curve })
    }

    /// The trajectory in `basis`. `reference` is the shared `U_0` and is only
    /// consulted for [`Basis::PseudoRandom`].
    pub fn in_basis(
        &self,
        basis: Basis,
        h: &HermitianMatrix,
        reference: Option<&ComplexMatrix>,
    ) -> Result<StateTrajectory> {
        match basis {
            Basis::Energy => Ok(self.energy.clone()),
            Basis::Krylov => to_krylov_basis(&self.energy, &self.krylov),
            Basis::Original => to_original_basis(&self.energy, &h.eig().diagonalizer()),
            Basis::PseudoRandom => {
                let u0 = reference
                    .ok_or_else(|| invalid!("pseudo-random basis needs a reference unitary"))?;
                to_pseudorandom_basis(&self.energy, u0)
            }
        }
    }
}
