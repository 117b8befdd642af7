//! Gaussian unitary ensemble sampling and spectral statistics.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::numerics::{hermitian_eigh, ComplexMatrix, EigenDecomposition, Rng};

/// Largest `|H - H†|` accepted when wrapping a matrix as a Hamiltonian.
pub const SAMPLE_HERMITIAN_TOLERANCE: f64 = 1e-14;

/// A Hamiltonian together with its (eagerly computed) eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    h: ComplexMatrix,
    eig: EigenDecomposition,
}

impl HermitianMatrix {
    pub fn new(h: ComplexMatrix) -> Result<Self> {
        let defect = h.hermiticity_defect();
        if defect > SAMPLE_HERMITIAN_TOLERANCE {
            return Err(invalid!("matrix is not Hermitian (max |H - H†| = {defect:e})"));
        }
        let eig = hermitian_eigh(&h)?;
        Ok(Self { h, eig })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.h
    }

    pub fn eig(&self) -> &EigenDecomposition {
        &self.eig
    }

    pub fn dim(&self) -> usize {
        self.h.rows()
    }
}

/// One GUE draw: `H = (M + M†)/2` with `M_ij = u_ij + i v_ij` and
/// `u_ij, v_ij ~ Normal(0, 1/n)` independent.
///
/// Entries of `M` are drawn row by row, `u` before `v`.
pub fn sample_gue(n: usize, rng: &mut Rng) -> Result<HermitianMatrix> {
    HermitianMatrix::new(sample_gue_matrix(n, rng)?)
}

/// The matrix part of [`sample_gue`], without diagonalising it.
pub fn sample_gue_matrix(n: usize, rng: &mut Rng) -> Result<ComplexMatrix> {
    if n < 2 {
        return Err(invalid!("GUE dimension must be at least 2, got {n}"));
    }
    let sd = libm::sqrt(1.0 / n as f64);
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for z in m.iter_mut() {
        let u = rng.standard_normal() * sd;
        let v = rng.standard_normal() * sd;
        *z = Complex64::new(u, v);
    }
    let mut h = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = Complex64::new(m[i * n + i].re, 0.0);
        for j in 0..i {
            let z = (m[i * n + j] + m[j * n + i].conj()) * 0.5;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    Ok(h)
}

/// `M` GUE samples of dimension `N`, sample `s` drawn from stream
/// `Rng::stream(seed, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GueEnsemble {
    pub n: usize,
    pub seed: u64,
    pub samples: Vec<HermitianMatrix>,
}

impl GueEnsemble {
    pub fn generate(n: usize, sample_count: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(invalid!("GUE dimension must be at least 2, got {n}"));
        }
        let draw = |s: usize| sample_gue(n, &mut Rng::stream(seed, s as u64));
        #[cfg(feature = "parallel")]
        let samples = {
            use rayon::prelude::*;
            (0..sample_count).into_par_iter().map(draw).collect::<Result<Vec<_>>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let samples = (0..sample_count).map(draw).collect::<Result<Vec<_>>>()?;
        Ok(Self { n, seed, samples })
    }

    /// Wraps already-built matrices (e.g. read back from disk).
    pub fn from_matrices(seed: u64, matrices: Vec<ComplexMatrix>) -> Result<Self> {
        let n = matrices.first().map(|m| m.rows()).unwrap_or(0);
        let samples = matrices
            .into_iter()
            .map(|m| {
                if m.rows() != n || !m.is_square() {
                    return Err(invalid!("ensemble matrices must all be {n}x{n}"));
                }
                HermitianMatrix::new(m)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, seed, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.samples.iter().flat_map(|s| s.eig().eigenvalues.iter().copied())
    }
}

/// Equal-width histogram normalised as a probability density.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub density: Vec<f64>,
    /// Number of values that fell outside `[lo, hi]`.
    pub outside: usize,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.density.len() as f64
    }

    pub fn bin_edges(&self, k: usize) -> (f64, f64) {
        let w = self.bin_width();
        (self.lo + w * k as f64, self.lo + w * (k + 1) as f64)
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    /// Largest `|density - semicircle|` over bins, the semicircle averaged over
    /// each bin.
    pub fn max_semicircle_deviation(&self) -> f64 {
        (0..self.density.len())
            .map(|k| {
                let (a, b) = self.bin_edges(k);
                (self.density[k] - semicircle_bin_average(a, b)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Wigner semicircle density `sqrt(4 - E²)/(2π)` on `[-2, 2]`.
pub fn semicircle_density(e: f64) -> f64 {
    if e.abs() >= 2.0 {
        0.0
    } else {
        libm::sqrt(4.0 - e * e) / (2.0 * core::f64::consts::PI)
    }
}

fn semicircle_cdf(x: f64) -> f64 {
    let x = x.clamp(-2.0, 2.0);
    0.5 + x * libm::sqrt(4.0 - x * x) / (4.0 * core::f64::consts::PI)
        + libm::asin(x / 2.0) / core::f64::consts::PI
}

/// Mean of the semicircle density over `[a, b]`.
pub fn semicircle_bin_average(a: f64, b: f64) -> f64 {
    (semicircle_cdf(b) - semicircle_cdf(a)) / (b - a)
}

/// Histogram of all eigenvalues in the ensemble.
///
/// With `range = None` the histogram spans the observed eigenvalue range (a
/// unit-width window around the value if all eigenvalues coincide). The
/// density is normalised by the total eigenvalue count, so it integrates to
/// one unless values fall outside an explicit range.
pub fn spectral_density(
    ensemble: &GueEnsemble,
    bins: usize,
    range: Option<(f64, f64)>,
) -> Result<Histogram> {
    if ensemble.is_empty() {
        return Err(invalid!("cannot histogram an empty ensemble"));
    }
    histogram(ensemble.eigenvalues(), bins, range)
}

/// Density histogram of arbitrary values; see [`spectral_density`].
pub fn histogram(
    values: impl Iterator<Item = f64> + Clone,
    bins: usize,
    range: Option<(f64, f64)>,
) -> Result<Histogram> {
    if bins < 8 {
        return Err(invalid!("need at least 8 bins, got {bins}"));
    }
    let count = values.clone().count();
    if count == 0 {
        return Err(invalid!("no values to histogram"));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) if hi > lo => (lo, hi),
        Some((lo, hi)) => return Err(invalid!("empty histogram range [{lo}, {hi}]")),
        None => {
            let lo = values.clone().fold(f64::INFINITY, f64::min);
            let hi = values.clone().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        }
    };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0;
    for v in values {
        if v < lo || v > hi {
            outside += 1;
            continue;
        }
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let norm = 1.0 / (count as f64 * width);
    let density = counts.into_iter().map(|c| c as f64 * norm).collect();
    Ok(Histogram { lo, hi, density, outside })
}
