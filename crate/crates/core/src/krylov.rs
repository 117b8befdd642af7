//! Lanczos tridiagonalisation and Krylov spread complexity.
//!
//! Complexity can be computed two ways that share nothing beyond the Lanczos
//! coefficients and basis: project an independently evolved state onto the
//! Krylov basis ([`krylov_project`]), or solve the tridiagonal Schrödinger
//! equation exactly ([`propagate_tridiagonal`]).

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::ensemble::HermitianMatrix;
use crate::error::{invalid, numerical, Result};
use crate::numerics::{dot, norm, tridiagonal_eigh, ComplexMatrix};

/// Default threshold on `b_{n+1}` below which the recursion stops.
pub const DEFAULT_BREAKDOWN_TOLERANCE: f64 = 1e-10;

/// Largest loss of orthogonality tolerated after reorthogonalisation.
pub const ORTHOGONALITY_LIMIT: f64 = 1e-8;

/// Norm drift tolerated on input states.
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Anything that can apply a Hermitian matrix to a vector.
pub trait HermitianOperator {
    fn dim(&self) -> usize;
    /// `y = H x`.
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

impl HermitianOperator for ComplexMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.matvec(x, y)
    }
}

impl HermitianOperator for HermitianMatrix {
    fn dim(&self) -> usize {
        self.matrix().rows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.matrix().matvec(x, y)
    }
}

/// A Hamiltonian written in its own eigenbasis.
#[derive(Debug, Clone, Copy)]
pub struct DiagonalOperator<'a>(pub &'a [f64]);

impl HermitianOperator for DiagonalOperator<'_> {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for ((yi, xi), e) in y.iter_mut().zip(x).zip(self.0) {
            *yi = xi * e;
        }
    }
}

/// Lanczos coefficients and Krylov basis for one `(H, ψ(0))` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct KrylovData {
    /// `a_n = <K_n|H|K_n>`, `n < K`.
    pub a: Vec<f64>,
    /// `b_n`, `n < K`, with `b_0 = 0`.
    pub b: Vec<f64>,
    /// `N × K`, column `n` is `|K_n>`.
    pub basis: ComplexMatrix,
    /// Norm of the last residual vector (`b_K`); below the breakdown
    /// tolerance unless `K = N`.
    pub residual: f64,
}

impl KrylovData {
    /// Krylov dimension `K`.
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// Hilbert-space dimension `N`.
    pub fn ambient_dim(&self) -> usize {
        self.basis.rows()
    }

    /// Largest `|<K_i|K_j> - δ_ij|`.
    pub fn orthogonality_defect(&self) -> f64 {
        self.basis.unitarity_defect()
    }

    /// The `K × K` tridiagonal matrix as a dense complex matrix.
    pub fn tridiagonal(&self) -> ComplexMatrix {
        let k = self.dim();
        let mut t = ComplexMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = Complex64::new(self.a[i], 0.0);
            if i + 1 < k {
                t[(i, i + 1)] = Complex64::new(self.b[i + 1], 0.0);
                t[(i + 1, i)] = Complex64::new(self.b[i + 1], 0.0);
            }
        }
        t
    }
}

/// Lanczos recursion with full two-pass reorthogonalisation.
///
/// Stops after `N` vectors or as soon as `b_{n+1} <= tol_breakdown`.
pub fn lanczos_tridiagonalize<O: HermitianOperator + ?Sized>(
    op: &O,
    psi0: &[Complex64],
    tol_breakdown: f64,
) -> Result<KrylovData> {
    let n = op.dim();
    if psi0.len() != n {
        return Err(invalid!("initial state has length {}, operator dimension {n}", psi0.len()));
    }
    if !(tol_breakdown > 0.0) {
        return Err(invalid!("breakdown tolerance must be positive, got {tol_breakdown}"));
    }
    let nrm = norm(psi0);
    if !nrm.is_finite() || (nrm - 1.0).abs() > NORM_TOLERANCE {
        return Err(invalid!("initial state is not normalised (norm {nrm})"));
    }

    let zero = Complex64::new(0.0, 0.0);
    let mut basis: Vec<Vec<Complex64>> = vec![psi0.to_vec()];
    let mut a = Vec::new();
    let mut b = vec![0.0];
    let mut w = vec![zero; n];
    let residual;
    loop {
        let k = basis.len() - 1;
        op.apply(&basis[k], &mut w);
        let an = dot(&basis[k], &w);
        if an.im.abs() > 1e-10 * (1.0 + an.re.abs()) {
            return Err(numerical!("a_{k} has imaginary part {:e}; operator not Hermitian?", an.im));
        }
        let an = an.re;
        a.push(an);
        for (wi, ki) in w.iter_mut().zip(&basis[k]) {
            *wi -= ki * an;
        }
        if k > 0 {
            let bk = b[k];
            for (wi, ki) in w.iter_mut().zip(&basis[k - 1]) {
                *wi -= ki * bk;
            }
        }
        for _pass in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= qi * c;
                }
            }
        }
        let beta = norm(&w);
        if basis.len() == n || beta <= tol_breakdown {
            residual = beta;
            break;
        }
        b.push(beta);
        basis.push(w.iter().map(|z| z / beta).collect());
    }

    let basis = ComplexMatrix::from_columns(n, &basis)?;
    let kd = KrylovData { a, b, basis, residual };
    let defect = kd.orthogonality_defect();
    if defect > ORTHOGONALITY_LIMIT {
        return Err(numerical!("Krylov basis lost orthogonality ({defect:e})"));
    }
    Ok(kd)
}

/// Amplitudes `ψ^K_n = <K_n|ψ>` for `n < K`.
pub fn krylov_project(kd: &KrylovData, psi: &[Complex64]) -> Result<Vec<Complex64>> {
    if psi.len() != kd.ambient_dim() {
        return Err(invalid!(
            "state has length {}, Krylov basis vectors have length {}",
            psi.len(),
            kd.ambient_dim()
        ));
    }
    let nrm = norm(psi);
    if (nrm - 1.0).abs() > NORM_TOLERANCE {
        return Err(invalid!("state is not normalised (norm {nrm})"));
    }
    Ok(kd.basis.columns().map(|k| dot(k, psi)).collect())
}

/// Checks `times` is a non-empty ascending grid starting at zero.
pub(crate) fn validate_times(times: &[f64]) -> Result<()> {
    match times.first() {
        None => return Err(invalid!("time grid is empty")),
        Some(&t0) if t0 != 0.0 => return Err(invalid!("time grid must start at 0, got {t0}")),
        _ => {}
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid!("time grid must be strictly ascending"));
    }
    Ok(())
}

/// Exact solution of the Krylov-chain Schrödinger equation
/// `i dψ_n/dt = b_n ψ_{n-1} + a_n ψ_n + b_{n+1} ψ_{n+1}` with `ψ(0) = e_0`.
///
/// Returns a `K × T` matrix whose column `j` is `ψ^K(times[j])`, computed as
/// `V exp(-i ε t) Vᵀ e_0` from the eigendecomposition `T = V diag(ε) Vᵀ`.
pub fn propagate_tridiagonal(kd: &KrylovData, times: &[f64]) -> Result<ComplexMatrix> {
    validate_times(times)?;
    let k = kd.dim();
    let eig = tridiagonal_eigh(&kd.a, &kd.b[1..])?;
    let first_row: Vec<f64> = (0..k).map(|j| eig.vector(0, j)).collect();
    let mut out = ComplexMatrix::zeros(k, times.len());
    let mut coef = vec![Complex64::new(0.0, 0.0); k];
    for (col, &t) in times.iter().enumerate() {
        for j in 0..k {
            let phase = -eig.values[j] * t;
            coef[j] = Complex64::new(libm::cos(phase), libm::sin(phase)) * first_row[j];
        }
        let dst = out.column_mut(col);
        for (j, c) in coef.iter().enumerate() {
            let v = &eig.vectors[j * k..(j + 1) * k];
            for (d, &vij) in dst.iter_mut().zip(v) {
                *d += c * vij;
            }
        }
    }
    Ok(out)
}

/// Spread complexity as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityCurve {
    pub times: Vec<f64>,
    /// `C(t) = Σ_n n |ψ^K_n(t)|²`.
    pub values: Vec<f64>,
    /// Divisor used for `C/N` and `t/N`.
    pub normalization: usize,
}

impl ComplexityCurve {
    pub fn normalized_values(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.normalization as f64;
        self.values.iter().map(move |c| c / n)
    }

    pub fn normalized_times(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.normalization as f64;
        self.times.iter().map(move |t| t / n)
    }
}

/// `C(t) = Σ_n n |ψ^K_n(t)|²` for each column of `psi_k`.
///
/// `normalization` is set to the number of rows; callers working in an
/// `N`-dimensional space with `K < N` should overwrite it with `N`.
pub fn spread_complexity(psi_k: &ComplexMatrix, times: &[f64]) -> Result<ComplexityCurve> {
    if psi_k.cols() != times.len() {
        return Err(invalid!(
            "{} amplitude columns for {} grid times",
            psi_k.cols(),
            times.len()
        ));
    }
    let mut values = Vec::with_capacity(times.len());
    for (t, col) in psi_k.columns().enumerate() {
        let total: f64 = col.iter().map(|z| z.norm_sqr()).sum();
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(numerical!("amplitudes at time index {t} have squared norm {total}"));
        }
        values.push(col.iter().enumerate().map(|(n, z)| n as f64 * z.norm_sqr()).sum());
    }
    Ok(ComplexityCurve { times: times.to_vec(), values, normalization: psi_k.rows() })
}

/// Pointwise mean and (population) standard deviation of curves sharing a
/// time grid.
pub fn curve_statistics(curves: &[&ComplexityCurve]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = curves.first().ok_or_else(|| invalid!("no curves"))?;
    let len = first.values.len();
    if curves.iter().any(|c| c.values.len() != len) {
        return Err(invalid!("curves have different lengths"));
    }
    let m = curves.len() as f64;
    let mut mean = vec![0.0; len];
    let mut sq = vec![0.0; len];
    for c in curves {
        for (i, v) in c.values.iter().enumerate() {
            mean[i] += v;
            sq[i] += v * v;
        }
    }
    let std = mean
        .iter_mut()
        .zip(&sq)
        .map(|(mu, s)| {
            *mu /= m;
            libm::sqrt((s / m - *mu * *mu).max(0.0))
        })
        .collect();
    Ok((mean, std))
}
