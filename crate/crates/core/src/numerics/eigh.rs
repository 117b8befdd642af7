//! Dense Hermitian eigensolver.
//!
//! A complex Hermitian matrix is reduced to a real symmetric tridiagonal one by
//! Householder reflections followed by a diagonal phase similarity; the
//! tridiagonal problem is then solved by the implicit QL algorithm with
//! Wilkinson-style shifts (EISPACK `tql2`). Eigenvectors are accumulated along
//! the way. Cost is O(n³).

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::matrix::{dot, ComplexMatrix};
use crate::error::{invalid, Error, Result};

/// Largest `|H - H†|` accepted by [`hermitian_eigh`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Eigenvalues closer than this are reported as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// Eigenpairs of a Hermitian matrix.
///
/// `eigenvalues` ascend; column `k` of `eigenvectors` belongs to
/// `eigenvalues[k]`. Each eigenvector's largest-magnitude component (the first
/// one, on near ties) is real and positive, which makes the decomposition a
/// deterministic function of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
    /// Some adjacent eigenvalues differ by less than [`DEGENERACY_TOLERANCE`].
    pub degenerate: bool,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The unitary `U = V†` with `U H U† = diag(E)`.
    pub fn diagonalizer(&self) -> ComplexMatrix {
        self.eigenvectors.adjoint()
    }

    /// `V diag(E) V†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for (k, &e) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= e);
        }
        let mut out = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let s = self.eigenvectors[(j, k)].conj();
                for i in 0..n {
                    out[(i, j)] += scaled[(i, k)] * s;
                }
            }
        }
        out
    }
}

/// Eigenpairs of a real symmetric tridiagonal matrix.
///
/// `vectors` is column-major `n × n`; column `k` belongs to `values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl TridiagonalEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Component `i` of eigenvector `k`.
    #[inline]
    pub fn vector(&self, i: usize, k: usize) -> f64 {
        self.vectors[k * self.dim() + i]
    }
}

/// Eigendecomposition of a Hermitian matrix.
pub fn hermitian_eigh(h: &ComplexMatrix) -> Result<EigenDecomposition> {
    if !h.is_square() {
        return Err(invalid!("matrix is {}x{}, not square", h.rows(), h.cols()));
    }
    if !h.is_finite() {
        return Err(invalid!("matrix has non-finite entries"));
    }
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOLERANCE {
        return Err(invalid!("matrix is not Hermitian (max |H - H†| = {defect:e})"));
    }
    let n = h.rows();
    if n == 0 {
        return Err(invalid!("empty matrix"));
    }

    let (diag, off, q) = householder_tridiagonalize(h);
    let mut d = diag;
    let mut e = off;
    e.push(0.0);
    let mut z = identity_real(n);
    tql2(&mut d, &mut e, &mut z, n)?;

    // V = Q Z, then sort ascending and fix phases.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(d[src]);
        let zcol = &z[src * n..(src + 1) * n];
        let out = vectors.column_mut(dst);
        for (k, &zk) in zcol.iter().enumerate() {
            if zk == 0.0 {
                continue;
            }
            for (o, qv) in out.iter_mut().zip(q.column(k)) {
                *o += qv * zk;
            }
        }
        fix_phase(out);
    }
    let degenerate = eigenvalues.windows(2).any(|w| w[1] - w[0] < DEGENERACY_TOLERANCE);
    Ok(EigenDecomposition { eigenvalues, eigenvectors: vectors, degenerate })
}

/// Eigendecomposition of the symmetric tridiagonal matrix with diagonal `diag`
/// and sub/super-diagonal `off` (`off.len() == diag.len() - 1`).
pub fn tridiagonal_eigh(diag: &[f64], off: &[f64]) -> Result<TridiagonalEigen> {
    let n = diag.len();
    if n == 0 {
        return Err(invalid!("empty tridiagonal matrix"));
    }
    if off.len() + 1 != n {
        return Err(invalid!("off-diagonal has length {}, expected {}", off.len(), n - 1));
    }
    if diag.iter().chain(off).any(|x| !x.is_finite()) {
        return Err(invalid!("tridiagonal matrix has non-finite entries"));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = identity_real(n);
    tql2(&mut d, &mut e, &mut z, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * n);
    for &src in &order {
        values.push(d[src]);
        let col = &z[src * n..(src + 1) * n];
        // Sign convention: largest-magnitude component positive.
        let (imax, _) = argmax_abs(col.iter().map(|x| x.abs()));
        let sign = if col[imax] < 0.0 { -1.0 } else { 1.0 };
        vectors.extend(col.iter().map(|x| x * sign));
    }
    Ok(TridiagonalEigen { values, vectors })
}

fn identity_real(n: usize) -> Vec<f64> {
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    z
}

/// Index of the first entry within a relative 1e-10 of the maximum.
fn argmax_abs(mags: impl Iterator<Item = f64> + Clone) -> (usize, f64) {
    let max = mags.clone().fold(0.0f64, f64::max);
    let threshold = max * (1.0 - 1e-10);
    let idx = mags.clone().position(|m| m >= threshold).unwrap_or(0);
    (idx, max)
}

fn fix_phase(v: &mut [Complex64]) {
    let (idx, max) = argmax_abs(v.iter().map(|z| z.norm()));
    if max == 0.0 {
        return;
    }
    let lead = v[idx];
    let phase = lead.conj() / lead.norm();
    v.iter_mut().for_each(|z| *z *= phase);
    v[idx] = Complex64::new(v[idx].norm(), 0.0);
}

/// Reduces `h` to real symmetric tridiagonal form `T = Q† h Q`.
///
/// Returns the diagonal, the (non-negative) off-diagonal and the unitary `Q`.
fn householder_tridiagonalize(h: &ComplexMatrix) -> (Vec<f64>, Vec<f64>, ComplexMatrix) {
    let n = h.rows();
    let zero = Complex64::new(0.0, 0.0);
    let mut a = h.clone();
    let mut q = ComplexMatrix::identity(n);
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    let mut qv = vec![zero; n];

    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let m = n - lo;
        let x = &a.column(k)[lo..];
        let tail: f64 = x[1..].iter().map(|z| z.norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let xnorm = libm::sqrt(x[0].norm_sqr() + tail);
        let phase =
            if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { Complex64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;

        let v = &mut v[..m];
        v.copy_from_slice(x);
        v[0] -= alpha;
        let tau = 2.0 / v.iter().map(|z| z.norm_sqr()).sum::<f64>();

        // p = tau * A_sub v
        let p = &mut p[..m];
        p.iter_mut().for_each(|z| *z = zero);
        for (j, &vj) in v.iter().enumerate() {
            let col = &a.column(lo + j)[lo..];
            for (pi, aij) in p.iter_mut().zip(col) {
                *pi += aij * vj;
            }
        }
        p.iter_mut().for_each(|z| *z *= tau);
        // w = p - (tau/2)(v†p) v ; A_sub -= v w† + w v†
        let kappa = 0.5 * tau * dot(v, p).re;
        for (pi, vi) in p.iter_mut().zip(v.iter()) {
            *pi -= vi * kappa;
        }
        let w = &*p;
        for j in 0..m {
            let (vj, wj) = (v[j].conj(), w[j].conj());
            let col = &mut a.column_mut(lo + j)[lo..];
            for i in 0..m {
                col[i] -= v[i] * wj + w[i] * vj;
            }
        }
        a[(lo, k)] = alpha;
        a[(k, lo)] = alpha.conj();
        for i in lo + 1..n {
            a[(i, k)] = zero;
            a[(k, i)] = zero;
        }

        // Q <- Q (I - tau v v†), touching columns lo..n only.
        let qv = &mut qv[..n];
        qv.iter_mut().for_each(|z| *z = zero);
        for (j, &vj) in v.iter().enumerate() {
            for (o, qij) in qv.iter_mut().zip(q.column(lo + j)) {
                *o += qij * vj;
            }
        }
        for j in 0..m {
            let s = v[j].conj() * tau;
            let col = q.column_mut(lo + j);
            for (c, o) in col.iter_mut().zip(qv.iter()) {
                *c -= o * s;
            }
        }
    }

    // Rotate the complex off-diagonal onto the non-negative reals: with
    // D = diag(d), d_{i+1} = d_i e_i/|e_i|, T = D T' D† and Q <- Q D.
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    let mut d = Complex64::new(1.0, 0.0);
    for i in 0..n.saturating_sub(1) {
        let e = a[(i + 1, i)];
        let mag = e.norm();
        if mag > 0.0 {
            d *= e / mag;
        }
        off.push(mag);
        q.column_mut(i + 1).iter_mut().for_each(|z| *z *= d);
    }
    (diag, off, q)
}

/// Implicit QL on a symmetric tridiagonal matrix (EISPACK `tql2`).
///
/// `d` holds the diagonal, `e[i]` the entry coupling `i` and `i + 1` with
/// `e[n-1] = 0`. On return `d` holds the (unsorted) eigenvalues and the columns
/// of the column-major `z` have been rotated by the accumulated transform.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<()> {
    let max_iter = 30 * n.max(1);
    let mut total_iter = 0usize;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                total_iter += 1;
                if total_iter > max_iter {
                    return Err(Error::NoConvergence { iterations: total_iter });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (left, right) = z.split_at_mut((i + 1) * n);
                    let zi = &mut left[i * n..];
                    let zi1 = &mut right[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let hk = *b;
                        *b = s * *a + c * hk;
                        *a = c * *a - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
