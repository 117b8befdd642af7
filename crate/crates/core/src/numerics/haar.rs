use alloc::vec::Vec;

use num_complex::Complex64;

use super::matrix::{dot, norm, ComplexMatrix};
use super::rng::Rng;
use crate::error::{invalid, Result};

/// Haar-distributed unitary matrix.
///
/// QR of a complex Ginibre matrix by twice-iterated Gram–Schmidt. Gram–Schmidt
/// produces the factorisation whose `R` has a positive real diagonal, which is
/// exactly the phase fixing that makes `Q` Haar distributed.
pub fn haar_unitary(n: usize, rng: &mut Rng) -> Result<ComplexMatrix> {
    if n < 1 {
        return Err(invalid!("unitary dimension must be at least 1"));
    }
    let scale = core::f64::consts::FRAC_1_SQRT_2;
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.standard_normal() * scale, rng.standard_normal() * scale))
            .collect();
        for _pass in 0..2 {
            for q in &cols {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= qi * c;
                }
            }
        }
        let nv = norm(&v);
        v.iter_mut().for_each(|z| *z /= nv);
        cols.push(v);
    }
    ComplexMatrix::from_columns(n, &cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_is_a_phase() {
        let mut rng = Rng::new(5);
        let u = haar_unitary(1, &mut rng).unwrap();
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-15);
        assert!(haar_unitary(0, &mut rng).is_err());
    }

    #[test]
    fn unitary_sixteen() {
        let mut rng = Rng::new(6);
        let u = haar_unitary(16, &mut rng).unwrap();
        assert!(u.unitarity_defect() <= 1e-10);
        for col in u.columns() {
            assert!((norm(col) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn second_moment() {
        // E|U_ij|^2 = 1/n for Haar unitaries.
        let mut rng = Rng::new(7);
        let n = 16;
        let draws = 10_000;
        let mut acc = [0.0f64; 4];
        for _ in 0..draws {
            let u = haar_unitary(n, &mut rng).unwrap();
            acc[0] += u[(0, 0)].norm_sqr();
            acc[1] += u[(3, 7)].norm_sqr();
            acc[2] += u[(15, 0)].norm_sqr();
            acc[3] += u[(9, 15)].norm_sqr();
        }
        for a in acc {
            let m = a / draws as f64;
            assert!((m - 1.0 / 16.0).abs() < 0.002, "moment {m}");
        }
    }
}
