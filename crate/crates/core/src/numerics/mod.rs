//! Dense complex linear algebra shared by the physics modules.

mod eigh;
mod haar;
mod matrix;
mod rng;

pub use eigh::{hermitian_eigh, tridiagonal_eigh, EigenDecomposition, TridiagonalEigen};
pub use haar::haar_unitary;
pub use matrix::{dot, norm, ComplexMatrix};
pub use rng::{gaussian, Rng};
