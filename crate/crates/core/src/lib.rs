//! Free-fermion simulation of layered adiabatic variational circuits on the
//! one-dimensional tight-binding chain.
//!
//! States are Slater determinants stored as `L x N` orbital matrices. The
//! [`fock`] module provides a brute-force many-body reference for small `L`.

pub mod adiabatic;
pub mod ansatz;
pub mod entanglement;
pub mod error;
pub mod fit;
pub mod fock;
pub mod lattice;
pub mod optimizer;
pub mod slater;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub use error::{DqapError, Result};
pub use lattice::{Boundary, LatticeSpec};
pub use slater::{BondSet, Evolution, SlaterState};

#[inline]
pub(crate) fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
