//! Dense complex linear algebra for small dimensions.

pub mod eigen;
pub mod matrix;
pub mod ode;
pub mod propagate;

#[cfg(test)]
pub(crate) mod test_util;

pub use eigen::{hermitian_eig, psd_sqrt, HermitianEigen};
pub use matrix::{basis, inner, norm_sqr, normalize, CMatrix, StateVector};
pub use ode::{OdeOptions, Stepper};
pub use propagate::propagate_nonunitary;
