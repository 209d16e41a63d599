//! Hermitian eigendecomposition by cyclic complex Jacobi rotations, and the
//! principal square root of positive semidefinite matrices built on it.
//!
//! Jacobi is slow asymptotically but every matrix here is at most a few dozen
//! rows, and it delivers eigenvectors that are orthonormal to working
//! precision.

use num_complex::Complex;
use num_traits::Zero;

use super::matrix::CMatrix;
use crate::error::{Error, Result};
use crate::scalar::{cplx, creal, Real};

const MAX_SWEEPS: usize = 64;

/// Relative tolerance on `max|M − M†|` accepted as Hermitian input.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues below this (times the matrix scale) are treated as a genuine
/// loss of positivity rather than roundoff.
pub const PSD_TOL: f64 = 1e-10;

/// Result of [`hermitian_eig`]: `M = V diag(λ) V†`, eigenvalues ascending,
/// eigenvector `k` in column `k` of `vectors`.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    pub fn min_eigenvalue(&self) -> T {
        self.values[0]
    }

    pub fn max_eigenvalue(&self) -> T {
        self.values[self.values.len() - 1]
    }

    pub fn vector(&self, k: usize) -> Vec<Complex<T>> {
        (0..self.vectors.dim()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// `V f(Λ) V†`
    pub fn map_spectrum(&self, f: impl Fn(T) -> T) -> CMatrix<T> {
        let n = self.vectors.dim();
        let fv: Vec<T> = self.values.iter().map(|&x| f(x)).collect();
        CMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.vectors[(i, k)] * self.vectors[(j, k)].conj() * fv[k])
                .sum()
        })
    }
}

/// Eigendecomposition of a Hermitian matrix.
pub fn hermitian_eig<T: Real>(m: &CMatrix<T>) -> Result<HermitianEigen<T>> {
    let n = m.dim();
    let scale = T::one().max(m.max_abs());
    let defect = m.hermiticity_defect();
    if defect > T::tol(HERMITIAN_TOL) * scale {
        return Err(Error::Validation(format!(
            "matrix is not Hermitian (max|M - M†| = {:e})",
            defect.as_f64()
        )));
    }

    let mut a = m.hermitian_part();
    let mut v = CMatrix::<T>::identity(n);

    let off_norm = |a: &CMatrix<T>| -> T {
        let mut s = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                s = s + a[(i, j)].norm_sqr();
            }
        }
        s.sqrt()
    };
    let frob: T = a.as_slice().iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    let threshold = T::epsilon() * frob.max(T::min_positive_value());

    let mut converged = n == 1;
    for _ in 0..MAX_SWEEPS {
        if off_norm(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_norm(&a) > threshold * T::of(1e3) {
        return Err(Error::Logic(
            "Jacobi eigensolver did not converge".to_string(),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| diag[k]).collect();
    let vectors = CMatrix::from_fn(n, |i, k| v[(i, order[k])]);
    Ok(HermitianEigen { values, vectors })
}

/// One complex Jacobi rotation annihilating `a[p][q]`.
fn rotate<T: Real>(a: &mut CMatrix<T>, v: &mut CMatrix<T>, p: usize, q: usize) {
    let n = a.dim();
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == T::zero() {
        return;
    }
    // Remove the phase of a_pq, then apply a real symmetric rotation.
    let phase = apq / r;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (T::of(2.0) * r);
    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
    let c = (t * t + T::one()).sqrt().recip();
    let s = t * c;

    // U = [[c, s], [-s e^{-iφ}, c e^{-iφ}]] on the (p, q) plane.
    let ph_c = phase.conj();
    let u_pp = creal(c);
    let u_pq = creal(s);
    let u_qp = -ph_c * s;
    let u_qq = ph_c * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * u_pp + akq * u_qp;
        a[(k, q)] = akp * u_pq + akq * u_qq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
        a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
    }
    a[(p, q)] = Complex::zero();
    a[(q, p)] = Complex::zero();
    a[(p, p)] = cplx(a[(p, p)].re, T::zero());
    a[(q, q)] = cplx(a[(q, q)].re, T::zero());

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * u_pp + vkq * u_qp;
        v[(k, q)] = vkp * u_pq + vkq * u_qq;
    }
}

/// Principal square root of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues in `[-PSD_TOL·scale, 0)` are clamped to zero; anything more
/// negative is reported as [`Error::PsdViolation`].
pub fn psd_sqrt<T: Real>(m: &CMatrix<T>) -> Result<CMatrix<T>> {
    let eig = hermitian_eig(m)?;
    let scale = T::one().max(m.max_abs());
    let min = eig.min_eigenvalue();
    if min < -T::tol(PSD_TOL) * scale {
        return Err(Error::PsdViolation {
            min_eigenvalue: min.as_f64(),
        });
    }
    Ok(eig.map_spectrum(|x| x.max(T::zero()).sqrt()))
}
