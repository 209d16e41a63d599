use num_complex::Complex;

use super::matrix::{CMatrix, StateVector};
use super::ode::{OdeOptions, Stepper};
use crate::error::{Error, Result};
use crate::scalar::{minus_i, Real};

/// Ratio between the stepper's local error target and the caller's `tol`,
/// leaving room for accumulation across steps.
const LOCAL_ERROR_MARGIN: f64 = 0.1;

/// Applies the time-ordered exponential `T exp[-i ∫ Ĥ(s) ds]` over
/// `[t0, t1]` to `v`. The result is not renormalized.
pub fn propagate_nonunitary<T, H>(
    hhat: H,
    v: &[Complex<T>],
    t0: T,
    t1: T,
    tol: T,
) -> Result<StateVector<T>>
where
    T: Real,
    H: Fn(T) -> Result<CMatrix<T>>,
{
    if t1 < t0 {
        return Err(Error::Validation(format!(
            "propagation interval reversed: [{}, {}]",
            t0, t1
        )));
    }
    if t1 == t0 {
        return Ok(v.to_vec());
    }
    let mut rhs = |t: T, y: &[Complex<T>], dy: &mut [Complex<T>]| -> Result<()> {
        let h = hhat(t)?;
        if h.dim() != y.len() {
            return Err(Error::Dimension {
                expected: y.len(),
                got: h.dim(),
            });
        }
        h.mul_vec_into(y, dy);
        for z in dy.iter_mut() {
            *z = *z * minus_i::<T>();
        }
        Ok(())
    };
    let mut stepper = Stepper::new(&mut rhs, t0, v, OdeOptions::with_tol(tol * T::of(LOCAL_ERROR_MARGIN)))?;
    stepper.advance_to(&mut rhs, t1)?;
    Ok(stepper.y().to_vec())
}
