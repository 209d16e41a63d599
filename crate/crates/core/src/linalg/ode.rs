//! Adaptive Dormand–Prince 5(4) stepper for linear and nonlinear complex ODE
//! systems `y' = f(t, y)`.
//!
//! The stepper advances one accepted step at a time so callers can watch the
//! solution between steps (output grids, norm-threshold crossings). Between
//! the two most recent accepted points it offers cubic Hermite interpolation
//! and exact re-stepping from the left end.

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Step-size control settings.
#[derive(Clone, Copy, Debug)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// Upper bound on a single step; `None` means unbounded.
    pub h_max: Option<T>,
    /// Hard cap on attempted steps per stepper.
    pub max_steps: usize,
}

impl<T: Real> OdeOptions<T> {
    /// Uses `tol` as both absolute and relative local error target.
    pub fn with_tol(tol: T) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            h_max: None,
            max_steps: 50_000_000,
        }
    }

    pub fn h_max(mut self, h_max: T) -> Self {
        self.h_max = Some(h_max);
        self
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// continuous extension of order 4
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Dormand–Prince stepper state.
pub struct Stepper<T> {
    opts: OdeOptions<T>,
    t: T,
    y: Vec<Complex<T>>,
    f: Vec<Complex<T>>,
    t_prev: T,
    y_prev: Vec<Complex<T>>,
    f_prev: Vec<Complex<T>>,
    h: T,
    k: [Vec<Complex<T>>; 6],
    y_stage: Vec<Complex<T>>,
    y_new: Vec<Complex<T>>,
    f_new: Vec<Complex<T>>,
    dense: Vec<Complex<T>>,
    attempts: usize,
    accepted: usize,
}

impl<T: Real> Stepper<T> {
    pub fn new<F>(rhs: &mut F, t0: T, y0: &[Complex<T>], opts: OdeOptions<T>) -> Result<Self>
    where
        F: FnMut(T, &[Complex<T>], &mut [Complex<T>]) -> Result<()>,
    {
        let n = y0.len();
        let zero = || vec![Complex::zero(); n];
        let mut f = zero();
        rhs(t0, y0, &mut f)?;
        let mut s = Self {
            opts,
            t: t0,
            y: y0.to_vec(),
            f,
            t_prev: t0,
            y_prev: y0.to_vec(),
            f_prev: zero(),
            h: T::zero(),
            k: [zero(), zero(), zero(), zero(), zero(), zero()],
            y_stage: zero(),
            y_new: zero(),
            f_new: zero(),
            dense: zero(),
            attempts: 0,
            accepted: 0,
        };
        s.f_prev.copy_from_slice(&s.f);
        s.h = s.initial_step(rhs)?;
        Ok(s)
    }

    #[inline]
    pub fn t(&self) -> T {
        self.t
    }

    #[inline]
    pub fn y(&self) -> &[Complex<T>] {
        &self.y
    }

    #[inline]
    pub fn t_prev(&self) -> T {
        self.t_prev
    }

    #[inline]
    pub fn y_prev(&self) -> &[Complex<T>] {
        &self.y_prev
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    fn scaled_norm(&self, v: &[Complex<T>], reference: &[Complex<T>]) -> T {
        let n = T::of(v.len().max(1) as f64);
        let s: T = v
            .iter()
            .zip(reference)
            .map(|(e, y)| {
                let sc = self.opts.atol + self.opts.rtol * y.norm();
                (e.norm() / sc).powi(2)
            })
            .sum();
        (s / n).sqrt()
    }

    fn initial_step<F>(&mut self, rhs: &mut F) -> Result<T>
    where
        F: FnMut(T, &[Complex<T>], &mut [Complex<T>]) -> Result<()>,
    {
        let d0 = self.scaled_norm(&self.y, &self.y);
        let d1 = self.scaled_norm(&self.f, &self.y);
        let small = T::of(1e-5);
        let mut h0 = if d0 < small || d1 < small {
            T::of(1e-6)
        } else {
            T::of(0.01) * d0 / d1
        };
        if let Some(hm) = self.opts.h_max {
            h0 = h0.min(hm);
        }
        for ((ys, y), f) in self.y_stage.iter_mut().zip(&self.y).zip(&self.f) {
            *ys = y + f * h0;
        }
        let mut f1 = vec![Complex::zero(); self.y.len()];
        rhs(self.t + h0, &self.y_stage, &mut f1)?;
        let diff: Vec<Complex<T>> = f1.iter().zip(&self.f).map(|(a, b)| a - b).collect();
        let d2 = self.scaled_norm(&diff, &self.y) / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= T::of(1e-15) {
            (h0 * T::of(1e-3)).max(T::of(1e-6))
        } else {
            (T::of(0.01) / dmax).powf(T::of(0.2))
        };
        let mut h = (T::of(100.0) * h0).min(h1);
        // keep well above the underflow guard, which matters in single precision
        h = h.max(T::epsilon() * T::of(1024.0) * T::one().max(self.t.abs()));
        if let Some(hm) = self.opts.h_max {
            h = h.min(hm);
        }
        Ok(h)
    }

    /// Computes one Dormand–Prince step of size `h` from `(t0, y0, f0)` into
    /// `self.y_new` and returns the scaled error estimate.
    fn dopri<F>(&mut self, rhs: &mut F, t0: T, h: T, from_prev: bool) -> Result<T>
    where
        F: FnMut(T, &[Complex<T>], &mut [Complex<T>]) -> Result<()>,
    {
        let (y0, f0) = if from_prev {
            (&self.y_prev, &self.f_prev)
        } else {
            (&self.y, &self.f)
        };
        let n = y0.len();
        let hc = |x: f64| Complex::new(h * T::of(x), T::zero());

        for i in 0..n {
            self.y_stage[i] = y0[i] + f0[i] * hc(A21);
        }
        rhs(t0 + h * T::of(C2), &self.y_stage, &mut self.k[0])?;

        for i in 0..n {
            self.y_stage[i] = y0[i] + f0[i] * hc(A31) + self.k[0][i] * hc(A32);
        }
        rhs(t0 + h * T::of(C3), &self.y_stage, &mut self.k[1])?;

        for i in 0..n {
            self.y_stage[i] =
                y0[i] + f0[i] * hc(A41) + self.k[0][i] * hc(A42) + self.k[1][i] * hc(A43);
        }
        rhs(t0 + h * T::of(C4), &self.y_stage, &mut self.k[2])?;

        for i in 0..n {
            self.y_stage[i] = y0[i]
                + f0[i] * hc(A51)
                + self.k[0][i] * hc(A52)
                + self.k[1][i] * hc(A53)
                + self.k[2][i] * hc(A54);
        }
        rhs(t0 + h * T::of(C5), &self.y_stage, &mut self.k[3])?;

        for i in 0..n {
            self.y_stage[i] = y0[i]
                + f0[i] * hc(A61)
                + self.k[0][i] * hc(A62)
                + self.k[1][i] * hc(A63)
                + self.k[2][i] * hc(A64)
                + self.k[3][i] * hc(A65);
        }
        rhs(t0 + h, &self.y_stage, &mut self.k[4])?;

        for i in 0..n {
            self.y_new[i] = y0[i]
                + f0[i] * hc(A71)
                + self.k[1][i] * hc(A73)
                + self.k[2][i] * hc(A74)
                + self.k[3][i] * hc(A75)
                + self.k[4][i] * hc(A76);
        }
        rhs(t0 + h, &self.y_new, &mut self.f_new)?;

        // error estimate, reusing k[5] as scratch
        let (y0, f0) = if from_prev {
            (&self.y_prev, &self.f_prev)
        } else {
            (&self.y, &self.f)
        };
        let n_t = T::of(n.max(1) as f64);
        let mut acc = T::zero();
        for i in 0..n {
            let e = f0[i] * hc(E1)
                + self.k[1][i] * hc(E3)
                + self.k[2][i] * hc(E4)
                + self.k[3][i] * hc(E5)
                + self.k[4][i] * hc(E6)
                + self.f_new[i] * hc(E7);
            self.k[5][i] = e;
            let sc = self.opts.atol + self.opts.rtol * y0[i].norm().max(self.y_new[i].norm());
            acc = acc + (e.norm() / sc).powi(2);
        }
        Ok((acc / n_t).sqrt())
    }

    /// Advances by one accepted step, never beyond `t_limit`.
    pub fn step<F>(&mut self, rhs: &mut F, t_limit: T) -> Result<()>
    where
        F: FnMut(T, &[Complex<T>], &mut [Complex<T>]) -> Result<()>,
    {
        let span = t_limit - self.t;
        if span <= T::zero() {
            return Ok(());
        }
        let tscale = T::one().max(self.t.abs()).max(t_limit.abs());
        let h_min = T::epsilon() * T::of(16.0) * tscale;
        loop {
            self.attempts += 1;
            if self.attempts > self.opts.max_steps {
                return Err(Error::Integration {
                    t: self.t.as_f64(),
                    reason: format!("exceeded {} steps", self.opts.max_steps),
                });
            }
            let mut h = self.h;
            if let Some(hm) = self.opts.h_max {
                h = h.min(hm);
            }
            let mut last = false;
            // snap onto the limit instead of leaving a sliver
            if h >= span * T::of(0.999_999) {
                h = span;
                last = true;
            }
            if h < h_min && !last {
                return Err(Error::StepUnderflow {
                    t: self.t.as_f64(),
                    step: h.as_f64(),
                });
            }
            let err = self.dopri(rhs, self.t, h, false)?;
            if !err.is_finite() {
                self.h = h * T::of(FAC_MIN);
                continue;
            }
            let fac = if err == T::zero() {
                T::of(FAC_MAX)
            } else {
                (T::of(SAFETY) * err.powf(T::of(-0.2)))
                    .max(T::of(FAC_MIN))
                    .min(T::of(FAC_MAX))
            };
            if err <= T::one() {
                for i in 0..self.y.len() {
                    self.dense[i] = (self.f[i] * T::of(D1)
                        + self.k[1][i] * T::of(D3)
                        + self.k[2][i] * T::of(D4)
                        + self.k[3][i] * T::of(D5)
                        + self.k[4][i] * T::of(D6)
                        + self.f_new[i] * T::of(D7))
                        * h;
                }
                self.t_prev = self.t;
                std::mem::swap(&mut self.y_prev, &mut self.y);
                std::mem::swap(&mut self.f_prev, &mut self.f);
                self.y.copy_from_slice(&self.y_new);
                self.f.copy_from_slice(&self.f_new);
                self.t = if last { t_limit } else { self.t + h };
                self.accepted += 1;
                // keep the proposal from shrinking just because we snapped
                self.h = if last { self.h.max(h * fac) } else { h * fac };
                return Ok(());
            }
            self.h = h * fac.min(T::one());
        }
    }

    /// Integrates up to exactly `t1`.
    pub fn advance_to<F>(&mut self, rhs: &mut F, t1: T) -> Result<()>
    where
        F: FnMut(T, &[Complex<T>], &mut [Complex<T>]) -> Result<()>,
    {
        while self.t < t1 {
            self.step(rhs, t1)?;
        }
        Ok(())
    }

    /// Single untested Dormand–Prince step of size `h` from the previous
    /// accepted point. With `h` inside the last accepted step this is at
    /// least as accurate as that step; with `h = t - t_prev` it reproduces
    /// the current state bit for bit.
    pub fn restep_from_prev<F>(&mut self, rhs: &mut F, h: T, out: &mut [Complex<T>]) -> Result<()>
    where
        F: FnMut(T, &[Complex<T>], &mut [Complex<T>]) -> Result<()>,
    {
        if h <= T::zero() {
            out.copy_from_slice(&self.y_prev);
            return Ok(());
        }
        self.dopri(rhs, self.t_prev, h, true)?;
        out.copy_from_slice(&self.y_new);
        Ok(())
    }

    /// Cubic Hermite interpolation on `[t_prev, t]`.
    pub fn hermite(&self, t: T, out: &mut [Complex<T>]) {
        let h = self.t - self.t_prev;
        if h <= T::zero() {
            out.copy_from_slice(&self.y);
            return;
        }
        let s = (t - self.t_prev) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let two = T::of(2.0);
        let three = T::of(3.0);
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        for i in 0..out.len() {
            out[i] = self.y_prev[i] * h00
                + self.f_prev[i] * (h10 * h)
                + self.y[i] * h01
                + self.f[i] * (h11 * h);
        }
    }

    /// Dormand–Prince continuous extension on `[t_prev, t]`, accurate to
    /// fourth order without extra right-hand side evaluations.
    pub fn dense(&self, t: T, out: &mut [Complex<T>]) {
        let h = self.t - self.t_prev;
        if h <= T::zero() {
            out.copy_from_slice(&self.y);
            return;
        }
        let th = (t - self.t_prev) / h;
        let th1 = T::one() - th;
        for i in 0..out.len() {
            let ydiff = self.y[i] - self.y_prev[i];
            let bspl = self.f_prev[i] * h - ydiff;
            let r4 = ydiff - self.f[i] * h - bspl;
            out[i] = self.y_prev[i] + (ydiff + (bspl + (r4 + self.dense[i] * th1) * th) * th1) * th;
        }
    }

    /// Replaces the current state (e.g. after re-symmetrization or a jump)
    /// and refreshes the cached derivative. The interpolation interval is
    /// collapsed onto the current point.
    pub fn set_state<F>(&mut self, rhs: &mut F, y: &[Complex<T>]) -> Result<()>
    where
        F: FnMut(T, &[Complex<T>], &mut [Complex<T>]) -> Result<()>,
    {
        self.y.copy_from_slice(y);
        rhs(self.t, &self.y, &mut self.f)?;
        self.t_prev = self.t;
        self.y_prev.copy_from_slice(&self.y);
        self.f_prev.copy_from_slice(&self.f);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;

    #[test]
    fn exponential_decay() {
        let mut rhs = |_t: f64, y: &[C], dy: &mut [C]| {
            dy[0] = -y[0];
            Ok(())
        };
        let mut s = Stepper::new(&mut rhs, 0.0, &[C::new(1.0, 0.0)], OdeOptions::with_tol(1e-10)).unwrap();
        s.advance_to(&mut rhs, 3.0).unwrap();
        assert_eq!(s.t(), 3.0);
        assert!((s.y()[0].re - (-3.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rotation_preserves_modulus() {
        let mut rhs = |t: f64, y: &[C], dy: &mut [C]| {
            dy[0] = C::new(0.0, -(1.0 + t)) * y[0];
            Ok(())
        };
        let mut s = Stepper::new(&mut rhs, 0.0, &[C::new(1.0, 0.0)], OdeOptions::with_tol(1e-10)).unwrap();
        s.advance_to(&mut rhs, 4.0).unwrap();
        let exact = C::new(0.0, -(4.0 + 8.0)).exp();
        assert!((s.y()[0] - exact).norm() < 1e-8);
    }

    #[test]
    fn hermite_and_restep_agree_inside_step() {
        let mut rhs = |_t: f64, y: &[C], dy: &mut [C]| {
            dy[0] = -y[0] * 2.0;
            Ok(())
        };
        let mut s = Stepper::new(&mut rhs, 0.0, &[C::new(1.0, 0.0)], OdeOptions::with_tol(1e-9)).unwrap();
        s.step(&mut rhs, 10.0).unwrap();
        s.step(&mut rhs, 10.0).unwrap();
        let (t0, t1) = (s.t_prev(), s.t());
        let tm = 0.5 * (t0 + t1);
        let mut a = [C::new(0.0, 0.0)];
        let mut b = [C::new(0.0, 0.0)];
        let mut d = [C::new(0.0, 0.0)];
        s.hermite(tm, &mut a);
        s.dense(tm, &mut d);
        s.restep_from_prev(&mut rhs, tm - t0, &mut b).unwrap();
        let exact = (-2.0 * tm).exp();
        assert!((a[0].re - exact).abs() < 1e-6);
        assert!((d[0].re - exact).abs() < 1e-8);
        assert!((b[0].re - exact).abs() < 1e-8);
        s.dense(t1, &mut d);
        assert!((d[0] - s.y()[0]).norm() < 1e-15);
        let mut c = [C::new(0.0, 0.0)];
        s.restep_from_prev(&mut rhs, t1 - t0, &mut c).unwrap();
        assert_eq!(c[0], s.y()[0]);
    }

    #[test]
    fn dense_output_tracks_oscillation_between_steps() {
        let mut rhs = |t: f64, y: &[C], dy: &mut [C]| {
            dy[0] = C::new(-0.1, -(3.0 + t)) * y[0];
            Ok(())
        };
        let exact = |t: f64| C::new(-0.1 * t, -(3.0 * t + 0.5 * t * t)).exp();
        let mut s = Stepper::new(&mut rhs, 0.0, &[C::new(1.0, 0.0)], OdeOptions::with_tol(1e-9)).unwrap();
        let mut out = [C::new(0.0, 0.0)];
        let mut worst: f64 = 0.0;
        while s.t() < 3.0 {
            s.step(&mut rhs, 3.0).unwrap();
            for k in 1..10 {
                let t = s.t_prev() + (s.t() - s.t_prev()) * k as f64 / 10.0;
                s.dense(t, &mut out);
                worst = worst.max((out[0] - exact(t)).norm());
            }
        }
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn blowup_reports_failure() {
        let mut rhs = |_t: f64, y: &[C], dy: &mut [C]| {
            dy[0] = y[0] * y[0];
            Ok(())
        };
        let mut s = Stepper::new(&mut rhs, 0.0, &[C::new(1.0, 0.0)], OdeOptions::with_tol(1e-10)).unwrap();
        // y = 1/(1-t) blows up at t = 1
        let r = s.advance_to(&mut rhs, 2.0);
        assert!(r.is_err());
    }
}
