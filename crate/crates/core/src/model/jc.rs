//! Damped Jaynes–Cummings model: a two-level atom decaying into a Lorentzian
//! bosonic vacuum, with bath correlation `f(τ) = (γ₀λ/2) e^{iΔτ - λ|τ|}`.
//!
//! The excited-state amplitude obeys `ċ = -∫₀ᵗ f(t-s) c(s) ds`. Since the
//! kernel is exponential this closes into the linear system
//! `ċ = -b`, `ḃ = (iΔ - λ) b + (γ₀λ/2) c`, solved here in closed form. The
//! time-local rates are `γ = -2 Re(ċ/c)` and `S = -2 Im(ċ/c)`.

use num_complex::Complex;

use super::{TclOperators, TclSpec};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{cplx, creal, Real};

/// `|c(t)|` below this is treated as an amplitude zero.
pub const AMPLITUDE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JcParams<T> {
    /// Markovian decay rate γ₀.
    pub gamma0: T,
    /// Spectral width λ (inverse bath correlation time).
    pub lambda: T,
    /// Detuning Δ of the Lorentzian from the atomic transition.
    pub delta: T,
}

impl<T: Real> JcParams<T> {
    pub fn new(gamma0: T, lambda: T, delta: T) -> Result<Self> {
        if !(gamma0 > T::zero()) || !gamma0.is_finite() {
            return Err(Error::config("gamma0", "must be positive and finite"));
        }
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::config("lambda", "must be positive and finite"));
        }
        if !delta.is_finite() {
            return Err(Error::config("delta", "must be finite"));
        }
        Ok(Self {
            gamma0,
            lambda,
            delta,
        })
    }

    fn tau(&self) -> Complex<T> {
        cplx(-self.lambda, self.delta) * T::of(0.5)
    }

    fn det(&self) -> T {
        self.gamma0 * self.lambda * T::of(0.5)
    }

    /// Root of `τ² - det` with non-negative real part.
    fn root(&self) -> Complex<T> {
        let tau = self.tau();
        let r = (tau * tau - creal(self.det())).sqrt();
        if r.re < T::zero() {
            -r
        } else {
            r
        }
    }

    /// Characteristic rate used to pick scan resolutions.
    pub(crate) fn frequency_scale(&self) -> T {
        self.tau().norm() + self.root().norm() + self.det().sqrt()
    }
}

/// `γ(t)` and `S(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatePair<T> {
    pub gamma: T,
    pub shift: T,
}

/// `(1 - e^{-x}) / x`, accurate near zero.
fn one_minus_exp_over<T: Real>(x: Complex<T>) -> Complex<T> {
    if x.norm() < T::of(1e-3) {
        let one = creal(T::one());
        let x2 = x * x;
        one - x * T::of(0.5) + x2 * T::of(1.0 / 6.0) - x2 * x * T::of(1.0 / 24.0)
            + x2 * x2 * T::of(1.0 / 120.0)
    } else {
        (creal(T::one()) - (-x).exp()) / x
    }
}

/// Returns `(c(t), ċ(t)/c(t))`, computed with the growing exponential
/// factored out so large `t` does not overflow.
fn amplitude_and_ratio<T: Real>(p: &JcParams<T>, t: T) -> (Complex<T>, Complex<T>) {
    let tau = p.tau();
    let det = p.det();
    let dl = p.root();
    let two = T::of(2.0);
    // with E = e^{-2δt}: cosh(δt) e^{-δt} = (1+E)/2, sinh(δt)/δ e^{-δt} = t φ(2δt)/1
    let x = dl * (two * t);
    let e = (-x).exp();
    let s = one_minus_exp_over(x) * t;
    let q = (creal(T::one()) + e) * T::of(0.5) - tau * s;
    let c = ((tau + dl) * t).exp() * q;
    let ratio = -(s * det) / q;
    (c, ratio)
}

/// Excited-state amplitude `c(t)`.
pub fn jc_amplitude<T: Real>(p: &JcParams<T>, t: T) -> Complex<T> {
    amplitude_and_ratio(p, t).0
}

/// Exact ground-state population `p_g(t) = 1 - |c(t)|²` from `ρ(0) = |e⟩⟨e|`.
pub fn jc_ground_population<T: Real>(p: &JcParams<T>, t: T) -> T {
    T::one() - jc_amplitude(p, t).norm_sqr()
}

/// Time-local decay rate and Lamb shift at time `t ≥ 0`.
pub fn jc_rates<T: Real>(p: &JcParams<T>, t: T) -> Result<RatePair<T>> {
    if t < T::zero() || t.is_nan() {
        return Err(Error::Validation(format!("rates requested at t = {}", t)));
    }
    let (c, ratio) = amplitude_and_ratio(p, t);
    let modulus = c.norm();
    if modulus < T::of(AMPLITUDE_FLOOR) || !ratio.re.is_finite() || !ratio.im.is_finite() {
        return Err(Error::AmplitudeZero {
            t: t.as_f64(),
            modulus: modulus.as_f64(),
        });
    }
    let two = T::of(2.0);
    Ok(RatePair {
        gamma: -two * ratio.re,
        shift: -two * ratio.im,
    })
}

/// `σ₋ = |g⟩⟨e|` in the basis `(|g⟩, |e⟩)`.
pub fn sigma_minus<T: Real>() -> CMatrix<T> {
    let mut m = CMatrix::zeros(2);
    m[(0, 1)] = creal(T::one());
    m
}

/// `σ₊ = |e⟩⟨g|`.
pub fn sigma_plus<T: Real>() -> CMatrix<T> {
    sigma_minus::<T>().adjoint()
}

pub(crate) fn jc_operators<T: Real>(p: &JcParams<T>, t: T) -> Result<TclOperators<T>> {
    let r = jc_rates(p, t)?;
    let mut h = CMatrix::zeros(2);
    h[(1, 1)] = creal(r.shift * T::of(0.5));
    let amp = (r.gamma.abs() * T::of(0.5)).sqrt();
    let mut c = CMatrix::zeros(2);
    c[(0, 1)] = creal(amp);
    let sign = if r.gamma > T::zero() {
        T::one()
    } else if r.gamma < T::zero() {
        -T::one()
    } else {
        T::zero()
    };
    let mut d = CMatrix::zeros(2);
    d[(0, 1)] = creal(amp * sign);
    Ok(TclOperators {
        hamiltonian: h,
        channels: vec![(c, d)],
    })
}

/// The JC master equation as a [`TclSpec`]: `H_S = ½ S σ₊σ₋`,
/// `C = √(|γ|/2) σ₋`, `D = sign(γ) C`.
pub fn jc_spec<T: Real>(p: JcParams<T>) -> TclSpec<T> {
    TclSpec::jaynes_cummings(p)
}

/// Cumulative integrals of the rates from 0.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RateIntegrals<T> {
    /// `∫₀ᵗ γ`
    pub gamma: T,
    /// `∫₀ᵗ |γ|`
    pub abs_gamma: T,
    /// `∫₀ᵗ a` with `a = |γ| - γ`
    pub a: T,
}

impl<T: Real> RateIntegrals<T> {
    /// No-jump probability of the first jump, `exp(-∫|γ|)`.
    pub fn first_survival(&self) -> T {
        (-self.abs_gamma).exp()
    }

    /// `exp(-∫a)`, the expected `2⟨ψ₂|ψ₁⟩`.
    pub fn coherence_decay(&self) -> T {
        (-self.a).exp()
    }
}

fn ln_c2<T: Real>(p: &JcParams<T>, t: T) -> Result<T> {
    let c = jc_amplitude(p, t);
    if c.norm() < T::of(AMPLITUDE_FLOOR) {
        return Err(Error::AmplitudeZero {
            t: t.as_f64(),
            modulus: c.norm().as_f64(),
        });
    }
    Ok(c.norm_sqr().ln())
}

/// Rate integrals at each time of an ascending, non-negative grid.
///
/// Uses `∫ γ = -Δ ln|c|²` on every interval of constant sign of γ; sign
/// changes are located by a scan at a resolution set by the model's
/// frequencies, refined by bisection.
pub fn jc_rate_integrals<T: Real>(p: &JcParams<T>, grid: &[T]) -> Result<Vec<RateIntegrals<T>>> {
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.first().is_some_and(|&t| t < T::zero()) {
        return Err(Error::Validation("grid must be ascending and non-negative".into()));
    }
    let h_scan = T::of(0.01) / p.frequency_scale();
    let gamma_at = |t: T| -> Result<T> { Ok(jc_rates(p, t)?.gamma) };

    let mut acc = RateIntegrals::<T>::default();
    let mut out = Vec::with_capacity(grid.len());
    let mut t = T::zero();
    let mut g_t = T::zero();
    let mut ln_t = T::zero();

    let add_piece = |acc: &mut RateIntegrals<T>, u: T, v: T, ln_u: T, ln_v: T| -> Result<()> {
        if v <= u {
            return Ok(());
        }
        let integral = ln_u - ln_v;
        let mid = gamma_at((u + v) * T::of(0.5))?;
        acc.gamma = acc.gamma + integral;
        acc.abs_gamma = acc.abs_gamma + integral.abs();
        if mid < T::zero() {
            acc.a = acc.a + T::of(2.0) * integral.abs();
        }
        Ok(())
    };

    for &target in grid {
        while t < target {
            let next = (t + h_scan).min(target);
            let g_next = gamma_at(next)?;
            let ln_next = ln_c2(p, next)?;
            if g_t * g_next < T::zero() {
                let (mut lo, mut hi) = (t, next);
                let g_lo = g_t;
                for _ in 0..200 {
                    let mid = (lo + hi) * T::of(0.5);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let gm = gamma_at(mid)?;
                    if gm * g_lo > T::zero() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let r = (lo + hi) * T::of(0.5);
                let ln_r = ln_c2(p, r)?;
                add_piece(&mut acc, t, r, ln_t, ln_r)?;
                add_piece(&mut acc, r, next, ln_r, ln_next)?;
            } else {
                add_piece(&mut acc, t, next, ln_t, ln_next)?;
            }
            t = next;
            g_t = g_next;
            ln_t = ln_next;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Intervals within `[0, t_end]` on which `γ(t) < 0`, located to scan
/// resolution and refined by bisection.
pub fn jc_negative_intervals<T: Real>(p: &JcParams<T>, t_end: T) -> Result<Vec<(T, T)>> {
    let h_scan = T::of(0.01) / p.frequency_scale();
    let gamma_at = |t: T| -> Result<T> { Ok(jc_rates(p, t)?.gamma) };
    let refine = |mut lo: T, mut hi: T, g_lo: T| -> Result<T> {
        for _ in 0..200 {
            let mid = (lo + hi) * T::of(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if gamma_at(mid)? * g_lo > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo + hi) * T::of(0.5))
    };
    let mut out = Vec::new();
    let mut t = T::zero();
    let mut g = gamma_at(h_scan.min(t_end) * T::of(1e-3))?;
    let mut start = if g < T::zero() { Some(T::zero()) } else { None };
    while t < t_end {
        let next = (t + h_scan).min(t_end);
        let g_next = gamma_at(next)?;
        if g * g_next < T::zero() {
            let r = refine(t, next, g)?;
            match start.take() {
                Some(s) => out.push((s, r)),
                None => start = Some(r),
            }
        }
        t = next;
        g = g_next;
    }
    if let Some(s) = start {
        out.push((s, t_end));
    }
    Ok(out)
}

impl<T: Real> Default for JcParams<T> {
    /// The strong-coupling example: γ₀/λ = 25, Δ/γ₀ = 0.2 with λ = 1.
    fn default() -> Self {
        Self {
            gamma0: T::of(25.0),
            lambda: T::one(),
            delta: T::of(5.0),
        }
    }
}
