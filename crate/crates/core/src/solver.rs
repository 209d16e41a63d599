//! Deterministic reference integration of the TCL equation on `ℋ` and of the
//! embedded Lindblad equation on `ℋ ⊗ ℂ³`.

use std::io::Write;

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::embedding::{build_embedded, BlockMatrix, AUX};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, CMatrix, OdeOptions, Stepper};
use crate::model::TclSpec;
use crate::scalar::{minus_i, Real};

/// A density matrix on `ℋ`.
pub type DensityMatrix<T> = CMatrix<T>;

/// A density matrix on `ℋ ⊗ ℂ³` in block form.
pub type BlockDensity<T> = BlockMatrix<T>;

/// Largest tolerated `|tr - 1|` during integration.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

/// Smallest `|tr W₁₂|` accepted when extracting `ρ`.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Integrator settings.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions<T> {
    /// Local error target per step.
    pub tol: T,
    /// Optional cap on the step size, for stiff or rapidly varying models.
    pub h_max: Option<T>,
}

impl<T: Real> SolveOptions<T> {
    pub fn new(tol: T) -> Self {
        Self { tol, h_max: None }
    }

    fn ode(&self, spec: &TclSpec<T>) -> OdeOptions<T> {
        let h_max = match (self.h_max, spec.max_step()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        OdeOptions {
            h_max,
            ..OdeOptions::with_tol(self.tol)
        }
    }
}

/// Checks Hermiticity, unit trace and positivity of `rho`.
pub fn validate_density<T: Real>(rho: &CMatrix<T>) -> Result<()> {
    let scale = T::one().max(rho.max_abs());
    if !rho.is_finite() || !rho.is_hermitian(T::tol(1e-10)) {
        return Err(Error::Validation("density matrix is not Hermitian".into()));
    }
    let tr = rho.trace();
    if (tr.re - T::one()).abs() > T::tol(1e-9) || tr.im.abs() > T::tol(1e-9) {
        return Err(Error::Validation(format!("density matrix has trace {tr}")));
    }
    let min = hermitian_eig(&rho.hermitian_part())?.min_eigenvalue();
    if min < -T::tol(1e-10) * scale {
        return Err(Error::PsdViolation {
            min_eigenvalue: min.as_f64(),
        });
    }
    Ok(())
}

fn validate_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Validation("empty output grid".into()));
    }
    if grid[0] < T::zero() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation(
            "output grid must be strictly ascending and start at t >= 0".into(),
        ));
    }
    Ok(())
}

/// Integrates from `t = 0` and reports the solution at every grid time.
///
/// Grid values inside an accepted step come from an exact Dormand–Prince
/// sub-step from the left end of that step, so output accuracy matches the
/// step accuracy. After every accepted step the state passes through
/// `project` and `check`.
fn integrate_on_grid<T, F, P, K>(
    rhs: &mut F,
    y0: &[Complex<T>],
    grid: &[T],
    ode: OdeOptions<T>,
    project: P,
    mut check: K,
) -> Result<Vec<Vec<Complex<T>>>>
where
    T: Real,
    F: FnMut(T, &[Complex<T>], &mut [Complex<T>]) -> Result<()>,
    P: Fn(&mut [Complex<T>]),
    K: FnMut(T, &[Complex<T>]) -> Result<()>,
{
    validate_grid(grid)?;
    let mut out = Vec::with_capacity(grid.len());
    let mut next = 0;
    while next < grid.len() && grid[next] == T::zero() {
        out.push(y0.to_vec());
        next += 1;
    }
    if next == grid.len() {
        return Ok(out);
    }
    let t_end = grid[grid.len() - 1];
    let mut stepper = Stepper::new(rhs, T::zero(), y0, ode)?;
    let mut buf = vec![Complex::zero(); y0.len()];
    while next < grid.len() {
        stepper.step(rhs, t_end)?;
        let t = stepper.t();
        while next < grid.len() && grid[next] <= t {
            let g = grid[next];
            if g == t {
                buf.copy_from_slice(stepper.y());
            } else {
                stepper.restep_from_prev(rhs, g - stepper.t_prev(), &mut buf)?;
            }
            project(&mut buf);
            out.push(buf.clone());
            next += 1;
        }
        let mut y = stepper.y().to_vec();
        project(&mut y);
        check(t, &y)?;
        stepper.set_state(rhs, &y)?;
    }
    Ok(out)
}

fn symmetrize_flat<T: Real>(dim: usize, y: &mut [Complex<T>]) {
    let half = T::of(0.5);
    for i in 0..dim {
        y[i * dim + i].im = T::zero();
        for j in i + 1..dim {
            let a = y[i * dim + j];
            let b = y[j * dim + i].conj();
            let m = (a + b) * half;
            y[i * dim + j] = m;
            y[j * dim + i] = m.conj();
        }
    }
}

fn trace_drift_check<T: Real>(t: T, tr: Complex<T>) -> Result<()> {
    let drift = (tr - Complex::one()).norm();
    if !(drift <= T::of(TRACE_DRIFT_LIMIT)) {
        return Err(Error::Accuracy {
            t: t.as_f64(),
            reason: format!("trace drifted by {:.3e}", drift.as_f64()),
        });
    }
    Ok(())
}

/// `ρ(t)` of the TCL equation at every grid time, integrated from `ρ(0)`.
pub fn solve_tcl<T: Real>(
    spec: &TclSpec<T>,
    rho0: &DensityMatrix<T>,
    grid: &[T],
    opts: &SolveOptions<T>,
) -> Result<Vec<DensityMatrix<T>>> {
    let d = spec.dim();
    if rho0.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: rho0.dim(),
        });
    }
    validate_density(rho0)?;
    let half = T::of(0.5);
    let mut rhs = |t: T, y: &[Complex<T>], dy: &mut [Complex<T>]| -> Result<()> {
        let ops = spec.at(t)?;
        let rho = CMatrix::from_row_major(y.to_vec())?;
        let mut out = ops.hamiltonian.commutator(&rho).scale(minus_i());
        let mut k = CMatrix::zeros(d);
        for (c, dd) in &ops.channels {
            out += &(c * &rho).mul_adjoint(dd);
            out += &(dd * &rho).mul_adjoint(c);
            k += &dd.adjoint_mul(c);
            k += &c.adjoint_mul(dd);
        }
        out -= &(&(&k * &rho) + &(&rho * &k)).scale_real(half);
        dy.copy_from_slice(out.as_slice());
        Ok(())
    };
    let states = integrate_on_grid(
        &mut rhs,
        rho0.as_slice(),
        grid,
        opts.ode(spec),
        |y| symmetrize_flat(d, y),
        |t, y| trace_drift_check(t, (0..d).map(|i| y[i * d + i]).sum()),
    )?;
    states.into_iter().map(CMatrix::from_row_major).collect()
}

/// One grid point of the embedded solution.
#[derive(Clone, Debug)]
pub struct ExtendedPoint<T> {
    pub t: T,
    pub w: BlockDensity<T>,
    /// `W₁₂ / tr W₁₂`
    pub rho: DensityMatrix<T>,
    pub trace: T,
    pub min_eigenvalue: T,
    pub tr_w12: Complex<T>,
    /// `max|W₂₁ - W₁₂|`
    pub w21_defect: T,
    /// `tr W₃₃`
    pub sink_population: T,
}

/// `ρ = W₁₂ / tr W₁₂`
pub fn extract_rho<T: Real>(t: T, w: &BlockDensity<T>) -> Result<DensityMatrix<T>> {
    let w12 = w.block(0, 1);
    let tr = w12.trace();
    if !(tr.norm() >= T::of(DENOMINATOR_FLOOR)) {
        return Err(Error::DenominatorUnderflow {
            t: t.as_f64(),
            value: tr.norm().as_f64(),
        });
    }
    Ok(w12.scale(tr.inv()))
}

/// Integrates the embedded Lindblad equation from `W(0) = ρ(0) ⊗ |χ⟩⟨χ|`
/// and extracts `ρ(t)` at every grid time.
pub fn solve_extended<T: Real>(
    spec: &TclSpec<T>,
    rho0: &DensityMatrix<T>,
    grid: &[T],
    opts: &SolveOptions<T>,
) -> Result<Vec<ExtendedPoint<T>>> {
    let d = spec.dim();
    if rho0.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: rho0.dim(),
        });
    }
    validate_density(rho0)?;
    let w0 = BlockMatrix::product_with_chi(rho0);
    let half = T::of(0.5);
    let mut rhs = |t: T, y: &[Complex<T>], dy: &mut [Complex<T>]| -> Result<()> {
        let gen = build_embedded(spec, t)?;
        let w = BlockMatrix::from_flat(d, y.to_vec());
        let loss = gen.loss().scale_real(half);
        let mut out = BlockMatrix::zeros(d);
        for k in 0..AUX {
            for l in 0..AUX {
                let wkl = w.block(k, l);
                let mut b = gen.hs.commutator(&wkl).scale(minus_i());
                if k < 2 {
                    b -= &(&loss * &wkl);
                }
                if l < 2 {
                    b -= &(&wkl * &loss);
                }
                out.set_block(k, l, &b);
            }
        }
        for ch in &gen.channels {
            for j in &ch.jumps {
                j.sandwich_acc(&w, &mut out);
            }
        }
        dy.copy_from_slice(out.as_slice());
        Ok(())
    };
    let states = integrate_on_grid(
        &mut rhs,
        w0.as_slice(),
        grid,
        opts.ode(spec),
        |y| {
            let w = BlockMatrix::from_flat(d, y.to_vec()).hermitian_part();
            y.copy_from_slice(w.as_slice());
        },
        |t, y| trace_drift_check(t, BlockMatrix::from_flat(d, y.to_vec()).trace()),
    )?;
    grid.iter()
        .zip(states)
        .map(|(&t, y)| {
            let w = BlockMatrix::from_flat(d, y);
            let rho = extract_rho(t, &w)?;
            let dense = w.to_dense().hermitian_part();
            Ok(ExtendedPoint {
                t,
                rho,
                trace: w.trace().re,
                min_eigenvalue: hermitian_eig(&dense)?.min_eigenvalue(),
                tr_w12: w.block(0, 1).trace(),
                w21_defect: w.block(1, 0).max_abs_diff(&w.block(0, 1)),
                sink_population: w.block(2, 2).trace().re,
                w,
            })
        })
        .collect()
}

/// `tr{(A ⊗ σₓ) W} / tr{(I ⊗ σₓ) W}`
pub fn observable_via_extended<T: Real>(a: &CMatrix<T>, w: &BlockDensity<T>) -> Result<Complex<T>> {
    let w12 = w.block(0, 1);
    let w21 = w.block(1, 0);
    let num = (a * &w12).trace() + (a * &w21).trace();
    let den = w12.trace() + w21.trace();
    if !(den.norm() >= T::of(DENOMINATOR_FLOOR)) {
        return Err(Error::DenominatorUnderflow {
            t: f64::NAN,
            value: den.norm().as_f64(),
        });
    }
    Ok(num / den)
}

/// Shortest round-trip decimal form, identical on every platform.
pub fn fmt_real<T: Real>(x: T) -> String {
    format!("{:e}", x.as_f64())
}

fn rho_header(d: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 0..d {
        for j in 0..d {
            h.push(format!("re_{i}{j}"));
            h.push(format!("im_{i}{j}"));
        }
    }
    h
}

fn rho_fields<T: Real>(t: T, rho: &CMatrix<T>) -> Vec<String> {
    let mut r = vec![fmt_real(t)];
    for z in rho.as_slice() {
        r.push(fmt_real(z.re));
        r.push(fmt_real(z.im));
    }
    r
}

/// CSV with `t`, the row-major `Re/Im` entries of `ρ`, then `trace`,
/// `purity` and `min_eig`.
pub fn write_tcl_csv<T: Real, W: Write>(out: W, grid: &[T], states: &[DensityMatrix<T>]) -> Result<()> {
    let d = states.first().map_or(0, |s| s.dim());
    let mut w = csv::Writer::from_writer(out);
    let mut header = rho_header(d);
    header.extend(["trace".into(), "purity".into(), "min_eig".into()]);
    w.write_record(&header)?;
    for (&t, rho) in grid.iter().zip(states) {
        let mut rec = rho_fields(t, rho);
        rec.push(fmt_real(rho.trace().re));
        rec.push(fmt_real((rho * rho).trace().re));
        rec.push(fmt_real(hermitian_eig(&rho.hermitian_part())?.min_eigenvalue()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with `t`, the extracted `ρ`, then `trace` and `min_eig` of `W` and
/// `Re/Im tr W₁₂`.
pub fn write_extended_csv<T: Real, W: Write>(out: W, points: &[ExtendedPoint<T>]) -> Result<()> {
    let d = points.first().map_or(0, |p| p.rho.dim());
    let mut w = csv::Writer::from_writer(out);
    let mut header = rho_header(d);
    header.extend(["trace".into(), "min_eig".into(), "tr_w12_re".into(), "tr_w12_im".into()]);
    w.write_record(&header)?;
    for p in points {
        let mut rec = rho_fields(p.t, &p.rho);
        rec.push(fmt_real(p.trace));
        rec.push(fmt_real(p.min_eigenvalue));
        rec.push(fmt_real(p.tr_w12.re));
        rec.push(fmt_real(p.tr_w12.im));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
