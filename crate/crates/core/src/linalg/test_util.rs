//! Independent oracles and random generators for unit tests.

use num_complex::Complex;
use rand::Rng;

use super::matrix::CMatrix;

pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, scale: f64) -> CMatrix<f64> {
    CMatrix::from_fn(n, |_, _| {
        Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
    })
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize, scale: f64) -> CMatrix<f64> {
    random_matrix(rng, n, scale).hermitian_part()
}

/// Rescales `m` to operator 2-norm `target`, measured by power iteration.
pub fn with_norm(m: &CMatrix<f64>, target: f64) -> CMatrix<f64> {
    let gram = m.adjoint_mul(m);
    let n = power_iteration_max(&gram).sqrt();
    m.scale_real(target / n)
}

/// Characteristic polynomial coefficients by Faddeev–LeVerrier, highest
/// degree first (monic).
fn char_poly(m: &CMatrix<f64>) -> Vec<f64> {
    let n = m.dim();
    let mut coeffs = vec![1.0];
    let mut mk = CMatrix::<f64>::zeros(n);
    let eye = CMatrix::<f64>::identity(n);
    let mut c_prev = Complex::new(1.0, 0.0);
    for k in 1..=n {
        mk = &(m * &mk) + &eye.scale(c_prev);
        let c = -(m * &mk).trace() / k as f64;
        coeffs.push(c.re);
        c_prev = c;
    }
    coeffs
}

fn horner(p: &[f64], x: f64) -> f64 {
    p.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Eigenvalues of a Hermitian matrix as real roots of its characteristic
/// polynomial, located by a sign-change scan and bisection. Assumes simple
/// roots, which holds almost surely for random matrices.
pub fn char_poly_roots(m: &CMatrix<f64>) -> Vec<f64> {
    let p = char_poly(m);
    let n = m.dim();
    // Gershgorin bound
    let bound = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1e-9;
    let steps = 200_000;
    let mut roots = Vec::new();
    let mut x0 = -bound;
    let mut f0 = horner(&p, x0);
    for s in 1..=steps {
        let x1 = -bound + 2.0 * bound * s as f64 / steps as f64;
        let f1 = horner(&p, x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut lo, mut hi, mut flo) = (x0, x1, f0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = horner(&p, mid);
                if fm * flo <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    assert_eq!(roots.len(), n, "root scan failed to isolate all eigenvalues");
    roots
}

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
pub fn power_iteration_max(m: &CMatrix<f64>) -> f64 {
    let n = m.dim();
    let mut v: Vec<Complex<f64>> = (0..n)
        .map(|k| Complex::new(1.0 + 0.1 * k as f64, 0.3 - 0.05 * k as f64))
        .collect();
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let w = m.mul_vec(&v);
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next: Vec<_> = w.iter().map(|z| z / norm).collect();
        let new_lambda = norm;
        v = next;
        if (new_lambda - lambda).abs() <= 1e-15 * new_lambda {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    lambda
}

/// `exp(M)` by scaling and squaring with a Taylor series.
pub fn expm(m: &CMatrix<f64>) -> CMatrix<f64> {
    let n = m.dim();
    let norm = m.max_abs() * n as f64;
    let mut squarings = 0;
    let mut scaled = m.clone();
    let mut s = norm;
    while s > 0.25 {
        s *= 0.5;
        squarings += 1;
    }
    scaled = scaled.scale_real(0.5f64.powi(squarings));
    let mut term = CMatrix::<f64>::identity(n);
    let mut sum = CMatrix::<f64>::identity(n);
    for k in 1..30 {
        term = (&term * &scaled).scale_real(1.0 / k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}
