//! Ensemble averages and the ratio estimator
//! `ρ(t) ≈ E[|ψ₁⟩⟨ψ₂|] / E[⟨ψ₂|ψ₁⟩]`.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{run_trajectory, TrajectoryOptions};
use crate::error::{Error, Result};
use crate::linalg::{inner, CMatrix};
use crate::model::TclSpec;
use crate::scalar::Real;

/// Trajectories per work unit. Units are accumulated independently and
/// merged in index order, so results do not depend on the worker count.
pub const BLOCK_SIZE: usize = 64;

/// Smallest `|E[⟨ψ₂|ψ₁⟩]|` accepted by [`EnsembleAccumulator::estimate_rho`].
pub const DENOMINATOR_FLOOR: f64 = 1e-10;

/// Number of jump-count bins; the last one collects `N ≥ JUMP_BINS - 1`.
pub const JUMP_BINS: usize = 4;

/// Running first and second moments of `v = (Re X, Im X, Re Y, Im Y)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Moments<T> {
    s: [T; 4],
    /// Upper triangle of `Σ v vᵀ`, row-major.
    ss: [T; 10],
}

const PAIRS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

impl<T: Real> Moments<T> {
    fn add(&mut self, x: Complex<T>, y: Complex<T>) {
        let v = [x.re, x.im, y.re, y.im];
        for (s, vi) in self.s.iter_mut().zip(v) {
            *s = *s + vi;
        }
        for (ss, (i, j)) in self.ss.iter_mut().zip(PAIRS) {
            *ss = *ss + v[i] * v[j];
        }
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.s.iter_mut().zip(other.s) {
            *a = *a + b;
        }
        for (a, b) in self.ss.iter_mut().zip(other.ss) {
            *a = *a + b;
        }
    }

    /// Sample covariance of `v`.
    fn covariance(&self, n: T) -> [[T; 4]; 4] {
        let mut c = [[T::zero(); 4]; 4];
        for (ss, (i, j)) in self.ss.iter().zip(PAIRS) {
            let v = (*ss - self.s[i] * self.s[j] / n) / (n - T::one());
            c[i][j] = v;
            c[j][i] = v;
        }
        c
    }

    /// Standard error of the mean of `w·v`.
    fn stderr(&self, n: T, w: [T; 4]) -> T {
        let c = self.covariance(n);
        let mut var = T::zero();
        for i in 0..4 {
            for j in 0..4 {
                var = var + w[i] * c[i][j] * w[j];
            }
        }
        (var.max(T::zero()) / n).sqrt()
    }
}

/// Sums over trajectories at every grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleAccumulator<T> {
    dim: usize,
    grid: Vec<T>,
    /// `[grid][i * d + j]`, moments of `X = (ψ₁)ᵢ (ψ₂)ⱼ*` with `Y = ⟨ψ₂|ψ₁⟩`.
    entries: Vec<Moments<T>>,
    /// `[grid][bin]`
    jump_hist: Vec<[u64; JUMP_BINS]>,
    count: u64,
    max_norm_error: T,
    max_jumps: usize,
}

impl<T: Real> EnsembleAccumulator<T> {
    pub fn new(dim: usize, grid: &[T]) -> Self {
        Self {
            dim,
            grid: grid.to_vec(),
            entries: vec![Moments::default(); grid.len() * dim * dim],
            jump_hist: vec![[0; JUMP_BINS]; grid.len()],
            count: 0,
            max_norm_error: T::zero(),
            max_jumps: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn max_norm_error(&self) -> T {
        self.max_norm_error
    }

    pub fn max_jumps(&self) -> usize {
        self.max_jumps
    }

    /// Trajectories with `N(t_k) = n` jumps; the last bin collects the rest.
    pub fn jump_histogram(&self, k: usize) -> [u64; JUMP_BINS] {
        self.jump_hist[k]
    }

    /// Adds the snapshot `Φ = (ψ₁, ψ₂, ψ₃)` at grid index `k`.
    pub fn record(&mut self, k: usize, phi: &[Complex<T>], n_jumps: usize) {
        let d = self.dim;
        let (psi1, rest) = phi.split_at(d);
        let psi2 = &rest[..d];
        let y = inner(psi2, psi1);
        let base = k * d * d;
        for i in 0..d {
            for j in 0..d {
                self.entries[base + i * d + j].add(psi1[i] * psi2[j].conj(), y);
            }
        }
        self.jump_hist[k][n_jumps.min(JUMP_BINS - 1)] += 1;
    }

    /// Closes one trajectory.
    pub fn finish_trajectory(&mut self, max_norm_error: T, n_jumps: usize) {
        self.count += 1;
        self.max_norm_error = self.max_norm_error.max(max_norm_error);
        self.max_jumps = self.max_jumps.max(n_jumps);
    }

    /// Adds `other` into `self`. Floating-point sums depend on the merge
    /// order, which callers keep fixed.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.dim != self.dim || other.grid != self.grid {
            return Err(Error::Logic("merging accumulators over different grids".into()));
        }
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.merge(b);
        }
        for (a, b) in self.jump_hist.iter_mut().zip(&other.jump_hist) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.count += other.count;
        self.max_norm_error = self.max_norm_error.max(other.max_norm_error);
        self.max_jumps = self.max_jumps.max(other.max_jumps);
        Ok(())
    }

    fn n(&self) -> T {
        T::of(self.count as f64)
    }

    fn moments(&self, k: usize, i: usize, j: usize) -> &Moments<T> {
        &self.entries[(k * self.dim + i) * self.dim + j]
    }

    /// `E[(ψ₁)ᵢ (ψ₂)ⱼ*]` at grid index `k`, with standard errors of the
    /// real and imaginary parts.
    pub fn numerator_mean(&self, k: usize, i: usize, j: usize) -> (Complex<T>, T, T) {
        let m = self.moments(k, i, j);
        let n = self.n();
        let mean = Complex::new(m.s[0], m.s[1]) / n;
        let z = T::zero();
        let one = T::one();
        (mean, m.stderr(n, [one, z, z, z]), m.stderr(n, [z, one, z, z]))
    }

    /// `E[⟨ψ₂|ψ₁⟩]` at grid index `k`, with standard errors of the real and
    /// imaginary parts.
    pub fn denominator_mean(&self, k: usize) -> (Complex<T>, T, T) {
        let m = self.moments(k, 0, 0);
        let n = self.n();
        let mean = Complex::new(m.s[2], m.s[3]) / n;
        let z = T::zero();
        let one = T::one();
        (mean, m.stderr(n, [z, z, one, z]), m.stderr(n, [z, z, z, one]))
    }

    /// Ratio estimate of `ρ(t_k)`.
    pub fn estimate_rho(&self, k: usize) -> Result<RhoEstimate<T>> {
        if self.count < 2 {
            return Err(Error::Validation("the estimator needs at least two trajectories".into()));
        }
        let d = self.dim;
        let n = self.n();
        let (den, _, _) = self.denominator_mean(k);
        if !(den.norm() >= T::of(DENOMINATOR_FLOOR)) {
            return Err(Error::IllConditioned {
                t: self.grid[k].as_f64(),
                value: den.norm().as_f64(),
            });
        }
        let inv = den.inv();
        let raw = CMatrix::from_fn(d, |i, j| {
            let m = self.moments(k, i, j);
            Complex::new(m.s[0], m.s[1]) / n * inv
        });
        let mut stderr_re = vec![T::zero(); d * d];
        let mut stderr_im = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                // δR = (δX - R δY) / Ȳ = a δX + b δY
                let a = inv;
                let b = -raw[(i, j)] * inv;
                let m = self.moments(k, i, j);
                let re = [a.re, -a.im, b.re, -b.im];
                let im = [a.im, a.re, b.im, b.re];
                stderr_re[i * d + j] = m.stderr(n, re);
                stderr_im[i * d + j] = m.stderr(n, im);
            }
        }
        let anti = raw.anti_hermitian_part().max_abs();
        Ok(RhoEstimate {
            t: self.grid[k],
            rho: raw.hermitian_part(),
            raw,
            anti_hermitian_residual: anti,
            stderr_re,
            stderr_im,
            denominator: den,
        })
    }
}

/// Output of [`EnsembleAccumulator::estimate_rho`].
#[derive(Clone, Debug)]
pub struct RhoEstimate<T> {
    pub t: T,
    /// Hermitian part of the ratio, the reported estimate.
    pub rho: CMatrix<T>,
    /// The ratio of means as computed.
    pub raw: CMatrix<T>,
    /// `max|(raw - raw†)/2|`, zero in expectation.
    pub anti_hermitian_residual: T,
    /// Delta-method standard errors of `Re raw_ij`, row-major.
    pub stderr_re: Vec<T>,
    pub stderr_im: Vec<T>,
    pub denominator: Complex<T>,
}

impl<T: Real> RhoEstimate<T> {
    pub fn stderr_re(&self, i: usize, j: usize) -> T {
        self.stderr_re[i * self.rho.dim() + j]
    }

    pub fn stderr_im(&self, i: usize, j: usize) -> T {
        self.stderr_im[i * self.rho.dim() + j]
    }
}

/// Ensemble run settings.
#[derive(Clone, Copy, Debug)]
pub struct EnsembleConfig<T> {
    pub ntraj: usize,
    pub seed: u64,
    /// Worker threads; does not affect the result.
    pub workers: usize,
    pub opts: TrajectoryOptions<T>,
}

/// Generator for trajectory `k`: stream `k` of the ChaCha key derived from
/// `seed`.
pub fn trajectory_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

fn run_block<T: Real>(
    spec: &TclSpec<T>,
    phi: &[Complex<T>],
    grid: &[T],
    cfg: &EnsembleConfig<T>,
    block: usize,
) -> Result<EnsembleAccumulator<T>> {
    let mut acc = EnsembleAccumulator::new(spec.dim(), grid);
    let start = block * BLOCK_SIZE;
    let end = (start + BLOCK_SIZE).min(cfg.ntraj);
    for k in start..end {
        let mut rng = trajectory_rng(cfg.seed, k as u64);
        let (jumps, err) = run_trajectory(spec, phi, grid, &mut rng, &cfg.opts, |idx, p, n| {
            acc.record(idx, p, n)
        })?;
        acc.finish_trajectory(err, jumps.len());
    }
    Ok(acc)
}

/// Simulates `cfg.ntraj` trajectories from `|φ⟩ ⊗ |χ⟩` on `cfg.workers`
/// threads. The result is bitwise reproducible for a given seed,
/// independent of the worker count.
pub fn run_ensemble<T: Real>(
    spec: &TclSpec<T>,
    phi: &[Complex<T>],
    grid: &[T],
    cfg: &EnsembleConfig<T>,
) -> Result<EnsembleAccumulator<T>> {
    if cfg.ntraj == 0 || cfg.workers == 0 {
        return Err(Error::Validation("ntraj and workers must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Logic(format!("thread pool: {e}")))?;
    let n_blocks = cfg.ntraj.div_ceil(BLOCK_SIZE);
    // bounded number of partial accumulators alive at once
    let wave = 4 * cfg.workers;
    let mut total = EnsembleAccumulator::new(spec.dim(), grid);
    let mut first = 0;
    while first < n_blocks {
        let last = (first + wave).min(n_blocks);
        let parts: Vec<Result<EnsembleAccumulator<T>>> = pool.install(|| {
            (first..last)
                .into_par_iter()
                .map(|b| run_block(spec, phi, grid, cfg, b))
                .collect()
        });
        for p in parts {
            total.merge(&p?)?;
        }
        first = last;
    }
    Ok(total)
}

/// Writes the estimate at every grid time. Columns: `t`, optionally
/// `pg_exact`, then `pg_mc`, `pg_stderr` (the `(0,0)` entry), `denom_mc`,
/// `denom_stderr` for `E[2⟨ψ₂|ψ₁⟩]`, optionally `denom_exact`, the full
/// `ρ` with standard errors, the anti-Hermitian residual and the jump-count
/// histogram `n0 … n3plus`.
pub fn write_estimate_csv<T: Real, W: std::io::Write>(
    out: W,
    acc: &EnsembleAccumulator<T>,
    exact: Option<(&[T], &[T])>,
) -> Result<()> {
    use crate::solver::fmt_real;
    let d = acc.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = vec!["t".into()];
    if exact.is_some() {
        header.push("pg_exact".into());
    }
    header.extend(["pg_mc", "pg_stderr", "denom_mc", "denom_stderr"].map(String::from));
    if exact.is_some() {
        header.push("denom_exact".into());
    }
    for i in 0..d {
        for j in 0..d {
            for prefix in ["re", "im", "se_re", "se_im"] {
                header.push(format!("{prefix}_{i}{j}"));
            }
        }
    }
    header.push("anti_hermitian".into());
    for b in 0..JUMP_BINS - 1 {
        header.push(format!("n{b}"));
    }
    header.push(format!("n{}plus", JUMP_BINS - 1));
    w.write_record(&header)?;

    let two = T::of(2.0);
    for (k, &t) in acc.grid().iter().enumerate() {
        let est = acc.estimate_rho(k)?;
        let (den, den_se, _) = acc.denominator_mean(k);
        let mut rec = vec![fmt_real(t)];
        if let Some((pg, _)) = exact {
            rec.push(fmt_real(pg[k]));
        }
        rec.push(fmt_real(est.rho[(0, 0)].re));
        rec.push(fmt_real(est.stderr_re(0, 0)));
        rec.push(fmt_real(two * den.re));
        rec.push(fmt_real(two * den_se));
        if let Some((_, dn)) = exact {
            rec.push(fmt_real(dn[k]));
        }
        for i in 0..d {
            for j in 0..d {
                rec.push(fmt_real(est.rho[(i, j)].re));
                rec.push(fmt_real(est.rho[(i, j)].im));
                rec.push(fmt_real(est.stderr_re(i, j)));
                rec.push(fmt_real(est.stderr_im(i, j)));
            }
        }
        rec.push(fmt_real(est.anti_hermitian_residual));
        rec.extend(acc.jump_histogram(k).iter().map(|n| n.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
