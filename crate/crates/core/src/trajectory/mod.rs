//! Piecewise deterministic jump process on `ℋ ⊗ ℂ³` unravelling a TCL
//! master equation.
//!
//! A trajectory starts in `|φ⟩ ⊗ |χ⟩`, drifts under the non-Hermitian
//! `Ĥ = H - (i/2) Σ J†J` and jumps through `J_{iα}`. Between jumps the
//! unnormalized state is propagated linearly, so its squared norm is the
//! survival probability; snapshots and post-jump states are normalized.

mod ensemble;

pub use ensemble::{
    run_ensemble, trajectory_rng, write_estimate_csv, EnsembleAccumulator, EnsembleConfig,
    RhoEstimate, BLOCK_SIZE, DENOMINATOR_FLOOR, JUMP_BINS,
};

use num_complex::Complex;
use num_traits::Zero;
use rand::distributions::{Open01, Standard};
use rand::Rng;

use crate::embedding::{aux_chi, build_embedded, drift_operators, ChannelId, AUX};
use crate::error::{Error, Result};
use crate::linalg::{inner, norm_sqr, normalize, CMatrix, OdeOptions, StateVector, Stepper};
use crate::model::TclSpec;
use crate::scalar::{minus_i, Real};

/// Integration settings for the drift.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryOptions<T> {
    /// Local error target of the drift integrator.
    pub tol: T,
    pub h_max: Option<T>,
}

impl<T: Real> TrajectoryOptions<T> {
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

/// One entry of the jump log.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpRecord<T> {
    pub t: T,
    pub channel: ChannelId,
    /// `2⟨ψ₂|ψ₁⟩` right after the jump; `±1` for a single jump in the
    /// ground manifold, carrying `sign γ`.
    pub coherence: Complex<T>,
    /// `‖ψ₃‖²` right after the jump.
    pub sink_weight: T,
}

/// State `|Φ⟩ = ψ₁ ⊗ |1⟩ + ψ₂ ⊗ |2⟩ + ψ₃ ⊗ |3⟩` with its jump history.
#[derive(Clone, Debug)]
pub struct TrajectoryState<T> {
    dim: usize,
    /// Concatenated blocks `(ψ₁, ψ₂, ψ₃)`.
    pub phi: StateVector<T>,
    pub t: T,
    pub jumps: Vec<JumpRecord<T>>,
}

impl<T: Real> TrajectoryState<T> {
    /// `|φ⟩ ⊗ |χ⟩` at `t = 0`, normalizing `φ`.
    pub fn product(phi: &[Complex<T>]) -> Result<Self> {
        let mut p = phi.to_vec();
        if !(normalize(&mut p) > T::zero()) {
            return Err(Error::Validation("initial state has zero norm".into()));
        }
        let chi = aux_chi::<T>();
        let mut full = Vec::with_capacity(AUX * p.len());
        for c in chi {
            full.extend(p.iter().map(|&x| x * c));
        }
        Ok(Self {
            dim: p.len(),
            phi: full,
            t: T::zero(),
            jumps: Vec::new(),
        })
    }

    pub fn from_blocks(phi: StateVector<T>, t: T) -> Self {
        assert_eq!(phi.len() % AUX, 0);
        Self {
            dim: phi.len() / AUX,
            phi,
            t,
            jumps: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self, k: usize) -> &[Complex<T>] {
        &self.phi[k * self.dim..(k + 1) * self.dim]
    }

    pub fn psi1(&self) -> &[Complex<T>] {
        self.block(0)
    }

    pub fn psi2(&self) -> &[Complex<T>] {
        self.block(1)
    }

    pub fn psi3(&self) -> &[Complex<T>] {
        self.block(2)
    }

    pub fn n_jumps(&self) -> usize {
        self.jumps.len()
    }

    pub fn norm_error(&self) -> T {
        (norm_sqr(&self.phi) - T::one()).abs()
    }
}

/// `-iĤ` restricted to the blocks: `-iH_S - ½K` on `ℋ₁, ℋ₂` and `-iH_S`
/// on the sink `ℋ₃`.
#[derive(Clone, Debug)]
pub struct DriftGenerator<T> {
    pub active: CMatrix<T>,
    pub sink: CMatrix<T>,
}

impl<T: Real> DriftGenerator<T> {
    pub fn at(spec: &TclSpec<T>, t: T) -> Result<Self> {
        let (h, k) = drift_operators(&spec.at(t)?)?;
        let sink = h.scale(minus_i());
        let active = &sink - &k.scale_real(T::of(0.5));
        Ok(Self { active, sink })
    }

    pub fn apply(&self, y: &[Complex<T>], dy: &mut [Complex<T>]) {
        let d = self.active.dim();
        self.active.mul_vec_into(&y[..d], &mut dy[..d]);
        self.active.mul_vec_into(&y[d..2 * d], &mut dy[d..2 * d]);
        self.sink.mul_vec_into(&y[2 * d..], &mut dy[2 * d..]);
    }
}

fn drift_rhs<T: Real>(
    spec: &TclSpec<T>,
) -> impl FnMut(T, &[Complex<T>], &mut [Complex<T>]) -> Result<()> + '_ {
    move |t, y, dy| {
        DriftGenerator::at(spec, t)?.apply(y, dy);
        Ok(())
    }
}

/// Propagates `state` to `t1` without jumps. Returns the renormalized state
/// and the squared norm before renormalization, `1 - F(t1, t0)`.
pub fn drift<T: Real>(
    spec: &TclSpec<T>,
    state: &TrajectoryState<T>,
    t1: T,
    opts: &TrajectoryOptions<T>,
) -> Result<(TrajectoryState<T>, T)> {
    if t1 < state.t {
        return Err(Error::Validation("drift target lies in the past".into()));
    }
    let mut rhs = drift_rhs(spec);
    let mut stepper = Stepper::new(&mut rhs, state.t, &state.phi, opts.ode(spec))?;
    stepper.advance_to(&mut rhs, t1)?;
    let mut out = state.clone();
    out.phi.copy_from_slice(stepper.y());
    out.t = t1;
    let survival = normalize(&mut out.phi);
    Ok((out, survival * survival))
}

enum SegmentEnd<T> {
    Jump { t: T, phi: StateVector<T> },
    Survived,
}

const ROOT_MAX_ITER: usize = 200;

/// Drifts from `(t0, phi)` until the squared norm falls to `threshold` or
/// `t_max` is reached. `visit(stepper, hi, inclusive)` is called after
/// every accepted step with the part of that step that precedes any jump.
fn run_segment<T, F, V>(
    spec: &TclSpec<T>,
    rhs: &mut F,
    phi: &[Complex<T>],
    t0: T,
    t_max: T,
    threshold: T,
    ode: OdeOptions<T>,
    mut visit: V,
) -> Result<SegmentEnd<T>>
where
    T: Real,
    F: FnMut(T, &[Complex<T>], &mut [Complex<T>]) -> Result<()>,
    V: FnMut(&Stepper<T>, T, bool),
{
    if t0 >= t_max {
        return Ok(SegmentEnd::Survived);
    }
    let mut stepper = Stepper::new(rhs, t0, phi, ode)?;
    let mut buf = vec![Complex::zero(); phi.len()];
    while stepper.t() < t_max {
        stepper.step(rhs, t_max)?;
        if norm_sqr(stepper.y()) > threshold {
            visit(&stepper, stepper.t(), true);
            continue;
        }
        // Illinois on g(t) = ‖Φ(t)‖² - threshold, g(lo) > 0 >= g(hi)
        let g = |t: T, buf: &mut [Complex<T>]| {
            stepper.dense(t, buf);
            norm_sqr(buf) - threshold
        };
        let (mut lo, mut hi) = (stepper.t_prev(), stepper.t());
        let mut g_lo = g(lo, &mut buf);
        let mut g_hi = norm_sqr(stepper.y()) - threshold;
        if !(g_lo > T::zero()) {
            return Err(Error::Integration {
                t: lo.as_f64(),
                reason: "waiting-time bracket lost".into(),
            });
        }
        let width_tol = T::epsilon() * T::of(8.0) * T::one().max(hi.abs());
        let mut side = 0i8;
        for _ in 0..ROOT_MAX_ITER {
            if hi - lo <= width_tol || g_hi == T::zero() {
                break;
            }
            let mut t = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
            if !(t > lo && t < hi) {
                t = (lo + hi) * T::of(0.5);
            }
            let gt = g(t, &mut buf);
            if gt > T::zero() {
                lo = t;
                g_lo = gt;
                if side == 1 {
                    g_hi = g_hi * T::of(0.5);
                }
                side = 1;
            } else {
                hi = t;
                g_hi = gt;
                if side == -1 {
                    g_lo = g_lo * T::of(0.5);
                }
                side = -1;
            }
        }
        let mut t_jump = hi;
        let mut out = vec![Complex::zero(); phi.len()];
        stepper.dense(t_jump, &mut out);
        if !active(spec, &out, t_jump)? {
            // The crossing sits where every rate vanishes, which only
            // integration error can produce. Move it back to the last
            // moment in this step at which some channel was open.
            t_jump = last_active(spec, &stepper, t_jump)?;
            stepper.dense(t_jump, &mut out);
        }
        visit(&stepper, t_jump, false);
        return Ok(SegmentEnd::Jump { t: t_jump, phi: out });
    }
    Ok(SegmentEnd::Survived)
}

fn active<T: Real>(spec: &TclSpec<T>, phi: &[Complex<T>], t: T) -> Result<bool> {
    let state = TrajectoryState::from_blocks(phi.to_vec(), t);
    let total: T = jump_rates(spec, &state, t)?.iter().map(|r| r.1).sum();
    Ok(total > T::zero())
}

/// Latest time in the last accepted step, before `t`, with a positive
/// total jump rate.
fn last_active<T: Real>(spec: &TclSpec<T>, stepper: &Stepper<T>, t: T) -> Result<T> {
    const SCAN: usize = 64;
    let lo = stepper.t_prev();
    let mut buf = vec![Complex::zero(); stepper.y().len()];
    let mut is_active = |t: T| -> Result<bool> {
        stepper.dense(t, &mut buf);
        active(spec, &buf, t)
    };
    let mut off = t;
    for k in 1..=SCAN {
        let on = t - (t - lo) * T::of(k as f64 / SCAN as f64);
        if is_active(on)? {
            let mut on = on;
            for _ in 0..ROOT_MAX_ITER {
                let mid = (on + off) * T::of(0.5);
                if mid <= on || mid >= off {
                    break;
                }
                if is_active(mid)? {
                    on = mid;
                } else {
                    off = mid;
                }
            }
            return Ok(on);
        }
        off = on;
    }
    Err(Error::Integration {
        t: t.as_f64(),
        reason: "norm fell during a step in which no channel is open".into(),
    })
}

/// Smallest `t₁ ≤ t_max` with `F(t₁, state.t) ≥ u`, or `None` if no jump
/// occurs before `t_max`.
pub fn sample_waiting_time<T: Real>(
    spec: &TclSpec<T>,
    state: &TrajectoryState<T>,
    t_max: T,
    u: T,
    opts: &TrajectoryOptions<T>,
) -> Result<Option<T>> {
    if !(u > T::zero() && u < T::one()) {
        return Err(Error::Validation("uniform draw must lie in (0, 1)".into()));
    }
    let mut rhs = drift_rhs(spec);
    let mut phi = state.phi.clone();
    normalize(&mut phi);
    match run_segment(spec, &mut rhs, &phi, state.t, t_max, T::one() - u, opts.ode(spec), |_, _, _| {})? {
        SegmentEnd::Jump { t, .. } => Ok(Some(t)),
        SegmentEnd::Survived => Ok(None),
    }
}

/// `‖J_{iα}(t) Φ‖²` for every channel, ordered by `α` then `i`.
pub fn jump_rates<T: Real>(
    spec: &TclSpec<T>,
    state: &TrajectoryState<T>,
    t: T,
) -> Result<Vec<(ChannelId, T)>> {
    let gen = build_embedded(spec, t)?;
    Ok(gen
        .jumps()
        .map(|(id, j)| (id, norm_sqr(&j.apply(&state.phi))))
        .collect())
}

/// Picks a channel with probability proportional to its rate, using a
/// uniform draw `v ∈ [0, 1)`.
pub fn select_channel<T: Real>(
    spec: &TclSpec<T>,
    state: &TrajectoryState<T>,
    t: T,
    v: T,
) -> Result<ChannelId> {
    let rates = jump_rates(spec, state, t)?;
    let total: T = rates.iter().map(|r| r.1).sum();
    if !(total > T::zero()) {
        return Err(Error::Logic(format!(
            "jump requested at t = {} with zero total rate",
            t.as_f64()
        )));
    }
    let target = v * total;
    let mut acc = T::zero();
    let mut last = None;
    for (id, r) in rates {
        if r > T::zero() {
            acc = acc + r;
            last = Some(id);
            if target < acc {
                return Ok(id);
            }
        }
    }
    Ok(last.expect("some rate is positive"))
}

/// `|Φ⟩ → J|Φ⟩ / ‖J|Φ⟩‖`, logged in the jump history.
pub fn apply_jump<T: Real>(
    spec: &TclSpec<T>,
    state: &mut TrajectoryState<T>,
    channel: ChannelId,
    t: T,
) -> Result<()> {
    let gen = build_embedded(spec, t)?;
    let j = gen
        .channels
        .get(channel.alpha)
        .and_then(|ch| ch.jumps.get(channel.op as usize - 1))
        .ok_or_else(|| Error::Logic(format!("no channel {channel:?}")))?;
    let mut image = j.apply(&state.phi);
    if !(normalize(&mut image) > T::zero()) {
        return Err(Error::Logic(format!(
            "jump {channel:?} at t = {} annihilates the state",
            t.as_f64()
        )));
    }
    state.phi = image;
    state.t = t;
    let coherence = inner(state.psi2(), state.psi1()) * T::of(2.0);
    let sink_weight = norm_sqr(state.psi3());
    state.jumps.push(JumpRecord {
        t,
        channel,
        coherence,
        sink_weight,
    });
    Ok(())
}

/// Normalized state at one grid time.
#[derive(Clone, Debug)]
pub struct Snapshot<T> {
    pub t: T,
    pub phi: StateVector<T>,
    pub n_jumps: usize,
}

impl<T: Real> Snapshot<T> {
    pub fn block(&self, k: usize) -> &[Complex<T>] {
        let d = self.phi.len() / AUX;
        &self.phi[k * d..(k + 1) * d]
    }
}

/// A full realization.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub snapshots: Vec<Snapshot<T>>,
    pub jumps: Vec<JumpRecord<T>>,
    /// Largest `|‖Φ‖² - 1|` over snapshots and post-jump states.
    pub max_norm_error: T,
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() || grid[0] < T::zero() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation(
            "output grid must be non-empty, strictly ascending and start at t >= 0".into(),
        ));
    }
    Ok(())
}

/// Runs one trajectory from `|φ⟩ ⊗ |χ⟩`, reporting each grid snapshot to
/// `visit(index, normalized Φ, jumps so far)`. Returns the jump log and the
/// largest norm defect seen.
pub(crate) fn run_trajectory<T, R, V>(
    spec: &TclSpec<T>,
    phi: &[Complex<T>],
    grid: &[T],
    rng: &mut R,
    opts: &TrajectoryOptions<T>,
    mut visit: V,
) -> Result<(Vec<JumpRecord<T>>, T)>
where
    T: Real,
    R: Rng,
    V: FnMut(usize, &[Complex<T>], usize),
{
    check_grid(grid)?;
    if phi.len() != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            got: phi.len(),
        });
    }
    let mut state = TrajectoryState::product(phi)?;
    let t_end = grid[grid.len() - 1];
    let mut next = 0;
    let mut max_err = state.norm_error();
    let mut rhs = drift_rhs(spec);
    let mut snap = vec![Complex::zero(); state.phi.len()];
    loop {
        while next < grid.len() && grid[next] <= state.t {
            visit(next, &state.phi, state.n_jumps());
            next += 1;
        }
        let u: f64 = rng.sample(Open01);
        let threshold = T::one() - T::of(u);
        let n_jumps = state.n_jumps();
        let end = run_segment(spec, &mut rhs, &state.phi, state.t, t_end, threshold, opts.ode(spec), |s, hi, inclusive| {
            while next < grid.len() && (grid[next] < hi || (inclusive && grid[next] == hi)) {
                s.dense(grid[next], &mut snap);
                let n = normalize(&mut snap);
                if n > T::zero() {
                    max_err = max_err.max((norm_sqr(&snap) - T::one()).abs());
                }
                visit(next, &snap, n_jumps);
                next += 1;
            }
        })?;
        match end {
            SegmentEnd::Survived => break,
            SegmentEnd::Jump { t, phi } => {
                state.phi = phi;
                normalize(&mut state.phi);
                state.t = t;
                let v: f64 = rng.sample(Standard);
                let channel = select_channel(spec, &state, t, T::of(v))?;
                apply_jump(spec, &mut state, channel, t)?;
                max_err = max_err.max(state.norm_error());
            }
        }
    }
    Ok((state.jumps, max_err))
}

/// Simulates one trajectory and keeps every snapshot.
pub fn simulate_trajectory<T: Real, R: Rng>(
    spec: &TclSpec<T>,
    phi: &[Complex<T>],
    grid: &[T],
    rng: &mut R,
    opts: &TrajectoryOptions<T>,
) -> Result<Trajectory<T>> {
    let mut snapshots = Vec::with_capacity(grid.len());
    let (jumps, max_norm_error) = run_trajectory(spec, phi, grid, rng, opts, |k, p, n| {
        snapshots.push(Snapshot {
            t: grid[k],
            phi: p.to_vec(),
            n_jumps: n,
        })
    })?;
    Ok(Trajectory {
        snapshots,
        jumps,
        max_norm_error,
    })
}

#[cfg(test)]
mod tests;
