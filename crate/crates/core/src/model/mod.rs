//! Time-local non-Markovian master equations
//!
//! ```text
//! dρ/dt = -i[H_S, ρ] + Σ_α (C_α ρ D_α† + D_α ρ C_α†) - ½ Σ_α {D_α†C_α + C_α†D_α, ρ}
//! ```
//!
//! given by a Hamiltonian and channel pairs `(C_α(t), D_α(t))`.

pub mod file;
pub mod jc;
pub mod validate;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;

pub use jc::{jc_rate_integrals, jc_rates, jc_spec, JcParams, RateIntegrals, RatePair};
pub use validate::{validate_spec, ValidationReport, Violation, ViolationKind};

/// Hermiticity tolerance applied to `H_S(t)` on evaluation.
pub const HAMILTONIAN_HERMITIAN_TOL: f64 = 1e-10;

/// Step cap for the Jaynes–Cummings rates, in units of the inverse
/// characteristic frequency.
const JC_STEPS_PER_PERIOD: f64 = 0.2;

type OperatorFn<T> = dyn Fn(T) -> Result<CMatrix<T>> + Send + Sync;

/// An operator-valued function of time.
#[derive(Clone)]
pub enum TimeOperator<T> {
    Constant(CMatrix<T>),
    Table(OperatorTable<T>),
    /// Arbitrary evaluator; must be a pure function of `t`.
    Function {
        dim: usize,
        eval: Arc<OperatorFn<T>>,
    },
}

impl<T: Real> TimeOperator<T> {
    pub fn function(dim: usize, f: impl Fn(T) -> Result<CMatrix<T>> + Send + Sync + 'static) -> Self {
        TimeOperator::Function {
            dim,
            eval: Arc::new(f),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TimeOperator::Constant(m) => m.dim(),
            TimeOperator::Table(t) => t.dim(),
            TimeOperator::Function { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, t: T) -> Result<CMatrix<T>> {
        let m = match self {
            TimeOperator::Constant(m) => m.clone(),
            TimeOperator::Table(table) => table.eval(t)?,
            TimeOperator::Function { eval, .. } => eval(t)?,
        };
        if m.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: m.dim(),
            });
        }
        Ok(m)
    }
}

impl<T: fmt::Debug> fmt::Debug for TimeOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeOperator::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            TimeOperator::Table(t) => f.debug_tuple("Table").field(t).finish(),
            TimeOperator::Function { dim, .. } => {
                f.debug_struct("Function").field("dim", dim).finish_non_exhaustive()
            }
        }
    }
}

/// Tabulated operator, linearly interpolated entrywise between samples.
#[derive(Clone, Debug)]
pub struct OperatorTable<T> {
    times: Vec<T>,
    matrices: Vec<CMatrix<T>>,
}

impl<T: Real> OperatorTable<T> {
    pub fn new(times: Vec<T>, matrices: Vec<CMatrix<T>>) -> Result<Self> {
        if times.is_empty() || times.len() != matrices.len() {
            return Err(Error::Validation(format!(
                "operator table needs matching non-empty times ({}) and matrices ({})",
                times.len(),
                matrices.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "operator table times must be strictly increasing".into(),
            ));
        }
        let dim = matrices[0].dim();
        if let Some(bad) = matrices.iter().find(|m| m.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: bad.dim(),
            });
        }
        Ok(Self { times, matrices })
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn eval(&self, t: T) -> Result<CMatrix<T>> {
        let first = self.times[0];
        let last = self.times[self.times.len() - 1];
        // allow roundoff at the ends of the table
        let slack = T::epsilon() * T::of(64.0) * T::one().max(last.abs());
        if t < first - slack || t > last + slack || t.is_nan() {
            return Err(Error::Validation(format!(
                "t = {} outside operator table range [{}, {}]",
                t, first, last
            )));
        }
        if self.times.len() == 1 || t <= first {
            return Ok(self.matrices[0].clone());
        }
        if t >= last {
            return Ok(self.matrices[self.matrices.len() - 1].clone());
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (&self.matrices[k], &self.matrices[k + 1]);
        Ok(CMatrix::from_fn(a.dim(), |i, j| {
            a[(i, j)] * (T::one() - w) + b[(i, j)] * w
        }))
    }
}

/// One dissipative channel `(C_α(t), D_α(t))`.
#[derive(Clone, Debug)]
pub struct Channel<T> {
    pub c: TimeOperator<T>,
    pub d: TimeOperator<T>,
}

/// The generator data evaluated at a fixed time.
#[derive(Clone, Debug)]
pub struct TclOperators<T> {
    pub hamiltonian: CMatrix<T>,
    /// `(C_α, D_α)` per channel.
    pub channels: Vec<(CMatrix<T>, CMatrix<T>)>,
}

#[derive(Clone, Debug)]
enum SpecKind<T> {
    Explicit {
        hamiltonian: TimeOperator<T>,
        channels: Vec<Channel<T>>,
    },
    JaynesCummings(JcParams<T>),
}

/// A time-local master equation on a `dim`-dimensional Hilbert space.
#[derive(Clone, Debug)]
pub struct TclSpec<T> {
    dim: usize,
    kind: SpecKind<T>,
}

impl<T: Real> TclSpec<T> {
    pub fn new(hamiltonian: TimeOperator<T>, channels: Vec<Channel<T>>) -> Result<Self> {
        let dim = hamiltonian.dim();
        if dim == 0 {
            return Err(Error::Validation("dimension must be positive".into()));
        }
        for ch in &channels {
            for op in [&ch.c, &ch.d] {
                if op.dim() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: op.dim(),
                    });
                }
            }
        }
        Ok(Self {
            dim,
            kind: SpecKind::Explicit {
                hamiltonian,
                channels,
            },
        })
    }

    /// Spec with time-independent operators.
    pub fn constant(hamiltonian: CMatrix<T>, channels: Vec<(CMatrix<T>, CMatrix<T>)>) -> Result<Self> {
        Self::new(
            TimeOperator::Constant(hamiltonian),
            channels
                .into_iter()
                .map(|(c, d)| Channel {
                    c: TimeOperator::Constant(c),
                    d: TimeOperator::Constant(d),
                })
                .collect(),
        )
    }

    /// The damped Jaynes–Cummings model, basis `(|g⟩, |e⟩)`.
    pub fn jaynes_cummings(params: JcParams<T>) -> Self {
        Self {
            dim: 2,
            kind: SpecKind::JaynesCummings(params),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_channels(&self) -> usize {
        match &self.kind {
            SpecKind::Explicit { channels, .. } => channels.len(),
            SpecKind::JaynesCummings(_) => 1,
        }
    }

    pub fn jc_params(&self) -> Option<&JcParams<T>> {
        match &self.kind {
            SpecKind::JaynesCummings(p) => Some(p),
            SpecKind::Explicit { .. } => None,
        }
    }

    /// Largest step an integrator may take without resolving the model's
    /// own time structure. A state in the kernel of the generator gives
    /// a zero derivative, and an adaptive step would then grow across
    /// whole windows of negative rate unnoticed.
    pub fn max_step(&self) -> Option<T> {
        match &self.kind {
            SpecKind::JaynesCummings(p) => Some(T::of(JC_STEPS_PER_PERIOD) / p.frequency_scale()),
            SpecKind::Explicit {
                hamiltonian,
                channels,
            } => std::iter::once(hamiltonian)
                .chain(channels.iter().flat_map(|ch| [&ch.c, &ch.d]))
                .filter_map(|op| match op {
                    TimeOperator::Table(table) => table
                        .times()
                        .windows(2)
                        .map(|w| w[1] - w[0])
                        .reduce(T::min),
                    _ => None,
                })
                .reduce(T::min),
        }
    }

    /// Evaluates `H_S(t)` and every `(C_α(t), D_α(t))` without checks
    /// beyond dimensions.
    pub fn at_unchecked(&self, t: T) -> Result<TclOperators<T>> {
        match &self.kind {
            SpecKind::Explicit {
                hamiltonian,
                channels,
            } => Ok(TclOperators {
                hamiltonian: hamiltonian.eval(t)?,
                channels: channels
                    .iter()
                    .map(|ch| Ok((ch.c.eval(t)?, ch.d.eval(t)?)))
                    .collect::<Result<_>>()?,
            }),
            SpecKind::JaynesCummings(p) => jc::jc_operators(p, t),
        }
    }

    /// Evaluates the generator at `t`, rejecting a non-Hermitian `H_S(t)`.
    pub fn at(&self, t: T) -> Result<TclOperators<T>> {
        let ops = self.at_unchecked(t)?;
        if !ops.hamiltonian.is_hermitian(T::tol(HAMILTONIAN_HERMITIAN_TOL)) {
            return Err(Error::Validation(format!(
                "H_S(t) not Hermitian at t = {} (defect {:e})",
                t,
                ops.hamiltonian.hermiticity_defect().as_f64()
            )));
        }
        Ok(ops)
    }
}
