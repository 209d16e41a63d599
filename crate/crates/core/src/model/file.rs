//! JSON model files.
//!
//! A matrix is written as nested rows of `[re, im]` pairs; a tabulated
//! operator as `{"times": [...], "matrices": [...]}`. The built-in
//! Jaynes–Cummings model is selected with
//! `{"model": "jaynes_cummings", "gamma0": .., "lambda": .., "delta": ..}`.

use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{Channel, JcParams, OperatorTable, TclSpec, TimeOperator};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, StateVector};
use crate::scalar::Real;

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub const JAYNES_CUMMINGS: &str = "jaynes_cummings";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorJson {
    Matrix(MatrixJson),
    Table {
        times: Vec<f64>,
        matrices: Vec<MatrixJson>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    #[serde(rename = "C")]
    pub c: OperatorJson,
    #[serde(rename = "D")]
    pub d: OperatorJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinModel {
    pub model: String,
    pub gamma0: f64,
    pub lambda: f64,
    #[serde(default)]
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitModel {
    pub dim: usize,
    pub hamiltonian: OperatorJson,
    #[serde(default)]
    pub channels: Vec<ChannelJson>,
    /// Optional pure initial state `|φ⟩` as `[re, im]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelFile {
    Builtin(BuiltinModel),
    Explicit(ExplicitModel),
}

fn matrix_from_json<T: Real>(m: &MatrixJson, dim: usize) -> Result<CMatrix<T>> {
    let rows: Vec<Vec<Complex<T>>> = m
        .iter()
        .map(|row| row.iter().map(|&[re, im]| Complex::new(T::of(re), T::of(im))).collect())
        .collect();
    let mat = CMatrix::from_rows(&rows)?;
    if mat.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: mat.dim(),
        });
    }
    Ok(mat)
}

pub fn matrix_to_json<T: Real>(m: &CMatrix<T>) -> MatrixJson {
    (0..m.dim())
        .map(|i| (0..m.dim()).map(|j| [m[(i, j)].re.as_f64(), m[(i, j)].im.as_f64()]).collect())
        .collect()
}

impl OperatorJson {
    pub fn to_operator<T: Real>(&self, dim: usize) -> Result<TimeOperator<T>> {
        match self {
            OperatorJson::Matrix(m) => Ok(TimeOperator::Constant(matrix_from_json(m, dim)?)),
            OperatorJson::Table { times, matrices } => {
                let mats = matrices
                    .iter()
                    .map(|m| matrix_from_json(m, dim))
                    .collect::<Result<Vec<_>>>()?;
                let times = times.iter().map(|&t| T::of(t)).collect();
                Ok(TimeOperator::Table(OperatorTable::new(times, mats)?))
            }
        }
    }
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("model", format!("invalid model file: {e}")))
    }

    pub fn jaynes_cummings(gamma0: f64, lambda: f64, delta: f64) -> Self {
        ModelFile::Builtin(BuiltinModel {
            model: JAYNES_CUMMINGS.into(),
            gamma0,
            lambda,
            delta,
        })
    }

    pub fn to_spec<T: Real>(&self) -> Result<TclSpec<T>> {
        match self {
            ModelFile::Builtin(b) => {
                if b.model != JAYNES_CUMMINGS {
                    return Err(Error::config(
                        "model",
                        format!("unknown built-in model `{}`", b.model),
                    ));
                }
                Ok(TclSpec::jaynes_cummings(JcParams::new(
                    T::of(b.gamma0),
                    T::of(b.lambda),
                    T::of(b.delta),
                )?))
            }
            ModelFile::Explicit(m) => {
                if m.dim == 0 {
                    return Err(Error::config("dim", "must be positive"));
                }
                let hamiltonian = m.hamiltonian.to_operator(m.dim)?;
                let channels = m
                    .channels
                    .iter()
                    .map(|ch| {
                        Ok(Channel {
                            c: ch.c.to_operator(m.dim)?,
                            d: ch.d.to_operator(m.dim)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                TclSpec::new(hamiltonian, channels)
            }
        }
    }

    /// Initial pure state: the file's `initial_state` if given, otherwise
    /// the highest basis state (`|e⟩` for the two-level models).
    pub fn initial_state<T: Real>(&self) -> Result<StateVector<T>> {
        match self {
            ModelFile::Builtin(_) => Ok(crate::linalg::basis(2, 1)),
            ModelFile::Explicit(m) => match &m.initial_state {
                Some(v) => {
                    if v.len() != m.dim {
                        return Err(Error::config(
                            "initial_state",
                            format!("expected {} amplitudes, got {}", m.dim, v.len()),
                        ));
                    }
                    let mut s: StateVector<T> =
                        v.iter().map(|&[re, im]| Complex::new(T::of(re), T::of(im))).collect();
                    if crate::linalg::normalize(&mut s) == T::zero() {
                        return Err(Error::config("initial_state", "zero vector"));
                    }
                    Ok(s)
                }
                None => Ok(crate::linalg::basis(m.dim, m.dim - 1)),
            },
        }
    }
}
