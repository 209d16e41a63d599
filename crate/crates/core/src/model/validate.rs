use super::{TclSpec, HAMILTONIAN_HERMITIAN_TOL};
use crate::linalg::CMatrix;
use crate::scalar::Real;

/// Entries larger than this are reported as unbounded.
pub const OPERATOR_BOUND: f64 = 1e8;

#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    NonHermitianHamiltonian { defect: f64 },
    NonFinite { operator: String },
    Unbounded { operator: String, max_abs: f64 },
    Evaluation { message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub t: f64,
    pub kind: ViolationKind,
}

/// Outcome of [`validate_spec`].
#[derive(Clone, Debug)]
pub struct ValidationReport<T> {
    pub violations: Vec<Violation>,
    /// `max_t max_α ‖C_α(t) - D_α(t)‖₂` over the checked grid; the square
    /// bounds the embedding rate `a(t)`.
    pub max_cd_norm: T,
    pub checked_times: usize,
}

impl<T: Real> ValidationReport<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_operator<T: Real>(
    violations: &mut Vec<Violation>,
    t: f64,
    name: String,
    m: &CMatrix<T>,
    bound: T,
) -> bool {
    if !m.is_finite() {
        violations.push(Violation {
            t,
            kind: ViolationKind::NonFinite { operator: name },
        });
        return false;
    }
    let mx = m.max_abs();
    if mx > bound {
        violations.push(Violation {
            t,
            kind: ViolationKind::Unbounded {
                operator: name,
                max_abs: mx.as_f64(),
            },
        });
        return false;
    }
    true
}

/// Checks Hermiticity of `H_S` and finiteness/boundedness of all channel
/// operators at each grid time. Never aborts; every problem is itemized.
pub fn validate_spec<T: Real>(spec: &TclSpec<T>, grid: &[T]) -> ValidationReport<T> {
    let mut violations = Vec::new();
    let mut max_cd = T::zero();
    let bound = T::of(OPERATOR_BOUND);
    for &t in grid {
        let tf = t.as_f64();
        let ops = match spec.at_unchecked(t) {
            Ok(ops) => ops,
            Err(e) => {
                violations.push(Violation {
                    t: tf,
                    kind: ViolationKind::Evaluation {
                        message: e.to_string(),
                    },
                });
                continue;
            }
        };
        if check_operator(&mut violations, tf, "H_S".into(), &ops.hamiltonian, bound)
            && !ops.hamiltonian.is_hermitian(T::tol(HAMILTONIAN_HERMITIAN_TOL))
        {
            violations.push(Violation {
                t: tf,
                kind: ViolationKind::NonHermitianHamiltonian {
                    defect: ops.hamiltonian.hermiticity_defect().as_f64(),
                },
            });
        }
        for (alpha, (c, d)) in ops.channels.iter().enumerate() {
            let ok_c = check_operator(&mut violations, tf, format!("C_{alpha}"), c, bound);
            let ok_d = check_operator(&mut violations, tf, format!("D_{alpha}"), d, bound);
            if ok_c && ok_d {
                match (c - d).spectral_norm() {
                    Ok(n) => max_cd = max_cd.max(n),
                    Err(e) => violations.push(Violation {
                        t: tf,
                        kind: ViolationKind::Evaluation {
                            message: e.to_string(),
                        },
                    }),
                }
            }
        }
    }
    ValidationReport {
        violations,
        max_cd_norm: max_cd,
        checked_times: grid.len(),
    }
}
