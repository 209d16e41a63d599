//! Markovian embedding of a time-local master equation on `ℋ ⊗ ℂ³`.
//!
//! Vectors and operators on the extended space are stored in direct-sum
//! order `ℋ₁ ⊕ ℋ₂ ⊕ ℋ₃`: block `k ∈ {0, 1, 2}` corresponds to the
//! auxiliary state `|k+1⟩`, so a state is the concatenation `(ψ₁, ψ₂, ψ₃)`.
//!
//! Per channel α the embedding uses
//!
//! ```text
//! J₁ = C ⊗ |1⟩⟨1| + D ⊗ |2⟩⟨2|      J₃ = Ω ⊗ |3⟩⟨1|
//! J₂ = D ⊗ |1⟩⟨1| + C ⊗ |2⟩⟨2|      J₄ = Ω ⊗ |3⟩⟨2|
//! Ω†Ω = a I - (C - D)†(C - D),       a = λ_max((C - D)†(C - D))
//! ```
//!
//! together with `H = H_S ⊗ I₃`.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::Result;
use crate::linalg::{hermitian_eig, psd_sqrt, CMatrix};
use crate::model::{TclOperators, TclSpec};
use crate::scalar::{creal, Real};

/// Relative tolerance on the residual of the Ω equation.
pub const OMEGA_RESIDUAL_TOL: f64 = 1e-9;

/// Number of auxiliary levels.
pub const AUX: usize = 3;

/// `a = λ_max((C - D)†(C - D))`, clamped at zero.
pub fn compute_a<T: Real>(c: &CMatrix<T>, d: &CMatrix<T>) -> Result<T> {
    let e = c - d;
    let gram = e.adjoint_mul(&e).hermitian_part();
    if gram.max_abs() == T::zero() {
        return Ok(T::zero());
    }
    Ok(hermitian_eig(&gram)?.max_eigenvalue().max(T::zero()))
}

/// Principal square root of `a I - (C - D)†(C - D)`.
pub fn compute_omega<T: Real>(c: &CMatrix<T>, d: &CMatrix<T>, a: T) -> Result<CMatrix<T>> {
    let e = c - d;
    let n = c.dim();
    let mut rhs = e.adjoint_mul(&e).hermitian_part();
    rhs = &CMatrix::identity(n).scale_real(a) - &rhs;
    if rhs.max_abs() == T::zero() {
        return Ok(CMatrix::zeros(n));
    }
    psd_sqrt(&rhs)
}

/// `max|Ω†Ω + C†C + D†D - a I - D†C - C†D|`
pub fn omega_residual<T: Real>(c: &CMatrix<T>, d: &CMatrix<T>, a: T, omega: &CMatrix<T>) -> T {
    let n = c.dim();
    let mut lhs = omega.adjoint_mul(omega);
    lhs += &c.adjoint_mul(c);
    lhs += &d.adjoint_mul(d);
    let mut rhs = CMatrix::identity(n).scale_real(a);
    rhs += &d.adjoint_mul(c);
    rhs += &c.adjoint_mul(d);
    lhs.max_abs_diff(&rhs)
}

/// Operator on `ℋ ⊗ ℂ³` stored as nine optional `d × d` blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOperator<T> {
    dim: usize,
    blocks: [Option<CMatrix<T>>; 9],
}

impl<T: Real> BlockOperator<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            blocks: Default::default(),
        }
    }

    /// `op ⊗ |k+1⟩⟨l+1|` summed over the given `(k, l)` pairs with weights.
    pub fn from_blocks(dim: usize, blocks: impl IntoIterator<Item = (usize, usize, CMatrix<T>)>) -> Self {
        let mut out = Self::zeros(dim);
        for (k, l, m) in blocks {
            out.add_block(k, l, &m);
        }
        out
    }

    /// `op ⊗ I₃`
    pub fn block_diagonal(op: &CMatrix<T>) -> Self {
        Self::from_blocks(op.dim(), (0..AUX).map(|k| (k, k, op.clone())))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self, k: usize, l: usize) -> Option<&CMatrix<T>> {
        self.blocks[k * AUX + l].as_ref()
    }

    pub fn add_block(&mut self, k: usize, l: usize, m: &CMatrix<T>) {
        assert_eq!(m.dim(), self.dim);
        let slot = &mut self.blocks[k * AUX + l];
        match slot {
            Some(existing) => *existing += m,
            None => *slot = Some(m.clone()),
        }
    }

    /// Block positions holding a stored (possibly numerically zero) block.
    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize, &CMatrix<T>)> {
        self.blocks
            .iter()
            .enumerate()
            .filter_map(|(idx, b)| b.as_ref().map(|m| (idx / AUX, idx % AUX, m)))
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for (k, l, m) in self.occupied() {
            out.blocks[l * AUX + k] = Some(m.adjoint());
        }
        out
    }

    /// `self · rhs`
    pub fn compose(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros(self.dim);
        for (k, m, a) in self.occupied() {
            for l in 0..AUX {
                if let Some(b) = rhs.block(m, l) {
                    out.add_block(k, l, &(a * b));
                }
            }
        }
        out
    }

    /// `out += s · self v` for a direct-sum vector `v` of length `3d`.
    pub fn apply_acc(&self, s: Complex<T>, v: &[Complex<T>], out: &mut [Complex<T>]) {
        let d = self.dim;
        for (k, l, m) in self.occupied() {
            m.mul_vec_acc(s, &v[l * d..(l + 1) * d], &mut out[k * d..(k + 1) * d]);
        }
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = vec![Complex::zero(); v.len()];
        self.apply_acc(Complex::one(), v, &mut out);
        out
    }

    /// `out += self · W · self†`
    pub fn sandwich_acc(&self, w: &BlockMatrix<T>, out: &mut BlockMatrix<T>) {
        for (k, m, jkm) in self.occupied() {
            for (l, n, jln) in self.occupied() {
                let wmn = w.block(m, n);
                let prod = (jkm * &wmn).mul_adjoint(jln);
                out.add_to_block(k, l, &prod);
            }
        }
    }

    /// Dense `3d × 3d` form in direct-sum order.
    pub fn to_dense(&self) -> CMatrix<T> {
        let d = self.dim;
        let mut out = CMatrix::zeros(AUX * d);
        for (k, l, m) in self.occupied() {
            for i in 0..d {
                for j in 0..d {
                    out[(k * d + i, l * d + j)] = m[(i, j)];
                }
            }
        }
        out
    }
}

/// Dense block matrix on `ℋ ⊗ ℂ³` (all nine blocks stored), used for
/// density matrices `W`. The flat layout is block-major: block `(k, l)`
/// occupies `d²` consecutive row-major entries at offset `(3k + l) d²`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> BlockMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex::zero(); AUX * AUX * dim * dim],
        }
    }

    pub fn from_flat(dim: usize, data: Vec<Complex<T>>) -> Self {
        assert_eq!(data.len(), AUX * AUX * dim * dim);
        Self { dim, data }
    }

    /// `ρ ⊗ |χ⟩⟨χ|` with `|χ⟩ = (|1⟩ + |2⟩)/√2`.
    pub fn product_with_chi(rho: &CMatrix<T>) -> Self {
        let mut w = Self::zeros(rho.dim());
        let half = rho.scale_real(T::of(0.5));
        for k in 0..2 {
            for l in 0..2 {
                w.set_block(k, l, &half);
            }
        }
        w
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    fn range(&self, k: usize, l: usize) -> std::ops::Range<usize> {
        let dd = self.dim * self.dim;
        let off = (k * AUX + l) * dd;
        off..off + dd
    }

    pub fn block(&self, k: usize, l: usize) -> CMatrix<T> {
        CMatrix::from_row_major(self.data[self.range(k, l)].to_vec())
            .expect("block has d² entries")
    }

    pub fn set_block(&mut self, k: usize, l: usize, m: &CMatrix<T>) {
        let r = self.range(k, l);
        self.data[r].copy_from_slice(m.as_slice());
    }

    pub fn add_to_block(&mut self, k: usize, l: usize, m: &CMatrix<T>) {
        let r = self.range(k, l);
        for (a, b) in self.data[r].iter_mut().zip(m.as_slice()) {
            *a = *a + b;
        }
    }

    pub fn trace(&self) -> Complex<T> {
        (0..AUX).map(|k| self.block(k, k).trace()).sum()
    }

    /// `(W + W†)/2` blockwise.
    pub fn hermitian_part(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        let half = T::of(0.5);
        for k in 0..AUX {
            for l in 0..AUX {
                let a = self.block(k, l);
                let b = self.block(l, k).adjoint();
                out.set_block(k, l, &(&a + &b).scale_real(half));
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMatrix<T> {
        let d = self.dim;
        let mut out = CMatrix::zeros(AUX * d);
        for k in 0..AUX {
            for l in 0..AUX {
                let b = self.block(k, l);
                for i in 0..d {
                    for j in 0..d {
                        out[(k * d + i, l * d + j)] = b[(i, j)];
                    }
                }
            }
        }
        out
    }

    pub fn from_dense(m: &CMatrix<T>) -> Self {
        assert_eq!(m.dim() % AUX, 0);
        let d = m.dim() / AUX;
        let mut out = Self::zeros(d);
        for k in 0..AUX {
            for l in 0..AUX {
                let b = CMatrix::from_fn(d, |i, j| m[(k * d + i, l * d + j)]);
                out.set_block(k, l, &b);
            }
        }
        out
    }
}

/// The embedded data of one channel α.
#[derive(Clone, Debug)]
pub struct EmbeddedChannel<T> {
    pub c: CMatrix<T>,
    pub d: CMatrix<T>,
    pub a: T,
    pub omega: CMatrix<T>,
    /// `J₁ … J₄`
    pub jumps: [BlockOperator<T>; 4],
}

impl<T: Real> EmbeddedChannel<T> {
    pub fn new(c: CMatrix<T>, d: CMatrix<T>) -> Result<Self> {
        let a = compute_a(&c, &d)?;
        let omega = compute_omega(&c, &d, a)?;
        let n = c.dim();
        let jumps = [
            BlockOperator::from_blocks(n, [(0, 0, c.clone()), (1, 1, d.clone())]),
            BlockOperator::from_blocks(n, [(0, 0, d.clone()), (1, 1, c.clone())]),
            BlockOperator::from_blocks(n, [(2, 0, omega.clone())]),
            BlockOperator::from_blocks(n, [(2, 1, omega.clone())]),
        ];
        Ok(Self {
            c,
            d,
            a,
            omega,
            jumps,
        })
    }

    pub fn omega_residual(&self) -> T {
        omega_residual(&self.c, &self.d, self.a, &self.omega)
    }

    /// `Ω†Ω + C†C + D†D`, the `(1,1)` and `(2,2)` block of `Σᵢ Jᵢ†Jᵢ`.
    pub fn loss(&self) -> CMatrix<T> {
        let mut k = self.omega.adjoint_mul(&self.omega);
        k += &self.c.adjoint_mul(&self.c);
        k += &self.d.adjoint_mul(&self.d);
        k
    }
}

/// Lifted Lindblad data on `ℋ ⊗ ℂ³` at a fixed time.
#[derive(Clone, Debug)]
pub struct EmbeddedGenerator<T> {
    pub dim: usize,
    pub t: T,
    pub hs: CMatrix<T>,
    pub channels: Vec<EmbeddedChannel<T>>,
}

impl<T: Real> EmbeddedGenerator<T> {
    pub fn from_operators(t: T, ops: TclOperators<T>) -> Result<Self> {
        let dim = ops.hamiltonian.dim();
        let channels = ops
            .channels
            .into_iter()
            .map(|(c, d)| EmbeddedChannel::new(c, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim,
            t,
            hs: ops.hamiltonian,
            channels,
        })
    }

    /// `H = H_S ⊗ I₃`
    pub fn hamiltonian(&self) -> BlockOperator<T> {
        BlockOperator::block_diagonal(&self.hs)
    }

    /// `Σ_α (Ω_α†Ω_α + C_α†C_α + D_α†D_α)`
    pub fn loss(&self) -> CMatrix<T> {
        let mut k = CMatrix::zeros(self.dim);
        for ch in &self.channels {
            k += &ch.loss();
        }
        k
    }

    /// `Ĥ = H - (i/2) Σ J†J = H_S ⊗ I₃ - (i/2) K ⊗ (|1⟩⟨1| + |2⟩⟨2|)`
    pub fn effective_hamiltonian(&self) -> BlockOperator<T> {
        let half_loss = self.loss().scale(Complex::new(T::zero(), -T::of(0.5)));
        let mut h = self.hamiltonian();
        h.add_block(0, 0, &half_loss);
        h.add_block(1, 1, &half_loss);
        h
    }

    pub fn total_a(&self) -> T {
        self.channels.iter().map(|c| c.a).sum()
    }

    /// All jump operators labelled `(i, α)` with `i ∈ 1..=4`.
    pub fn jumps(&self) -> impl Iterator<Item = (ChannelId, &BlockOperator<T>)> {
        self.channels.iter().enumerate().flat_map(|(alpha, ch)| {
            ch.jumps
                .iter()
                .enumerate()
                .map(move |(i, j)| (ChannelId { op: i as u8 + 1, alpha }, j))
        })
    }
}

/// Identifies the jump operator `J_{iα}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelId {
    /// `i ∈ {1, 2, 3, 4}`
    pub op: u8,
    pub alpha: usize,
}

impl ChannelId {
    /// Jumps via `J₃` or `J₄` land in the sink block `ℋ₃`.
    pub fn is_sink(&self) -> bool {
        self.op >= 3
    }
}

/// Builds the embedded generator for `spec` at time `t`.
pub fn build_embedded<T: Real>(spec: &TclSpec<T>, t: T) -> Result<EmbeddedGenerator<T>> {
    EmbeddedGenerator::from_operators(t, spec.at(t)?)
}

/// `(H_S, K)` with `K = Σ_α (a_α I + D_α†C_α + C_α†D_α)`, equal to the
/// loss operator of [`EmbeddedGenerator::loss`] once the Ω equation holds.
/// Needs only `a_α`, not `Ω_α`.
pub fn drift_operators<T: Real>(ops: &TclOperators<T>) -> Result<(CMatrix<T>, CMatrix<T>)> {
    let n = ops.hamiltonian.dim();
    let mut k = CMatrix::zeros(n);
    for (c, d) in &ops.channels {
        let a = compute_a(c, d)?;
        for i in 0..n {
            k[(i, i)] = k[(i, i)] + creal(a);
        }
        k += &d.adjoint_mul(c);
        k += &c.adjoint_mul(d);
    }
    Ok((ops.hamiltonian.clone(), k.hermitian_part()))
}

/// The auxiliary `σₓ = |1⟩⟨2| + |2⟩⟨1|` as a 3×3 matrix.
pub fn aux_sigma_x<T: Real>() -> CMatrix<T> {
    let mut s = CMatrix::zeros(AUX);
    s[(0, 1)] = Complex::one();
    s[(1, 0)] = Complex::one();
    s
}

/// `|χ⟩ = (|1⟩ + |2⟩)/√2`
pub fn aux_chi<T: Real>() -> Vec<Complex<T>> {
    let h = creal(T::of(0.5).sqrt());
    vec![h, h, Complex::zero()]
}
