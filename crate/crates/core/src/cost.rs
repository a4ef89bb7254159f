//! The two-particle cost operator C and its spectral structure.

use crate::error::{QmkError, Result};
use crate::fock::{harmonic_hamiltonian, momentum_operator, number_operator, position_operator, FockSpace};
use crate::linalg::{check_orthonormal, commutator, eigh, frobenius, identity, kron, Eigensystem};
use crate::scalar::{cr, lit, CMatrix, Real};

/// Default cap on the two-particle dimension N^{2d}.
pub const DEFAULT_MAX_PAIR_DIM: usize = 2500;

#[derive(Debug, Clone)]
pub struct CostMatrix<T: Real> {
    pub space: FockSpace<T>,
    pub entries: CMatrix<T>,
}

impl<T: Real> CostMatrix<T> {
    pub fn hbar(&self) -> T {
        self.space.hbar
    }

    pub fn dim_d(&self) -> usize {
        self.space.dim_d
    }
}

pub fn build_cost<T: Real>(space: &FockSpace<T>) -> Result<CostMatrix<T>> {
    build_cost_with_limit(space, DEFAULT_MAX_PAIR_DIM)
}

/// C = H⊗I + I⊗H − 2Σ_j(Q_j⊗Q_j + P_j⊗P_j).
pub fn build_cost_with_limit<T: Real>(space: &FockSpace<T>, max_pair_dim: usize) -> Result<CostMatrix<T>> {
    let n = space.dim();
    let pair = n.checked_mul(n).unwrap_or(usize::MAX);
    if pair > max_pair_dim {
        return Err(QmkError::MemoryGuard { dim: pair, limit: max_pair_dim });
    }
    let h = harmonic_hamiltonian(space).entries;
    let id = identity::<T>(n);
    let mut c = kron(&h, &id) + kron(&id, &h);
    let two = cr(lit::<T>(2.0));
    for j in 0..space.dim_d {
        let q = position_operator(space, j)?.entries;
        let p = momentum_operator(space, j)?.entries;
        c -= (kron(&q, &q) + kron(&p, &p)) * two;
    }
    Ok(CostMatrix { space: *space, entries: c })
}

pub fn eigensystem<T: Real>(cost: &CostMatrix<T>) -> Eigensystem<T> {
    eigh(&cost.entries)
}

/// Matrix of C compressed to span(left) ⊗ span(right), in the product basis.
pub fn project_cost<T: Real>(cost: &CostMatrix<T>, left: &CMatrix<T>, right: &CMatrix<T>) -> Result<CMatrix<T>> {
    let n = cost.space.dim();
    for b in [left, right] {
        if b.nrows() != n {
            return Err(QmkError::DimensionMismatch { expected: n, found: b.nrows() });
        }
        check_orthonormal(b, 1e-10)?;
    }
    let w = kron(left, right);
    Ok(w.adjoint() * &cost.entries * w)
}

/// Canonical operators compressed to the span of an orthonormal basis W:
/// X^W = W^† X W for Q_j, P_j and H.
#[derive(Debug, Clone)]
pub struct ProjectedOperators<T: Real> {
    pub q: Vec<CMatrix<T>>,
    pub p: Vec<CMatrix<T>>,
    pub h: CMatrix<T>,
    pub hbar: T,
}

impl<T: Real> ProjectedOperators<T> {
    pub fn new(space: &FockSpace<T>, basis: &CMatrix<T>) -> Result<Self> {
        let n = space.dim();
        if basis.nrows() != n {
            return Err(QmkError::DimensionMismatch { expected: n, found: basis.nrows() });
        }
        check_orthonormal(basis, 1e-10)?;
        let compress = |m: &CMatrix<T>| basis.adjoint() * m * basis;
        let mut q = Vec::with_capacity(space.dim_d);
        let mut p = Vec::with_capacity(space.dim_d);
        for j in 0..space.dim_d {
            q.push(compress(&position_operator(space, j)?.entries));
            p.push(compress(&momentum_operator(space, j)?.entries));
        }
        let h = compress(&harmonic_hamiltonian(space).entries);
        Ok(Self { q, p, h, hbar: space.hbar })
    }

    /// The operators on the whole truncated space.
    pub fn full(space: &FockSpace<T>) -> Result<Self> {
        let mut q = Vec::with_capacity(space.dim_d);
        let mut p = Vec::with_capacity(space.dim_d);
        for j in 0..space.dim_d {
            q.push(position_operator(space, j)?.entries);
            p.push(momentum_operator(space, j)?.entries);
        }
        Ok(Self { q, p, h: harmonic_hamiltonian(space).entries, hbar: space.hbar })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn dim_d(&self) -> usize {
        self.q.len()
    }
}

/// Compressed cost assembled from compressed factors:
/// H^R⊗I + I⊗H^S − 2Σ_j(Q_j^R⊗Q_j^S + P_j^R⊗P_j^S).
///
/// Each summand of C is a tensor product, so this equals `project_cost`
/// without forming the two-particle matrix.
pub fn project_cost_factored<T: Real>(left: &ProjectedOperators<T>, right: &ProjectedOperators<T>) -> CMatrix<T> {
    let il = identity::<T>(left.dim());
    let ir = identity::<T>(right.dim());
    let mut c = kron(&left.h, &ir) + kron(&il, &right.h);
    let two = cr(lit::<T>(2.0));
    for j in 0..left.dim_d() {
        c -= (kron(&left.q[j], &right.q[j]) + kron(&left.p[j], &right.p[j])) * two;
    }
    c
}

/// ‖[C, N⊗I + I⊗N]‖_F with N the total number operator.
pub fn grading_commutator_norm<T: Real>(cost: &CostMatrix<T>) -> T {
    let n = number_operator(&cost.space).entries;
    let id = identity::<T>(cost.space.dim());
    let total = kron(&n, &id) + kron(&id, &n);
    frobenius(&commutator(&cost.entries, &total))
}

/// One total-quanta block of the two-particle space.
#[derive(Debug, Clone)]
pub struct QuantaBlock {
    pub total: usize,
    pub indices: Vec<usize>,
    /// No basis state with this total was removed by the cutoff.
    pub enclosed: bool,
}

pub fn quanta_blocks<T: Real>(space: &FockSpace<T>) -> Vec<QuantaBlock> {
    let n = space.dim();
    let max_total = 2 * space.dim_d * (space.cutoff - 1);
    let mut blocks: Vec<QuantaBlock> = (0..=max_total)
        .map(|t| QuantaBlock { total: t, indices: Vec::new(), enclosed: t < space.cutoff })
        .collect();
    for i in 0..n {
        let qi = space.quanta(i);
        for k in 0..n {
            blocks[qi + space.quanta(k)].indices.push(i * n + k);
        }
    }
    blocks
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Exact spectrum of an untruncated total-quanta-T block:
/// 2ℏ(2n + d) for relative quanta n = 0..=T, with multiplicity
/// C(n+d−1, d−1)·C(T−n+d−1, d−1). Sorted ascending, paired with n.
pub fn block_spectrum<T: Real>(hbar: T, dim_d: usize, total: usize) -> Vec<(usize, T)> {
    let mut out = Vec::new();
    for n in 0..=total {
        let mult = binomial(n + dim_d - 1, dim_d - 1) * binomial(total - n + dim_d - 1, dim_d - 1);
        let v = hbar * lit((2 * (2 * n + dim_d)) as f64);
        out.extend(std::iter::repeat((n, v)).take(mult));
    }
    out
}

/// A computed eigenvalue with its block label.
#[derive(Debug, Clone)]
pub struct SpectrumEntry<T: Real> {
    pub value: T,
    pub total_quanta: usize,
    pub enclosed: bool,
    /// Relative quanta n and the exact value 2ℏ(2n+d), for enclosed blocks.
    pub relative_quanta: Option<usize>,
    pub expected: Option<T>,
}

/// Block-wise eigenvalues of the truncated cost with their exact labels.
pub fn labelled_spectrum<T: Real>(cost: &CostMatrix<T>) -> Vec<SpectrumEntry<T>> {
    let mut out = Vec::new();
    for block in quanta_blocks(&cost.space) {
        let idx = &block.indices;
        let sub = CMatrix::from_fn(idx.len(), idx.len(), |i, k| cost.entries[(idx[i], idx[k])]);
        let values = eigh(&sub).values;
        let labels = if block.enclosed {
            Some(block_spectrum(cost.space.hbar, cost.space.dim_d, block.total))
        } else {
            None
        };
        for (i, &v) in values.iter().enumerate() {
            let (rel, exp) = match &labels {
                Some(l) => (Some(l[i].0), Some(l[i].1)),
                None => (None, None),
            };
            out.push(SpectrumEntry {
                value: v,
                total_quanta: block.total,
                enclosed: block.enclosed,
                relative_quanta: rel,
                expected: exp,
            });
        }
    }
    out
}

/// Largest |computed − exact| over enclosed blocks.
pub fn enclosed_spectrum_error<T: Real>(cost: &CostMatrix<T>) -> T {
    labelled_spectrum(cost)
        .iter()
        .filter_map(|e| e.expected.map(|x| (e.value - x).abs()))
        .fold(T::zero(), |a, b| a.max(b))
}
