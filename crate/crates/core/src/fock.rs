//! Truncated Fock-basis realization of Q, P, H and coherent states.
//!
//! Basis ordering for `d > 1`: the multi-index (n_1, …, n_d) maps to
//! n_1·N^{d−1} + … + n_d, i.e. axis 0 is the most significant factor.

use crate::error::{QmkError, Result};
use crate::linalg::{identity, kron};
use crate::scalar::{ci, cr, lit, CMatrix, CVector, Real};
use nalgebra::Complex;

pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockSpace<T: Real> {
    pub hbar: T,
    pub cutoff: usize,
    pub dim_d: usize,
}

impl<T: Real> FockSpace<T> {
    pub fn new(hbar: T, cutoff: usize, dim_d: usize) -> Result<Self> {
        if !(hbar > T::zero()) {
            return Err(QmkError::InvalidSpace(format!("hbar must be positive, got {hbar:?}")));
        }
        if cutoff == 0 {
            return Err(QmkError::InvalidSpace("cutoff must be at least 1".into()));
        }
        if dim_d == 0 {
            return Err(QmkError::InvalidSpace("dimension must be at least 1".into()));
        }
        Ok(Self { hbar, cutoff, dim_d })
    }

    /// One-particle dimension N^d.
    pub fn dim(&self) -> usize {
        self.cutoff.pow(self.dim_d as u32)
    }

    /// Two-particle dimension N^{2d}.
    pub fn pair_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    pub fn levels(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim_d];
        let mut r = index;
        for j in (0..self.dim_d).rev() {
            out[j] = r % self.cutoff;
            r /= self.cutoff;
        }
        out
    }

    pub fn index(&self, levels: &[usize]) -> usize {
        levels.iter().fold(0, |acc, &n| acc * self.cutoff + n)
    }

    /// Total number of quanta Σ n_j of a one-particle basis index.
    pub fn quanta(&self, index: usize) -> usize {
        self.levels(index).iter().sum()
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim_d {
            return Err(QmkError::AxisOutOfRange { axis, dim: self.dim_d });
        }
        Ok(())
    }
}

/// A one- or two-particle operator on a truncated Fock space.
#[derive(Debug, Clone)]
pub struct OperatorMatrix<T: Real> {
    pub space: FockSpace<T>,
    pub particles: usize,
    pub entries: CMatrix<T>,
}

impl<T: Real> OperatorMatrix<T> {
    pub fn new(space: FockSpace<T>, particles: usize, entries: CMatrix<T>) -> Result<Self> {
        let expected = match particles {
            1 => space.dim(),
            2 => space.pair_dim(),
            _ => return Err(QmkError::InvalidSpace("particles must be 1 or 2".into())),
        };
        if entries.nrows() != expected || entries.ncols() != expected {
            return Err(QmkError::DimensionMismatch { expected, found: entries.nrows() });
        }
        Ok(Self { space, particles, entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Per-factor annihilation matrix, a[n−1, n] = √n.
pub fn ladder_matrix<T: Real>(space: &FockSpace<T>) -> CMatrix<T> {
    let n = space.cutoff;
    let mut a = CMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = cr(lit::<T>(k as f64).sqrt());
    }
    a
}

/// I ⊗ … ⊗ factor ⊗ … ⊗ I with `factor` on `axis`.
pub fn embed_axis<T: Real>(space: &FockSpace<T>, axis: usize, factor: &CMatrix<T>) -> CMatrix<T> {
    let n = space.cutoff;
    let left = identity::<T>(n.pow(axis as u32));
    let right = identity::<T>(n.pow((space.dim_d - axis - 1) as u32));
    kron(&kron(&left, factor), &right)
}

fn position_factor<T: Real>(space: &FockSpace<T>) -> CMatrix<T> {
    let a = ladder_matrix(space);
    let s = (space.hbar * lit(0.5)).sqrt();
    (&a + a.adjoint()) * cr(s)
}

fn momentum_factor<T: Real>(space: &FockSpace<T>) -> CMatrix<T> {
    let a = ladder_matrix(space);
    let s = (space.hbar * lit(0.5)).sqrt();
    (a.adjoint() - &a) * ci(s)
}

/// Q_j = √(ℏ/2)(a + a†) on axis `axis` (0-based).
pub fn position_operator<T: Real>(space: &FockSpace<T>, axis: usize) -> Result<OperatorMatrix<T>> {
    space.check_axis(axis)?;
    let m = embed_axis(space, axis, &position_factor(space));
    OperatorMatrix::new(*space, 1, m)
}

/// P_j = i√(ℏ/2)(a† − a) on axis `axis` (0-based).
pub fn momentum_operator<T: Real>(space: &FockSpace<T>, axis: usize) -> Result<OperatorMatrix<T>> {
    space.check_axis(axis)?;
    let m = embed_axis(space, axis, &momentum_factor(space));
    OperatorMatrix::new(*space, 1, m)
}

fn diagonal_by_quanta<T: Real>(space: &FockSpace<T>, f: impl Fn(usize) -> T) -> CMatrix<T> {
    let n = space.dim();
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = cr(f(space.quanta(i)));
    }
    m
}

/// H = Σ(Q_j² + P_j²) compressed exactly: diag ℏ(2Σn_j + d).
pub fn harmonic_hamiltonian<T: Real>(space: &FockSpace<T>) -> OperatorMatrix<T> {
    let d = space.dim_d;
    let m = diagonal_by_quanta(space, |q| space.hbar * lit((2 * q + d) as f64));
    OperatorMatrix { space: *space, particles: 1, entries: m }
}

/// Total number operator Σ a_j† a_j.
pub fn number_operator<T: Real>(space: &FockSpace<T>) -> OperatorMatrix<T> {
    let m = diagonal_by_quanta(space, |q| lit(q as f64));
    OperatorMatrix { space: *space, particles: 1, entries: m }
}

/// Truncated coherent state together with its norm deficit 1 − Σ|c_n|².
#[derive(Debug, Clone)]
pub struct CoherentState<T: Real> {
    pub vector: CVector<T>,
    pub tail: T,
}

impl<T: Real> CoherentState<T> {
    pub fn tail_exceeds(&self, tol: f64) -> bool {
        self.tail.to_f64() > tol
    }

    pub fn check_tail(&self, tol: f64) -> Result<()> {
        if self.tail_exceeds(tol) {
            return Err(QmkError::TailTolerance { deficit: self.tail.to_f64(), tol });
        }
        Ok(())
    }
}

fn coherent_factor<T: Real>(cutoff: usize, hbar: T, q: T, p: T) -> (CVector<T>, f64) {
    let s = (hbar * lit(2.0)).sqrt();
    let z = Complex::new(q / s, p / s);
    let mod2 = z.norm_sqr();
    // e^{iqp/2ℏ} makes the coefficients match the position-space wavefunction.
    let theta = q * p / (hbar * lit(2.0));
    let phase = Complex::new(theta.cos(), theta.sin());
    let mut c = CVector::zeros(cutoff);
    let mut term = cr::<T>((-mod2 * lit(0.5)).exp());
    for n in 0..cutoff {
        if n > 0 {
            term = term * z / cr(lit::<T>(n as f64).sqrt());
        }
        c[n] = term * phase;
    }
    (c, poisson_tail(mod2.to_f64(), cutoff))
}

/// P(X ≥ n) for X ~ Poisson(mean), summed directly so small tails keep precision.
pub fn poisson_tail(mean: f64, n: usize) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln_mean = mean.ln();
    let log_term = |k: usize| -mean + k as f64 * ln_mean - ln_factorial(k);
    let mut sum = 0.0;
    let mut k = n;
    loop {
        let t = log_term(k).exp();
        sum += t;
        if (k as f64) > mean && t < sum * 1e-17 {
            break;
        }
        k += 1;
        if k > n + 10_000 {
            break;
        }
    }
    sum.min(1.0)
}

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Coherent state |q,p⟩ in the truncated basis.
pub fn coherent_state<T: Real>(space: &FockSpace<T>, q: &[T], p: &[T]) -> Result<CoherentState<T>> {
    if q.len() != space.dim_d {
        return Err(QmkError::DimensionMismatch { expected: space.dim_d, found: q.len() });
    }
    if p.len() != space.dim_d {
        return Err(QmkError::DimensionMismatch { expected: space.dim_d, found: p.len() });
    }
    let mut vector = CVector::from_element(1, cr(T::one()));
    let mut kept = 1.0f64;
    for j in 0..space.dim_d {
        let (c, tail) = coherent_factor(space.cutoff, space.hbar, q[j], p[j]);
        vector = vector.kronecker(&c);
        kept *= 1.0 - tail;
    }
    Ok(CoherentState { vector, tail: lit(1.0 - kept) })
}

/// Smallest cutoff whose coherent-state tail at every point is below `tail_tol`.
pub fn choose_cutoff(points: &[(Vec<f64>, Vec<f64>)], hbar: f64, tail_tol: f64) -> usize {
    let d = points.first().map(|(q, _)| q.len()).unwrap_or(1).max(1);
    let per_axis = tail_tol / d as f64;
    let max_mod2 = points
        .iter()
        .flat_map(|(q, p)| q.iter().zip(p).map(|(a, b)| (a * a + b * b) / (2.0 * hbar)))
        .fold(0.0f64, f64::max);
    let mut n = 1;
    while poisson_tail(max_mod2, n) > per_axis {
        n += 1;
    }
    n
}

/// ⟨u|v⟩, conjugate-linear in `u`.
pub fn overlap<T: Real>(u: &CVector<T>, v: &CVector<T>) -> Result<Complex<T>> {
    if u.len() != v.len() {
        return Err(QmkError::DimensionMismatch { expected: u.len(), found: v.len() });
    }
    Ok(u.dotc(v))
}
