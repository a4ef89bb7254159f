//! Optimality criterion and transport-structure residuals.

use crate::cost::{build_cost, project_cost_factored, ProjectedOperators};
use crate::error::{QmkError, Result};
use crate::fock::FockSpace;
use crate::linalg::{commutator, containment_angles, eigh, frobenius, identity, kron, min_eigenvalue, select_columns, trace_product};
use crate::scalar::{ci, cr, lit, CMatrix, Real};
use crate::sdp::lift_pair;
use crate::states::{psd_range, psd_sqrt, support_projector, trace_out_left, trace_out_right, DEFAULT_RANK_TOL};

/// (i/ℏ)[conj_op, op].
pub fn quantum_derivative<T: Real>(op: &CMatrix<T>, conj_op: &CMatrix<T>, hbar: T) -> Result<CMatrix<T>> {
    if op.shape() != conj_op.shape() {
        return Err(QmkError::DimensionMismatch { expected: conj_op.nrows(), found: op.nrows() });
    }
    Ok(commutator(conj_op, op) * ci(T::one() / hbar))
}

/// 𝒟_q S = (i/ℏ)[p, S].
pub fn d_q<T: Real>(s: &CMatrix<T>, p: &CMatrix<T>, hbar: T) -> CMatrix<T> {
    commutator(p, s) * ci(T::one() / hbar)
}

/// 𝒟_p S = −(i/ℏ)[q, S].
pub fn d_p<T: Real>(s: &CMatrix<T>, q: &CMatrix<T>, hbar: T) -> CMatrix<T> {
    commutator(q, s) * ci(-T::one() / hbar)
}

#[derive(Debug, Clone)]
pub struct KernelCriterion<T: Real> {
    pub angles: Vec<T>,
    pub max_angle: T,
    pub pass: bool,
    pub null_dim: usize,
    pub range_dim: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct KernelOptions {
    /// Relative threshold for range(F).
    pub rank_tol: f64,
    /// Null space of the slack: eigenvalues below null_tol·‖cost‖₂.
    pub null_tol: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { rank_tol: DEFAULT_RANK_TOL, null_tol: 1e-6 }
    }
}

/// Principal angles between range(F) and the near-null space of C − A⊗I − I⊗B.
pub fn kernel_criterion<T: Real>(
    cost: &CMatrix<T>,
    a: &CMatrix<T>,
    b: &CMatrix<T>,
    f: &CMatrix<T>,
    tol: f64,
    opts: KernelOptions,
) -> KernelCriterion<T> {
    let slack = cost - lift_pair(a, b);
    let es = eigh(&slack);
    let norm = eigh(cost).values.iter().fold(T::zero(), |s, v| s.max(v.abs()));
    let null = select_columns(&es, |x| x < norm * lit(opts.null_tol));
    let range = psd_range(f, opts.rank_tol);
    let angles = containment_angles(&range, &null);
    let max_angle = angles.iter().fold(T::zero(), |s, &v| s.max(v));
    KernelCriterion { pass: max_angle.to_f64() < tol, max_angle, null_dim: null.ncols(), range_dim: range.ncols(), angles }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Canonical operators on the whole truncated space.
    Full,
    /// Operators compressed to the marginal supports.
    FiniteRank,
}

/// Frobenius norms of the four identities for one axis.
///
/// `a_*` are the identities involving 𝒜 (transport of the right factor),
/// `b_*` those involving ℬ.
#[derive(Debug, Clone, Copy)]
pub struct AxisResiduals<T: Real> {
    pub a_q: T,
    pub a_p: T,
    pub b_q: T,
    pub b_p: T,
}

impl<T: Real> AxisResiduals<T> {
    pub fn max(&self) -> T {
        self.a_q.max(self.a_p).max(self.b_q).max(self.b_p)
    }
}

#[derive(Debug, Clone)]
pub struct StructureReport<T: Real> {
    pub variant: Variant,
    pub axes: Vec<AxisResiduals<T>>,
    /// 𝒜 = ½(H − A) (or 𝒜′ on the support).
    pub a_cal: CMatrix<T>,
    pub b_cal: CMatrix<T>,
    pub kernel: Option<KernelCriterion<T>>,
}

fn sandwich_norm<T: Real>(fh: &CMatrix<T>, x: &CMatrix<T>) -> T {
    frobenius(&(fh * x * fh))
}

/// Residuals of the full-space identities
/// F^{1/2}(I⊗q_j − 𝒟_{q_j}𝒜⊗I)F^{1/2}, F^{1/2}(I⊗p_j − 𝒟_{p_j}𝒜⊗I)F^{1/2}
/// and their mirrors with ℬ, using operators `ops` on both factors.
pub fn full_residuals<T: Real>(f: &CMatrix<T>, a: &CMatrix<T>, b: &CMatrix<T>, ops: &ProjectedOperators<T>) -> Result<StructureReport<T>> {
    let n = ops.dim();
    if a.nrows() != n || b.nrows() != n || f.nrows() != n * n {
        return Err(QmkError::DimensionMismatch { expected: n * n, found: f.nrows() });
    }
    let fh = psd_sqrt(f)?;
    let half = cr(lit::<T>(0.5));
    let a_cal = (&ops.h - a) * half;
    let b_cal = (&ops.h - b) * half;
    let id = identity::<T>(n);
    let h = ops.hbar;
    let axes = (0..ops.dim_d())
        .map(|j| {
            let (q, p) = (&ops.q[j], &ops.p[j]);
            AxisResiduals {
                a_q: sandwich_norm(&fh, &(kron(&id, q) - kron(&d_q(&a_cal, p, h), &id))),
                a_p: sandwich_norm(&fh, &(kron(&id, p) - kron(&d_p(&a_cal, q, h), &id))),
                b_q: sandwich_norm(&fh, &(kron(q, &id) - kron(&id, &d_q(&b_cal, p, h)))),
                b_p: sandwich_norm(&fh, &(kron(p, &id) - kron(&id, &d_p(&b_cal, q, h)))),
            }
        })
        .collect();
    Ok(StructureReport { variant: Variant::Full, axes, a_cal, b_cal, kernel: None })
}

/// Residuals of the four finite-rank identities for each axis j, with
/// c(X, Y) = (i/ℏ)[X, Y]:
///
/// 1. Σ_k c(P_j^R, Q_k^R)⊗Q_k^S + c(P_j^R, P_k^R)⊗P_k^S − c(P_j^R, 𝒜′)⊗I
/// 2. Σ_k c(Q_j^R, Q_k^R)⊗Q_k^S + c(Q_j^R, P_k^R)⊗P_k^S − c(Q_j^R, 𝒜′)⊗I
/// 3. Σ_k Q_k^R⊗c(P_j^S, Q_k^S) + P_k^R⊗c(P_j^S, P_k^S) − I⊗c(P_j^S, ℬ′)
/// 4. Σ_k Q_k^R⊗c(Q_j^S, Q_k^S) + P_k^R⊗c(Q_j^S, P_k^S) − I⊗c(Q_j^S, ℬ′)
///
/// each sandwiched by F^{1/2}. All four follow from (C′ − A⊗I − I⊗B)F = 0
/// by commuting with the corresponding one-particle operator.
pub fn finite_rank_residuals<T: Real>(
    f: &CMatrix<T>,
    a: &CMatrix<T>,
    b: &CMatrix<T>,
    left: &ProjectedOperators<T>,
    right: &ProjectedOperators<T>,
) -> Result<StructureReport<T>> {
    let (n, m) = (left.dim(), right.dim());
    if a.nrows() != n || b.nrows() != m || f.nrows() != n * m {
        return Err(QmkError::DimensionMismatch { expected: n * m, found: f.nrows() });
    }
    let fh = psd_sqrt(f)?;
    let half = cr(lit::<T>(0.5));
    let a_cal = (&left.h - a) * half;
    let b_cal = (&right.h - b) * half;
    let (il, ir) = (identity::<T>(n), identity::<T>(m));
    let h = left.hbar;
    let c = |x: &CMatrix<T>, y: &CMatrix<T>| commutator(x, y) * ci(T::one() / h);
    let d = left.dim_d();
    let left_id = |x: &CMatrix<T>| -> CMatrix<T> {
        let mut s = CMatrix::zeros(n * m, n * m);
        for k in 0..d {
            s += kron(&c(x, &left.q[k]), &right.q[k]) + kron(&c(x, &left.p[k]), &right.p[k]);
        }
        s - kron(&c(x, &a_cal), &ir)
    };
    let right_id = |y: &CMatrix<T>| -> CMatrix<T> {
        let mut s = CMatrix::zeros(n * m, n * m);
        for k in 0..d {
            s += kron(&left.q[k], &c(y, &right.q[k])) + kron(&left.p[k], &c(y, &right.p[k]));
        }
        s - kron(&il, &c(y, &b_cal))
    };
    let axes = (0..d)
        .map(|j| AxisResiduals {
            a_q: sandwich_norm(&fh, &left_id(&left.p[j])),
            a_p: sandwich_norm(&fh, &left_id(&left.q[j])),
            b_q: sandwich_norm(&fh, &right_id(&right.p[j])),
            b_p: sandwich_norm(&fh, &right_id(&right.q[j])),
        })
        .collect();
    let cost = project_cost_factored(left, right);
    let kernel = Some(kernel_criterion(&cost, a, b, f, 1e-4, KernelOptions::default()));
    Ok(StructureReport { variant: Variant::FiniteRank, axes, a_cal, b_cal, kernel })
}

/// Finite-rank residuals with operators compressed onto the given bases.
pub fn transport_residuals_finite_rank<T: Real>(
    f: &CMatrix<T>,
    a: &CMatrix<T>,
    b: &CMatrix<T>,
    left_basis: &CMatrix<T>,
    right_basis: &CMatrix<T>,
    space: &FockSpace<T>,
) -> Result<StructureReport<T>> {
    let left = ProjectedOperators::new(space, left_basis)?;
    let right = ProjectedOperators::new(space, right_basis)?;
    finite_rank_residuals(f, a, b, &left, &right)
}

/// Full-space identities when (A, B) is feasible on the truncated space;
/// otherwise the finite-rank identities on the supports of F's marginals.
pub fn transport_residuals_full<T: Real>(
    f: &CMatrix<T>,
    a: &CMatrix<T>,
    b: &CMatrix<T>,
    space: &FockSpace<T>,
    feas_tol: f64,
) -> Result<StructureReport<T>> {
    let n = space.dim();
    if f.nrows() != n * n || a.nrows() != n || b.nrows() != n {
        return Err(QmkError::DimensionMismatch { expected: n * n, found: f.nrows() });
    }
    let cost = build_cost(space)?;
    let slack = &cost.entries - lift_pair(a, b);
    if min_eigenvalue(&slack).to_f64() >= -feas_tol {
        let ops = ProjectedOperators::full(space)?;
        let mut rep = full_residuals(f, a, b, &ops)?;
        rep.kernel = Some(kernel_criterion(&cost.entries, a, b, f, 1e-4, KernelOptions::default()));
        return Ok(rep);
    }
    let l = support_projector(&trace_out_right(f, n, n), DEFAULT_RANK_TOL).basis;
    let r = support_projector(&trace_out_left(f, n, n), DEFAULT_RANK_TOL).basis;
    let w = kron(&l, &r);
    let fs = w.adjoint() * f * &w;
    let asup = l.adjoint() * a * &l;
    let bsup = r.adjoint() * b * &r;
    transport_residuals_finite_rank(&fs, &asup, &bsup, &l, &r, space)
}

/// ‖F^{1/2}(I⊗Q^S − k_q Q^R⊗I)F^{1/2}‖ and ‖F^{1/2}(I⊗P^S − k_p P^R⊗I)F^{1/2}‖ for axis j.
pub fn scaled_transport_residuals<T: Real>(
    f: &CMatrix<T>,
    left: &ProjectedOperators<T>,
    right: &ProjectedOperators<T>,
    axis: usize,
    k_q: T,
    k_p: T,
) -> Result<(T, T)> {
    let fh = psd_sqrt(f)?;
    let (il, ir) = (identity::<T>(left.dim()), identity::<T>(right.dim()));
    let rq = kron(&il, &right.q[axis]) - kron(&left.q[axis], &ir) * cr(k_q);
    let rp = kron(&il, &right.p[axis]) - kron(&left.p[axis], &ir) * cr(k_p);
    Ok((sandwich_norm(&fh, &rq), sandwich_norm(&fh, &rp)))
}

/// ‖F^{1/2}((i/ℏ)[P^R,Q^R]⊗Q^S)F^{1/2} − F^{1/2}(κ I⊗Q^S)F^{1/2}‖.
pub fn commutator_transfer_residual<T: Real>(
    f: &CMatrix<T>,
    left: &ProjectedOperators<T>,
    right: &ProjectedOperators<T>,
    axis: usize,
    kappa: T,
) -> Result<T> {
    let fh = psd_sqrt(f)?;
    let comm = quantum_derivative(&left.q[axis], &left.p[axis], left.hbar)?;
    let il = identity::<T>(left.dim());
    let x = kron(&comm, &right.q[axis]) - kron(&il, &right.q[axis]) * cr(kappa);
    Ok(sandwich_norm(&fh, &x))
}

#[derive(Debug, Clone)]
pub struct EhrenfestReport<T: Real> {
    /// (tr(Q_j R), tr(P_j R)) per axis.
    pub lhs: Vec<(T, T)>,
    /// (tr(𝒟_{q_j}ℬ S), tr(𝒟_{p_j}ℬ S)) per axis.
    pub rhs: Vec<(T, T)>,
    /// (tr(Q_j S), tr(P_j S)) per axis.
    pub lhs_right: Vec<(T, T)>,
    /// (tr(𝒟_{q_j}𝒜 R), tr(𝒟_{p_j}𝒜 R)) per axis.
    pub rhs_right: Vec<(T, T)>,
    pub gap: T,
}

/// Expected phase-space position of each marginal against the quantum
/// gradient of the opposite potential, on the given (projected) operators.
/// The marginals are taken from F.
pub fn ehrenfest_check<T: Real>(
    f: &CMatrix<T>,
    a: &CMatrix<T>,
    b: &CMatrix<T>,
    left: &ProjectedOperators<T>,
    right: &ProjectedOperators<T>,
) -> Result<EhrenfestReport<T>> {
    let (n, m) = (left.dim(), right.dim());
    if f.nrows() != n * m || a.nrows() != n || b.nrows() != m {
        return Err(QmkError::DimensionMismatch { expected: n * m, found: f.nrows() });
    }
    let r = trace_out_right(f, n, m);
    let s = trace_out_left(f, n, m);
    let half = cr(lit::<T>(0.5));
    let a_cal = (&left.h - a) * half;
    let b_cal = (&right.h - b) * half;
    let h = left.hbar;
    let tr = |x: &CMatrix<T>, y: &CMatrix<T>| trace_product(x, y).re;
    let mut out = EhrenfestReport { lhs: vec![], rhs: vec![], lhs_right: vec![], rhs_right: vec![], gap: T::zero() };
    for j in 0..left.dim_d() {
        let l = (tr(&left.q[j], &r), tr(&left.p[j], &r));
        let rr = (tr(&d_q(&b_cal, &right.p[j], h), &s), tr(&d_p(&b_cal, &right.q[j], h), &s));
        let ls = (tr(&right.q[j], &s), tr(&right.p[j], &s));
        let rs = (tr(&d_q(&a_cal, &left.p[j], h), &r), tr(&d_p(&a_cal, &left.q[j], h), &r));
        for v in [l.0 - rr.0, l.1 - rr.1, ls.0 - rs.0, ls.1 - rs.1] {
            out.gap = out.gap.max(v.abs());
        }
        out.lhs.push(l);
        out.rhs.push(rr);
        out.lhs_right.push(ls);
        out.rhs_right.push(rs);
    }
    Ok(out)
}
