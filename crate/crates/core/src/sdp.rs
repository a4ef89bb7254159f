//! Primal coupling SDP and its Kantorovich dual on the support spaces,
//! solved by an over-relaxed operator-splitting scheme.

use crate::cost::{project_cost_factored, ProjectedOperators};
use crate::error::{QmkError, Result};
use crate::linalg::{containment_angles, eigh, frobenius, hermitian_defect, hermitian_part, identity, kron, real_trace, select_columns, spectral_map, trace_product};
use crate::scalar::{cr, lit, CMatrix, Real};
use crate::states::{marginal_residuals, psd_range, support_projector, trace_out_left, trace_out_right, DensityOperator, Support, DEFAULT_RANK_TOL};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub rho: f64,
    pub max_iter: usize,
    /// Bound on max(primal residual, dual residual).
    pub tol: f64,
    pub feas_tol: f64,
    /// Relative duality-gap target: gap ≤ gap_tol·(1 + |value|).
    pub gap_tol: f64,
    pub relaxation: f64,
    /// Iterations between dual recoveries once the residuals are small.
    pub check_every: usize,
    /// Rebalance ρ when one residual dominates the other by 10×.
    pub adaptive_rho: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rho: 1.0, max_iter: 200_000, tol: 1e-9, feas_tol: 1e-9, gap_tol: 1e-6, relaxation: 1.6, check_every: 50, adaptive_rho: false }
    }
}

/// min tr(F C) over PSD F with Tr₂F = R, Tr₁F = S.
#[derive(Debug, Clone)]
pub struct PrimalProblem<T: Real> {
    pub cost: CMatrix<T>,
    pub marginal_left: CMatrix<T>,
    pub marginal_right: CMatrix<T>,
}

impl<T: Real> PrimalProblem<T> {
    pub fn new(cost: CMatrix<T>, marginal_left: CMatrix<T>, marginal_right: CMatrix<T>) -> Result<Self> {
        let (n, m) = (marginal_left.nrows(), marginal_right.nrows());
        if cost.nrows() != n * m || cost.ncols() != n * m {
            return Err(QmkError::DimensionMismatch { expected: n * m, found: cost.nrows() });
        }
        for x in [&cost, &marginal_left, &marginal_right] {
            let defect = hermitian_defect(x).to_f64();
            if defect > 1e-10 {
                return Err(QmkError::NotHermitian { defect });
            }
        }
        let (tl, tr) = (real_trace(&marginal_left).to_f64(), real_trace(&marginal_right).to_f64());
        if (tl - tr).abs() > 1e-10 {
            return Err(QmkError::InfeasibleMarginals { left: tl, right: tr });
        }
        Ok(Self {
            cost: hermitian_part(&cost),
            marginal_left: hermitian_part(&marginal_left),
            marginal_right: hermitian_part(&marginal_right),
        })
    }

    pub fn left_dim(&self) -> usize {
        self.marginal_left.nrows()
    }

    pub fn right_dim(&self) -> usize {
        self.marginal_right.nrows()
    }

    /// The same problem with cost C + t·I.
    pub fn shifted(&self, t: T) -> Self {
        let n = self.cost.nrows();
        Self { cost: &self.cost + identity::<T>(n) * cr(t), ..self.clone() }
    }
}

/// (A, B) with A⊗I + I⊗B the orthogonal projection of `g` onto the range
/// of the constraint adjoint. Gauge fixed by tr B = 0.
pub fn adjoint_least_squares<T: Real>(g: &CMatrix<T>, n: usize, m: usize) -> (CMatrix<T>, CMatrix<T>) {
    let gl = trace_out_right(g, n, m);
    let gr = trace_out_left(g, n, m);
    let a = gl / cr(lit::<T>(m as f64));
    let b = (gr - identity::<T>(m) * a.trace()) / cr(lit::<T>(n as f64));
    (a, b)
}

pub fn lift_pair<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    kron(a, &identity::<T>(b.nrows())) + kron(&identity::<T>(a.nrows()), b)
}

/// Frobenius-nearest matrix to `m` satisfying both partial-trace constraints.
///
/// With n = dim R and m = dim S the normal equations are
/// m·A + tr(B)·I = R − Tr₂M and tr(A)·I + n·B = S − Tr₁M, solved in closed form.
pub fn affine_project<T: Real>(m: &CMatrix<T>, problem: &PrimalProblem<T>) -> Result<CMatrix<T>> {
    let (n, k) = (problem.left_dim(), problem.right_dim());
    if m.nrows() != n * k || m.ncols() != n * k {
        return Err(QmkError::DimensionMismatch { expected: n * k, found: m.nrows() });
    }
    let er = &problem.marginal_left - trace_out_right(m, n, k);
    let es = &problem.marginal_right - trace_out_left(m, n, k);
    let a = &er / cr(lit::<T>(k as f64));
    let b = (es - identity::<T>(k) * a.trace()) / cr(lit::<T>(n as f64));
    Ok(m + lift_pair(&a, &b))
}

/// Nearest PSD matrix: negative eigenvalues clipped to zero.
pub fn psd_project<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    let es = eigh(m);
    spectral_map(&es, |x| x.max(T::zero()))
}

#[derive(Debug, Clone)]
pub struct SolveReport<T: Real> {
    pub primal_value: T,
    pub dual_value: T,
    pub f: CMatrix<T>,
    pub a: CMatrix<T>,
    pub b: CMatrix<T>,
    pub gap: T,
    pub iterations: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    pub converged: bool,
    /// min eig(cost − A⊗I − I⊗B) after the feasibility shift.
    pub slack_min_eigenvalue: T,
    /// Weight of R⊗S mixed into the final iterate to restore exact feasibility.
    pub polish_weight: T,
    /// Combined residual over the last iterations (oldest first).
    pub residual_tail: Vec<f64>,
    /// Penalty parameter at exit.
    pub final_rho: f64,
}

impl<T: Real> SolveReport<T> {
    /// Whether the tail of the residual history never increases.
    pub fn residual_tail_monotone(&self) -> bool {
        self.residual_tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
    }
}

#[derive(Debug, Clone)]
pub struct DualSolution<T: Real> {
    pub a: CMatrix<T>,
    pub b: CMatrix<T>,
    pub value: T,
    pub slack_min_eigenvalue: T,
}

/// Dual candidate from a multiplier-adjusted cost, shifted to exact feasibility.
pub fn recover_dual<T: Real>(problem: &PrimalProblem<T>, g: &CMatrix<T>, feas_tol: f64) -> DualSolution<T> {
    let (n, m) = (problem.left_dim(), problem.right_dim());
    let (mut a, mut b) = adjoint_least_squares(g, n, m);
    a = hermitian_part(&a);
    b = hermitian_part(&b);
    let slack = &problem.cost - lift_pair(&a, &b);
    let mut min = eigh(&slack).values[0];
    let deficit = (lit::<T>(feas_tol) - min).max(T::zero());
    if deficit > T::zero() {
        let half = deficit * lit(0.5);
        a -= identity::<T>(n) * cr(half);
        b -= identity::<T>(m) * cr(half);
        min += deficit;
    }
    let value = trace_product(&problem.marginal_left, &a).re + trace_product(&problem.marginal_right, &b).re;
    DualSolution { a, b, value, slack_min_eigenvalue: min }
}

/// Makes a nearly feasible PSD iterate exactly feasible: alternate affine
/// and PSD projections until the negative part is negligible, then mix in
/// R⊗S just enough to remove what is left.
fn polish<T: Real>(z: &CMatrix<T>, problem: &PrimalProblem<T>) -> (CMatrix<T>, T) {
    let project = |m: &CMatrix<T>| hermitian_part(&affine_project(m, problem).expect("dimensions checked"));
    let mut x = project(z);
    let mut lx = eigh(&x).values[0];
    let floor = lit::<T>(-1e-15);
    for _ in 0..POLISH_ROUNDS {
        if lx >= floor {
            break;
        }
        x = project(&psd_project(&x));
        lx = eigh(&x).values[0];
    }
    if lx >= T::zero() {
        return (x, T::zero());
    }
    let prod = kron(&problem.marginal_left, &problem.marginal_right);
    let lp = eigh(&prod).values[0];
    if lp <= T::zero() {
        return (psd_project(&x), T::zero());
    }
    let theta = (-lx / (lp - lx)).min(T::one());
    let f = &x * cr(T::one() - theta) + prod * cr(theta);
    (hermitian_part(&f), theta)
}

const POLISH_ROUNDS: usize = 500;
const RHO_UPDATE_EVERY: usize = 500;
const RHO_BAND: f64 = 5.0;

pub fn solve_primal<T: Real>(problem: &PrimalProblem<T>, opts: &SolverOptions) -> Result<SolveReport<T>> {
    let (n, m) = (problem.left_dim(), problem.right_dim());
    let dim = n * m;
    let mut rho = lit::<T>(opts.rho);
    let alpha = lit::<T>(opts.relaxation);
    let mut c_scaled = &problem.cost / cr(rho);
    let mut z = kron(&problem.marginal_left, &problem.marginal_right);
    let mut u = CMatrix::<T>::zeros(dim, dim);
    let mut tail: std::collections::VecDeque<f64> = std::collections::VecDeque::with_capacity(50);
    let (mut rp, mut rd) = (T::zero(), T::zero());
    let mut iterations = 0;
    let mut converged = false;
    let mut dual = None;
    let mut polished = None;
    let every = opts.check_every.max(1);
    for it in 1..=opts.max_iter {
        iterations = it;
        let x = affine_project(&(&z - &u - &c_scaled), problem)?;
        let xh = &x * cr(alpha) + &z * cr(T::one() - alpha);
        let z_prev = std::mem::replace(&mut z, psd_project(&(&xh + &u)));
        u += &xh - &z;
        rp = frobenius(&(&x - &z));
        rd = rho * frobenius(&(&z - &z_prev));
        let combined = rp.max(rd).to_f64();
        if tail.len() == 50 {
            tail.pop_front();
        }
        tail.push_back(combined);
        if it % every != 0 {
            continue;
        }
        if combined <= opts.tol {
            let g = &problem.cost + &u * cr(rho);
            let d = recover_dual(problem, &g, opts.feas_tol);
            let (f, w) = polish(&z, problem);
            let pv = trace_product(&f, &problem.cost).re;
            if (pv - d.value).to_f64() <= opts.gap_tol * (1.0 + pv.to_f64().abs()) {
                dual = Some(d);
                polished = Some((f, w));
                converged = true;
                break;
            }
        }
        if opts.adaptive_rho && it % RHO_UPDATE_EVERY == 0 {
            // Balance the two residuals; the stopping test bounds both.
            let tiny = lit::<T>(1e-300);
            let ratio = (rp.max(tiny) / rd.max(tiny)).sqrt();
            let band = lit::<T>(RHO_BAND);
            if ratio > band || ratio < T::one() / band {
                let ratio = ratio.min(lit(1e3)).max(lit(1e-3));
                rho *= ratio;
                u /= cr(ratio);
                c_scaled = &problem.cost / cr(rho);
            }
        }
    }
    let dual = dual.unwrap_or_else(|| recover_dual(problem, &(&problem.cost + &u * cr(rho)), opts.feas_tol));
    let (f, polish_weight) = polished.unwrap_or_else(|| polish(&z, problem));
    let primal_value = trace_product(&f, &problem.cost).re;
    Ok(SolveReport {
        primal_value,
        dual_value: dual.value,
        gap: primal_value - dual.value,
        f,
        a: dual.a,
        b: dual.b,
        iterations,
        primal_residual: rp,
        dual_residual: rd,
        converged,
        slack_min_eigenvalue: dual.slack_min_eigenvalue,
        polish_weight,
        residual_tail: tail.into_iter().collect(),
        final_rho: rho.to_f64(),
    })
}

pub fn solve_dual<T: Real>(problem: &PrimalProblem<T>, opts: &SolverOptions) -> Result<DualSolution<T>> {
    let r = solve_primal(problem, opts)?;
    Ok(DualSolution { a: r.a, b: r.b, value: r.dual_value, slack_min_eigenvalue: r.slack_min_eigenvalue })
}

#[derive(Debug, Clone)]
pub struct CertificateSummary<T: Real> {
    pub gap: T,
    pub marginal_residual_left: T,
    pub marginal_residual_right: T,
    /// min eig(cost − A⊗I − I⊗B); negative means the pair is infeasible.
    pub feasibility_margin: T,
    pub smallest_slack_eigenvalues: Vec<T>,
    /// Largest principal angle between range(F) and the near-null space of the slack.
    pub range_angle: T,
    pub complementary_slackness: T,
    pub feasible: bool,
}

/// Certificate for an arbitrary candidate (F, A, B).
pub fn certify_candidate<T: Real>(
    problem: &PrimalProblem<T>,
    f: &CMatrix<T>,
    a: &CMatrix<T>,
    b: &CMatrix<T>,
    feas_tol: f64,
) -> CertificateSummary<T> {
    let slack = &problem.cost - lift_pair(a, b);
    let es = eigh(&slack);
    let cost_norm = eigh(&problem.cost).values.iter().fold(T::zero(), |s, v| s.max(v.abs()));
    let null_tol = cost_norm * lit(1e-6);
    let null = select_columns(&es, |x| x < null_tol);
    let range = psd_range(f, DEFAULT_RANK_TOL);
    let range_angle = containment_angles(&range, &null).into_iter().fold(T::zero(), |s, v| s.max(v));
    let primal = trace_product(f, &problem.cost).re;
    let dual = trace_product(&problem.marginal_left, a).re + trace_product(&problem.marginal_right, b).re;
    let (ml, mr) = marginal_residuals(f, &problem.marginal_left, &problem.marginal_right);
    let k = es.values.len().min(range.ncols() + 2);
    CertificateSummary {
        gap: primal - dual,
        marginal_residual_left: ml,
        marginal_residual_right: mr,
        feasibility_margin: es.values[0],
        smallest_slack_eigenvalues: es.values.iter().take(k).copied().collect(),
        range_angle,
        complementary_slackness: trace_product(f, &slack).re,
        feasible: es.values[0].to_f64() >= -feas_tol,
    }
}

pub fn certify<T: Real>(report: &SolveReport<T>, problem: &PrimalProblem<T>) -> CertificateSummary<T> {
    certify_candidate(problem, &report.f, &report.a, &report.b, SolverOptions::default().feas_tol)
}

/// A full-space problem compressed to Ker(R)^⊥ ⊗ Ker(S)^⊥.
#[derive(Debug, Clone)]
pub struct SupportProblem<T: Real> {
    pub problem: PrimalProblem<T>,
    pub left: Support<T>,
    pub right: Support<T>,
    pub left_ops: ProjectedOperators<T>,
    pub right_ops: ProjectedOperators<T>,
}

impl<T: Real> SupportProblem<T> {
    pub fn new(r: &DensityOperator<T>, s: &DensityOperator<T>, rank_tol: f64) -> Result<Self> {
        if r.space != s.space {
            return Err(QmkError::InvalidDensity("marginals on different spaces".into()));
        }
        let left = support_projector(&r.matrix, rank_tol);
        let right = support_projector(&s.matrix, rank_tol);
        let left_ops = ProjectedOperators::new(&r.space, &left.basis)?;
        let right_ops = ProjectedOperators::new(&s.space, &right.basis)?;
        let cost = project_cost_factored(&left_ops, &right_ops);
        // Compressed marginals, renormalized for the discarded eigenvalues.
        let norm = |sup: &Support<T>| {
            let t = sup.eigenvalues.iter().fold(T::zero(), |a, &b| a + b);
            sup.compressed() / cr(t)
        };
        let problem = PrimalProblem::new(cost, norm(&left), norm(&right))?;
        Ok(Self { problem, left, right, left_ops, right_ops })
    }

    pub fn from_densities(r: &DensityOperator<T>, s: &DensityOperator<T>) -> Result<Self> {
        Self::new(r, s, DEFAULT_RANK_TOL)
    }

    /// Support-space operator lifted to the full two-particle space.
    pub fn lift(&self, f: &CMatrix<T>) -> CMatrix<T> {
        let w = kron(&self.left.basis, &self.right.basis);
        &w * f * w.adjoint()
    }

    /// One-particle operator on the left support lifted to the full space.
    pub fn lift_left(&self, a: &CMatrix<T>) -> CMatrix<T> {
        &self.left.basis * a * self.left.basis.adjoint()
    }

    pub fn lift_right(&self, b: &CMatrix<T>) -> CMatrix<T> {
        &self.right.basis * b * self.right.basis.adjoint()
    }
}

/// MK_ℏ² between two density operators together with the full report.
pub fn quantum_mk2<T: Real>(
    r: &DensityOperator<T>,
    s: &DensityOperator<T>,
    opts: &SolverOptions,
) -> Result<(SupportProblem<T>, SolveReport<T>)> {
    let sp = SupportProblem::from_densities(r, s)?;
    let report = solve_primal(&sp.problem, opts)?;
    Ok((sp, report))
}
