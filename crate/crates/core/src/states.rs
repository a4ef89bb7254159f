//! Density operators, phase-space measures, Töplitz quantization, couplings.

use crate::error::{QmkError, Result};
use crate::fock::{choose_cutoff, coherent_state, FockSpace, DEFAULT_TAIL_TOL};
use crate::linalg::{eigh, hermitian_defect, hermitian_part, kron, real_trace, select_columns, spectral_map, trace_product};
use crate::scalar::{cr, lit, CMatrix, CVector, Real};
use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};

pub const DEFAULT_RANK_TOL: f64 = 1e-9;
pub const DEFAULT_COUPLING_TOL: f64 = 1e-7;
const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;

fn validate_state<T: Real>(m: &CMatrix<T>, what: &str) -> Result<()> {
    let defect = hermitian_defect(m).to_f64();
    if defect > HERMITIAN_TOL {
        return Err(QmkError::NotHermitian { defect });
    }
    let tr = real_trace(m).to_f64();
    if (tr - 1.0).abs() > TRACE_TOL || !tr.is_finite() {
        return Err(QmkError::InvalidDensity(format!("{what} trace {tr}")));
    }
    let min = eigh(m).values[0].to_f64();
    if min < -PSD_TOL {
        return Err(QmkError::InvalidDensity(format!("{what} eigenvalue {min:e}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DensityOperator<T: Real> {
    pub space: FockSpace<T>,
    pub matrix: CMatrix<T>,
    pub label: String,
    /// Trace lost to the cutoff before renormalization (0 if none applied).
    pub truncation_deficit: T,
}

impl<T: Real> DensityOperator<T> {
    pub fn new(space: FockSpace<T>, matrix: CMatrix<T>, label: impl Into<String>) -> Result<Self> {
        let n = space.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(QmkError::DimensionMismatch { expected: n, found: matrix.nrows() });
        }
        validate_state(&matrix, "density")?;
        Ok(Self { space, matrix: hermitian_part(&matrix), label: label.into(), truncation_deficit: T::zero() })
    }

    /// |v⟩⟨v| for a unit vector v.
    pub fn pure(space: FockSpace<T>, v: &CVector<T>, label: impl Into<String>) -> Result<Self> {
        Self::new(space, v * v.adjoint(), label)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> DVector<T> {
        eigh(&self.matrix).values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint<T> {
    pub q: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Clone> PhasePoint<T> {
    pub fn new(q: Vec<T>, p: Vec<T>) -> Self {
        Self { q, p }
    }
}

impl<T: Real> PhasePoint<T> {
    /// |q₁−q₂|² + |p₁−p₂|².
    pub fn sq_dist(&self, other: &Self) -> T {
        let dq = self.q.iter().zip(&other.q).map(|(a, b)| (*a - *b) * (*a - *b));
        let dp = self.p.iter().zip(&other.p).map(|(a, b)| (*a - *b) * (*a - *b));
        dq.chain(dp).fold(T::zero(), |s, x| s + x)
    }
}

/// Finite weighted point set on phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceMeasure<T> {
    pub points: Vec<PhasePoint<T>>,
    pub weights: Vec<T>,
}

impl<T: crate::scalar::Field> PhaseSpaceMeasure<T> {
    pub fn new(points: Vec<PhasePoint<T>>, weights: Vec<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(QmkError::InvalidMeasure("empty support".into()));
        }
        if points.len() != weights.len() {
            return Err(QmkError::DimensionMismatch { expected: points.len(), found: weights.len() });
        }
        let d = points[0].q.len();
        if d == 0 || points.iter().any(|pt| pt.q.len() != d || pt.p.len() != d) {
            return Err(QmkError::InvalidMeasure("inconsistent point dimensions".into()));
        }
        if weights.iter().any(|w| *w < T::zero()) {
            return Err(QmkError::InvalidMeasure("negative weight".into()));
        }
        let total = weights.iter().fold(T::zero(), |s, w| s + w.clone());
        let tol = T::from_f64(1e-12).unwrap_or_else(T::zero);
        if (total.clone() - T::one()).abs() > tol {
            return Err(QmkError::InvalidMeasure(format!("weights sum to {}", total.to_f64_lossy())));
        }
        Ok(Self { points, weights })
    }

    pub fn dirac(q: Vec<T>, p: Vec<T>) -> Result<Self> {
        Self::new(vec![PhasePoint::new(q, p)], vec![T::one()])
    }

    pub fn dim_d(&self) -> usize {
        self.points[0].q.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl PhaseSpaceMeasure<f64> {
    /// Cutoff meeting `tail_tol` at every point.
    pub fn auto_cutoff(&self, hbar: f64, tail_tol: f64) -> usize {
        let pts: Vec<(Vec<f64>, Vec<f64>)> = self.points.iter().map(|p| (p.q.clone(), p.p.clone())).collect();
        choose_cutoff(&pts, hbar, tail_tol)
    }
}

/// Σ_k w_k |q_k,p_k⟩⟨q_k,p_k|, renormalized to unit trace.
pub fn toeplitz_quantize<T: Real + crate::scalar::Field>(
    measure: &PhaseSpaceMeasure<T>,
    space: &FockSpace<T>,
    tail_tol: f64,
) -> Result<DensityOperator<T>> {
    if measure.dim_d() != space.dim_d {
        return Err(QmkError::DimensionMismatch { expected: space.dim_d, found: measure.dim_d() });
    }
    let n = space.dim();
    let mut m = CMatrix::zeros(n, n);
    for (pt, &w) in measure.points.iter().zip(&measure.weights) {
        let c = coherent_state(space, &pt.q, &pt.p)?;
        c.check_tail(tail_tol)?;
        m += (&c.vector * c.vector.adjoint()) * cr(w);
    }
    let tr = real_trace(&m);
    m /= cr(tr);
    let mut rho = DensityOperator::new(*space, m, "toeplitz")?;
    rho.truncation_deficit = T::one() - tr;
    Ok(rho)
}

/// Σ_k w_k |z1_k, z2_k⟩⟨z1_k, z2_k| on the two-particle space, renormalized.
pub fn toeplitz_coupling<T: Real>(
    pairs: &[(PhasePoint<T>, PhasePoint<T>)],
    weights: &[T],
    space: &FockSpace<T>,
    tail_tol: f64,
) -> Result<CMatrix<T>> {
    let n = space.pair_dim();
    let mut m = CMatrix::zeros(n, n);
    for ((z1, z2), &w) in pairs.iter().zip(weights) {
        let a = coherent_state(space, &z1.q, &z1.p)?;
        let b = coherent_state(space, &z2.q, &z2.p)?;
        a.check_tail(tail_tol)?;
        b.check_tail(tail_tol)?;
        let v = a.vector.kronecker(&b.vector);
        m += (&v * v.adjoint()) * cr(w);
    }
    let tr = real_trace(&m);
    Ok(m / cr(tr))
}

/// (2πℏ)^{−kd} ⟨z|op|z⟩ where z is the product coherent state of the k
/// supplied points (k = 1 or 2 particles).
pub fn husimi<T: Real>(op: &CMatrix<T>, space: &FockSpace<T>, points: &[PhasePoint<T>]) -> Result<Complex<T>> {
    let expected = space.dim().pow(points.len() as u32);
    if points.is_empty() || op.nrows() != expected {
        return Err(QmkError::DimensionMismatch { expected, found: op.nrows() });
    }
    let mut v = CVector::from_element(1, cr(T::one()));
    for pt in points {
        v = v.kronecker(&coherent_state(space, &pt.q, &pt.p)?.vector);
    }
    let scale = (T::two_pi() * space.hbar).powi((points.len() * space.dim_d) as i32);
    Ok(v.dotc(&(op * &v)) / cr(scale))
}

/// Tr₂: left marginal of an (m·n)×(m·n) matrix.
pub fn trace_out_right<T: Real>(f: &CMatrix<T>, left: usize, right: usize) -> CMatrix<T> {
    CMatrix::from_fn(left, left, |i, k| {
        (0..right).fold(Complex::new(T::zero(), T::zero()), |s, j| s + f[(i * right + j, k * right + j)])
    })
}

/// Tr₁: right marginal of an (m·n)×(m·n) matrix.
pub fn trace_out_left<T: Real>(f: &CMatrix<T>, left: usize, right: usize) -> CMatrix<T> {
    CMatrix::from_fn(right, right, |j, l| {
        (0..left).fold(Complex::new(T::zero(), T::zero()), |s, i| s + f[(i * right + j, i * right + l)])
    })
}

fn check_pair_dim<T: Real>(f: &CMatrix<T>, space: &FockSpace<T>) -> Result<usize> {
    let n = space.dim();
    if f.nrows() != n * n || f.ncols() != n * n {
        return Err(QmkError::DimensionMismatch { expected: n * n, found: f.nrows() });
    }
    Ok(n)
}

/// Trace over the second factor: the left marginal R.
pub fn partial_trace_right<T: Real>(f: &CMatrix<T>, space: &FockSpace<T>) -> Result<CMatrix<T>> {
    let n = check_pair_dim(f, space)?;
    Ok(trace_out_right(f, n, n))
}

/// Trace over the first factor: the right marginal S.
pub fn partial_trace_left<T: Real>(f: &CMatrix<T>, space: &FockSpace<T>) -> Result<CMatrix<T>> {
    let n = check_pair_dim(f, space)?;
    Ok(trace_out_left(f, n, n))
}

/// Frobenius distances of the two partial traces from (R, S).
pub fn marginal_residuals<T: Real>(f: &CMatrix<T>, r: &CMatrix<T>, s: &CMatrix<T>) -> (T, T) {
    let (m, n) = (r.nrows(), s.nrows());
    ((trace_out_right(f, m, n) - r).norm(), (trace_out_left(f, m, n) - s).norm())
}

#[derive(Debug, Clone)]
pub struct CouplingOperator<T: Real> {
    pub space: FockSpace<T>,
    pub matrix: CMatrix<T>,
    pub marginal_left: DensityOperator<T>,
    pub marginal_right: DensityOperator<T>,
}

impl<T: Real> CouplingOperator<T> {
    pub fn new(
        matrix: CMatrix<T>,
        marginal_left: DensityOperator<T>,
        marginal_right: DensityOperator<T>,
        coupling_tol: f64,
    ) -> Result<Self> {
        let space = marginal_left.space;
        if marginal_right.space != space {
            return Err(QmkError::InvalidCoupling("marginals live on different spaces".into()));
        }
        check_pair_dim(&matrix, &space)?;
        let defect = hermitian_defect(&matrix).to_f64();
        if defect > PSD_TOL {
            return Err(QmkError::NotHermitian { defect });
        }
        let matrix = hermitian_part(&matrix);
        let min = eigh(&matrix).values[0].to_f64();
        if min < -PSD_TOL {
            return Err(QmkError::InvalidCoupling(format!("eigenvalue {min:e}")));
        }
        let tr = real_trace(&matrix).to_f64();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(QmkError::InvalidCoupling(format!("trace {tr}")));
        }
        let (rl, rr) = marginal_residuals(&matrix, &marginal_left.matrix, &marginal_right.matrix);
        if rl.to_f64() > coupling_tol || rr.to_f64() > coupling_tol {
            return Err(QmkError::InvalidCoupling(format!("marginal residuals {:e}, {:e}", rl.to_f64(), rr.to_f64())));
        }
        Ok(Self { space, matrix, marginal_left, marginal_right })
    }

    /// Expected cost tr(F C).
    pub fn cost(&self, c: &CMatrix<T>) -> T {
        trace_product(&self.matrix, c).re
    }
}

/// R ⊗ S, the unique coupling when either marginal is pure.
pub fn tensor_coupling<T: Real>(r: &DensityOperator<T>, s: &DensityOperator<T>) -> Result<CouplingOperator<T>> {
    CouplingOperator::new(kron(&r.matrix, &s.matrix), r.clone(), s.clone(), DEFAULT_COUPLING_TOL)
}

/// Orthonormal basis of Ker(R)^⊥ with the matching eigenvalues.
#[derive(Debug, Clone)]
pub struct Support<T: Real> {
    pub basis: CMatrix<T>,
    pub eigenvalues: Vec<T>,
}

impl<T: Real> Support<T> {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// The state compressed to its support (diagonal in this basis).
    pub fn compressed(&self) -> CMatrix<T> {
        CMatrix::from_diagonal(&DVector::from_iterator(self.rank(), self.eigenvalues.iter().map(|&v| cr(v))))
    }
}

/// Eigenvectors with eigenvalue above `rank_tol`·λ_max, largest first.
pub fn support_projector<T: Real>(r: &CMatrix<T>, rank_tol: f64) -> Support<T> {
    let es = eigh(r);
    let n = es.values.len();
    let top = es.values[n - 1].max(T::zero());
    let cut = top * lit(rank_tol);
    let mut idx: Vec<usize> = (0..n).filter(|&i| es.values[i] > cut).collect();
    idx.reverse();
    Support {
        basis: es.vectors.select_columns(idx.iter()),
        eigenvalues: idx.iter().map(|&i| es.values[i]).collect(),
    }
}

/// Projector W W^† onto the span of the columns of `basis`.
pub fn projector<T: Real>(basis: &CMatrix<T>) -> CMatrix<T> {
    basis * basis.adjoint()
}

/// Hermitian PSD square root.
///
/// Eigenvalues below 64ε·λ_max (including tiny negatives) are treated as 0,
/// so rank-deficient inputs give rank-deficient roots.
pub fn psd_sqrt<T: Real>(m: &CMatrix<T>) -> Result<CMatrix<T>> {
    let es = eigh(m);
    let min = es.values[0];
    if min.to_f64() < -1e-6 {
        return Err(QmkError::NegativeEigenvalue { value: min.to_f64() });
    }
    let top = es.values[es.values.len() - 1].max(T::zero());
    let cut = top * T::default_epsilon() * lit(64.0);
    Ok(spectral_map(&es, |x| if x > cut { x.sqrt() } else { T::zero() }))
}

/// Range of a PSD matrix: eigenvectors above `rank_tol`·λ_max.
pub fn psd_range<T: Real>(m: &CMatrix<T>, rank_tol: f64) -> CMatrix<T> {
    let es = eigh(m);
    let top = es.values[es.values.len() - 1].max(T::zero());
    select_columns(&es, |x| x > top * lit(rank_tol))
}

#[derive(Debug, Clone)]
pub struct EnergyTraceCheck<T: Real> {
    pub lhs: T,
    pub rhs: T,
    pub gap: T,
    /// Left-marginal mismatch ‖Tr₂F − R‖_F.
    pub marginal_residual: T,
    /// Set when the gap exceeds 1e−8 or the marginal is off by more than coupling_tol.
    pub flagged: bool,
}

/// lhs = tr(F^{1/2}(H⊗I)F^{1/2}), rhs = tr(R^{1/2} H R^{1/2}), with F on
/// (dim R)·(right_dim) and H on the left factor.
pub fn energy_trace_gap<T: Real>(f: &CMatrix<T>, h: &CMatrix<T>, r: &CMatrix<T>, right_dim: usize) -> Result<EnergyTraceCheck<T>> {
    let left = r.nrows();
    if h.nrows() != left || f.nrows() != left * right_dim {
        return Err(QmkError::DimensionMismatch { expected: left * right_dim, found: f.nrows() });
    }
    let fs = psd_sqrt(f)?;
    let lifted = kron(h, &crate::linalg::identity::<T>(right_dim));
    let lhs = trace_product(&fs, &(&lifted * &fs)).re;
    let rs = psd_sqrt(r)?;
    let rhs = trace_product(&rs, &(h * &rs)).re;
    let gap = (lhs - rhs).abs();
    let marginal_residual = (trace_out_right(f, left, right_dim) - r).norm();
    let flagged = gap.to_f64() > 1e-8 || marginal_residual.to_f64() > DEFAULT_COUPLING_TOL;
    Ok(EnergyTraceCheck { lhs, rhs, gap, marginal_residual, flagged })
}

pub fn energy_trace_identity_check<T: Real>(f: &CouplingOperator<T>, h: &CMatrix<T>) -> Result<EnergyTraceCheck<T>> {
    energy_trace_gap(&f.matrix, h, &f.marginal_left.matrix, f.space.dim())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    CoherentMixture,
    FockMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSpec {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

/// JSON description of a density operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub hbar: f64,
    pub d: usize,
    pub kind: DensityKind,
    #[serde(default)]
    pub points: Vec<PointSpec>,
    #[serde(default)]
    pub matrix: Option<MatrixSpec>,
}

impl DensitySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QmkError::Parse(e.to_string()))
    }

    pub fn measure(&self) -> Result<PhaseSpaceMeasure<f64>> {
        let pts = self.points.iter().map(|p| PhasePoint::new(p.q.clone(), p.p.clone())).collect();
        let w = self.points.iter().map(|p| p.w).collect();
        let m = PhaseSpaceMeasure::new(pts, w)?;
        if m.dim_d() != self.d {
            return Err(QmkError::DimensionMismatch { expected: self.d, found: m.dim_d() });
        }
        Ok(m)
    }

    /// Cutoff implied by the description: the matrix size for Fock matrices, the
    /// tail rule for coherent mixtures.
    pub fn natural_cutoff(&self, tail_tol: f64) -> Result<usize> {
        match self.kind {
            DensityKind::CoherentMixture => Ok(self.measure()?.auto_cutoff(self.hbar, tail_tol)),
            DensityKind::FockMatrix => {
                let m = self.matrix.as_ref().ok_or_else(|| QmkError::Parse("missing matrix".into()))?;
                let dim = m.re.len();
                let n = (dim as f64).powf(1.0 / self.d as f64).round() as usize;
                if n.pow(self.d as u32) != dim {
                    return Err(QmkError::InvalidDensity(format!("matrix size {dim} is not N^{}", self.d)));
                }
                Ok(n)
            }
        }
    }

    pub fn to_density(&self, cutoff: Option<usize>, tail_tol: f64) -> Result<DensityOperator<f64>> {
        let n = match cutoff {
            Some(n) => n,
            None => self.natural_cutoff(tail_tol)?,
        };
        let space = FockSpace::new(self.hbar, n, self.d)?;
        match self.kind {
            DensityKind::CoherentMixture => toeplitz_quantize(&self.measure()?, &space, tail_tol),
            DensityKind::FockMatrix => {
                let m = self.matrix.as_ref().ok_or_else(|| QmkError::Parse("missing matrix".into()))?;
                let dim = space.dim();
                if m.re.len() != dim || m.re.iter().any(|row| row.len() != dim) {
                    return Err(QmkError::DimensionMismatch { expected: dim, found: m.re.len() });
                }
                if let Some(im) = &m.im {
                    if im.len() != dim || im.iter().any(|row| row.len() != dim) {
                        return Err(QmkError::DimensionMismatch { expected: dim, found: im.len() });
                    }
                }
                let mat = CMatrix::from_fn(dim, dim, |i, k| {
                    Complex::new(m.re[i][k], m.im.as_ref().map(|im| im[i][k]).unwrap_or(0.0))
                });
                DensityOperator::new(space, mat, "fock_matrix")
            }
        }
    }

    pub fn default_tail_tol() -> f64 {
        DEFAULT_TAIL_TOL
    }
}
