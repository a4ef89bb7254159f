//! Dense Hermitian linear algebra helpers.

use crate::error::{QmkError, Result};
use crate::scalar::{cabs, cr, CMatrix, Real};
use nalgebra::{Complex, DMatrix, DVector};

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct Eigensystem<T: Real> {
    pub values: DVector<T>,
    pub vectors: CMatrix<T>,
}

pub fn hermitian_part<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()) * cr(nalgebra::convert::<f64, T>(0.5))
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_defect<T: Real>(m: &CMatrix<T>) -> T {
    let d = m - m.adjoint();
    d.iter().fold(T::zero(), |acc, z| acc.max(cabs(*z)))
}

pub fn eigh<T: Real>(m: &CMatrix<T>) -> Eigensystem<T> {
    let n = m.nrows();
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Eigensystem { values, vectors }
}

pub fn eigvalsh<T: Real>(m: &CMatrix<T>) -> DVector<T> {
    eigh(m).values
}

pub fn min_eigenvalue<T: Real>(m: &CMatrix<T>) -> T {
    let v = eigvalsh(m);
    v[0]
}

/// V diag(f(w)) V^†.
pub fn spectral_map<T: Real>(es: &Eigensystem<T>, f: impl Fn(T) -> T) -> CMatrix<T> {
    let mut scaled = es.vectors.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= cr(f(es.values[k]));
    }
    scaled * es.vectors.adjoint()
}

pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

pub fn commutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a * b - b * a
}

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::identity(n, n)
}

pub fn frobenius<T: Real>(m: &CMatrix<T>) -> T {
    m.norm()
}

pub fn real_trace<T: Real>(m: &CMatrix<T>) -> T {
    m.trace().re
}

/// tr(A B) without forming the product.
pub fn trace_product<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn to_complex<T: Real>(m: &DMatrix<T>) -> CMatrix<T> {
    m.map(cr)
}

/// max |B^†B − I|.
pub fn orthonormality_defect<T: Real>(basis: &CMatrix<T>) -> T {
    let g = basis.adjoint() * basis - identity::<T>(basis.ncols());
    g.iter().fold(T::zero(), |acc, z| acc.max(cabs(*z)))
}

pub fn check_orthonormal<T: Real>(basis: &CMatrix<T>, tol: f64) -> Result<()> {
    let defect = orthonormality_defect(basis).to_f64();
    if defect > tol || !defect.is_finite() {
        return Err(QmkError::NotOrthonormal { defect });
    }
    Ok(())
}

/// Principal angles between span(inner) and span(outer), one per column of
/// `inner`. Missing directions (when `inner` has more columns) count as π/2.
pub fn containment_angles<T: Real>(inner: &CMatrix<T>, outer: &CMatrix<T>) -> Vec<T> {
    let k = inner.ncols();
    if k == 0 {
        return Vec::new();
    }
    if outer.ncols() == 0 {
        return vec![T::frac_pi_2(); k];
    }
    let overlap = inner.adjoint() * outer;
    let sv = overlap.svd(false, false).singular_values;
    let mut angles: Vec<T> = sv
        .iter()
        .map(|&s| s.min(T::one()).max(T::zero()).acos())
        .collect();
    angles.resize(k, T::frac_pi_2());
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    angles
}

/// Columns of V whose eigenvalue satisfies `keep`.
pub fn select_columns<T: Real>(es: &Eigensystem<T>, keep: impl Fn(T) -> bool) -> CMatrix<T> {
    let idx: Vec<usize> = (0..es.values.len()).filter(|&i| keep(es.values[i])).collect();
    es.vectors.select_columns(idx.iter())
}
