//! Closed forms for matching the two-coherent-state densities
//! R = ½(|a⟩⟨a| + |−a⟩⟨−a|) and S = ½(|b⟩⟨b| + |−b⟩⟨−b|).
//!
//! 4×4 matrices use the ordered basis {φ₊ψ₊, φ₊ψ₋, φ₋ψ₊, φ₋ψ₋}, where
//! φ± = (|a⟩ ± |−a⟩)/√(2(1±λ)) and ψ± likewise with b and μ.

use crate::cost::ProjectedOperators;
use crate::error::{QmkError, Result};
use crate::fock::{coherent_state, FockSpace};
use crate::linalg::{check_orthonormal, eigh, identity, kron, to_complex};
use crate::scalar::{ci, cr, lit, CMatrix, Real};
use crate::sdp::lift_pair;
use crate::states::{DensityOperator, PhasePoint, PhaseSpaceMeasure};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BipartiteInstance<T: Real> {
    pub a: T,
    pub b: T,
    pub hbar: T,
    pub lambda: T,
    pub mu: T,
}

/// Entries of the projected cost C′ (before adding 2ℏ on the diagonal).
#[derive(Debug, Clone, Copy)]
pub struct CostEntries<T: Real> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub gamma: T,
    pub delta: T,
}

#[derive(Debug, Clone)]
pub struct ClosedFormDual<T: Real> {
    /// Pair for the cost used here (the +ℏ/+ℏ shifted one).
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    /// Pair for the cost shifted by −2ℏ.
    pub a_unshifted: DMatrix<T>,
    pub b_unshifted: DMatrix<T>,
    pub x: T,
    pub abar: T,
    pub bbar: T,
    pub cbar: T,
    pub dbar: T,
    /// min eig(C′ − A⊗I − I⊗B) for the returned pair.
    pub slack_min_eigenvalue: T,
    pub shift_applied: bool,
}

impl<T: Real> BipartiteInstance<T> {
    pub fn new(a: T, b: T, hbar: T) -> Result<Self> {
        if !(a > T::zero() && b > T::zero() && hbar > T::zero()) {
            return Err(QmkError::InvalidInstance("a, b and hbar must be positive".into()));
        }
        let lambda = (-a * a / hbar).exp();
        let mu = (-b * b / hbar).exp();
        if !(lambda > T::zero() && lambda < T::one() && mu > T::zero() && mu < T::one()) {
            return Err(QmkError::InvalidInstance("overlaps must lie in (0, 1)".into()));
        }
        Ok(Self { a, b, hbar, lambda, mu })
    }

    /// Left marginal eigenvalues ((1+λ)/2, (1−λ)/2).
    pub fn left_weights(&self) -> [T; 2] {
        let h = lit::<T>(0.5);
        [h * (T::one() + self.lambda), h * (T::one() - self.lambda)]
    }

    pub fn right_weights(&self) -> [T; 2] {
        let h = lit::<T>(0.5);
        [h * (T::one() + self.mu), h * (T::one() - self.mu)]
    }

    pub fn marginal_left(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_row_slice(&self.left_weights()))
    }

    pub fn marginal_right(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_row_slice(&self.right_weights()))
    }

    pub fn coupling_matrix(&self) -> DMatrix<T> {
        let (l, m) = (self.lambda, self.mu);
        let one = T::one();
        let s1 = ((one + l * m) * (one + l * m) - (l + m) * (l + m)).max(T::zero()).sqrt();
        let s2 = ((one - l * m) * (one - l * m) - (l - m) * (l - m)).max(T::zero()).sqrt();
        let z = T::zero();
        #[rustfmt::skip]
        let f = DMatrix::from_row_slice(4, 4, &[
            one + l * m + l + m, z, z, s1,
            z, one - l * m + l - m, s2, z,
            z, s2, one - l * m - l + m, z,
            s1, z, z, one + l * m - l - m,
        ]);
        f * lit::<T>(0.25)
    }

    pub fn cost_entries(&self) -> CostEntries<T> {
        let (a, b, l, m) = (self.a, self.b, self.lambda, self.mu);
        let one = T::one();
        let ap = a * a * (one - l) / (one + l);
        let am = a * a * (one + l) / (one - l);
        let bp = b * b * (one - m) / (one + m);
        let bm = b * b * (one + m) / (one - m);
        let root = ((one - l * l) * (one - m * m)).sqrt();
        CostEntries {
            a: ap + bp,
            b: ap + bm,
            c: am + bp,
            d: am + bm,
            gamma: -lit::<T>(2.0) * a * b * (one - l * m) / root,
            delta: -lit::<T>(2.0) * a * b * (one + l * m) / root,
        }
    }

    pub fn cost_matrix(&self) -> DMatrix<T> {
        let e = self.cost_entries();
        let h2 = lit::<T>(2.0) * self.hbar;
        let z = T::zero();
        #[rustfmt::skip]
        let c = DMatrix::from_row_slice(4, 4, &[
            e.a + h2, z, z, e.gamma,
            z, e.b + h2, e.delta, z,
            z, e.delta, e.c + h2, z,
            e.gamma, z, z, e.d + h2,
        ]);
        c
    }

    /// tr(F·C′).
    pub fn mk2_value(&self) -> T {
        (self.coupling_matrix() * self.cost_matrix()).trace()
    }

    /// Closed-form dual pair, gauge α₁ = 0.
    pub fn dual_pair(&self) -> Result<ClosedFormDual<T>> {
        let (a, b, l, m) = (self.a, self.b, self.lambda, self.mu);
        let one = T::one();
        let e = self.cost_entries();
        let x = -lit::<T>(4.0) * a * b * (one - l * l * m * m) / ((one - l * l) * (one - m * m));
        // x² − 4γ² and x² − 4δ² as computed from the entries; they must be
        // nonnegative up to rounding.
        let floor = -x * x * lit(1e-12);
        for y in [e.gamma, e.delta] {
            let d = x * x - lit::<T>(4.0) * y * y;
            if d < floor {
                return Err(QmkError::NegativeDiscriminant { value: d.to_f64() });
            }
        }
        // Factored roots: x² − 4γ² = (4ab(1−λμ)(λ+μ)/r²)², x² − 4δ² = (4ab(1+λμ)(λ−μ)/r²)²
        // with r² = (1−λ²)(1−μ²). The signed second root (sign of b − a) is
        // the optimal branch; the unsigned one is optimal only for a ≤ b.
        let r2 = (one - l * l) * (one - m * m);
        let four_ab = lit::<T>(4.0) * a * b;
        let rg = four_ab * (one - l * m) * (l + m) / r2;
        let rd = four_ab * (one + l * m) * (l - m) / r2;
        let half = lit::<T>(0.5);
        let abar = (x + rg) * half;
        let dbar = (x - rg) * half;
        let bbar = (x + rd) * half;
        let cbar = (x - rd) * half;
        let alpha1 = T::zero();
        let beta1 = abar + e.a - alpha1;
        let beta2 = bbar + e.b - alpha1;
        let alpha2 = cbar + e.c - beta1;
        let diag = |u: T, v: T| DMatrix::from_diagonal(&DVector::from_row_slice(&[u, v]));
        let a0 = diag(alpha1, alpha2);
        let b0 = diag(beta1, beta2);
        let h = self.hbar;
        let a1 = diag(alpha1 + h, alpha2 + h);
        let b1 = diag(beta1 + h, beta2 + h);
        let cp = to_complex(&self.cost_matrix());
        let margin = |aa: &DMatrix<T>, bb: &DMatrix<T>| eigh(&(&cp - lift_pair(&to_complex(aa), &to_complex(bb)))).values[0];
        let shifted_margin = margin(&a1, &b1);
        let (a_out, b_out, slack, shift_applied) = if shifted_margin.to_f64() >= -1e-9 {
            (a1, b1, shifted_margin, true)
        } else {
            let m0 = margin(&a0, &b0);
            if m0.to_f64() < -1e-9 {
                return Err(QmkError::DualInfeasible { margin: shifted_margin.to_f64() });
            }
            (a0.clone(), b0.clone(), m0, false)
        };
        Ok(ClosedFormDual {
            a: a_out,
            b: b_out,
            a_unshifted: a0,
            b_unshifted: b0,
            x,
            abar,
            bbar,
            cbar,
            dbar,
            slack_min_eigenvalue: slack,
            shift_applied,
        })
    }

    /// tr(RA) + tr(SB) for a diagonal pair.
    pub fn dual_value(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> T {
        (self.marginal_left() * a).trace() + (self.marginal_right() * b).trace()
    }

    fn side(&self, x: T, ov: T) -> ProjectedOperators<T> {
        let one = T::one();
        let root = (one - ov * ov).sqrt();
        let qv = cr(x / root);
        let pv = ci(-x * ov / root);
        let z = cr(T::zero());
        let q = CMatrix::from_row_slice(2, 2, &[z, qv, qv, z]);
        let p = CMatrix::from_row_slice(2, 2, &[z, pv, -pv, z]);
        let h = CMatrix::from_diagonal(&DVector::from_row_slice(&[
            cr(x * x * (one - ov) / (one + ov) + self.hbar),
            cr(x * x * (one + ov) / (one - ov) + self.hbar),
        ]));
        ProjectedOperators { q: vec![q], p: vec![p], h, hbar: self.hbar }
    }

    /// Q^R, P^R, H^R in {φ₊, φ₋}.
    pub fn left_operators(&self) -> ProjectedOperators<T> {
        self.side(self.a, self.lambda)
    }

    /// Q^S, P^S, H^S in {ψ₊, ψ₋}.
    pub fn right_operators(&self) -> ProjectedOperators<T> {
        self.side(self.b, self.mu)
    }

    /// c with (i/ℏ)[P^R, Q^R] = c·diag(1, −1).
    pub fn commutator_coefficient(&self) -> T {
        lit::<T>(2.0) * self.a * self.a * self.lambda / (self.hbar * (T::one() - self.lambda * self.lambda))
    }

    /// Classical supports μ = ½δ_{(a,0)} + ½δ_{(−a,0)}, ν likewise with b,
    /// with the left weights tilted to ((1+η)/2, (1−η)/2).
    pub fn measures(&self, eta: T) -> Result<(PhaseSpaceMeasure<T>, PhaseSpaceMeasure<T>)>
    where
        T: crate::scalar::Field,
    {
        let h = lit::<T>(0.5);
        let z = T::zero();
        let pt = |x: T| PhasePoint::new(vec![x], vec![z]);
        let mu = PhaseSpaceMeasure::new(vec![pt(self.a), pt(-self.a)], vec![h * (T::one() + eta), h * (T::one() - eta)])?;
        let nu = PhaseSpaceMeasure::new(vec![pt(self.b), pt(-self.b)], vec![h, h])?;
        Ok((mu, nu))
    }

    pub fn lift_to_fock(&self, space: &FockSpace<T>, tail_tol: f64) -> Result<LiftedBipartite<T>> {
        if space.dim_d != 1 {
            return Err(QmkError::InvalidInstance("the bipartite instance is one-dimensional".into()));
        }
        let basis = |x: T| -> Result<CMatrix<T>> {
            let u = coherent_state(space, &[x], &[T::zero()])?;
            let v = coherent_state(space, &[-x], &[T::zero()])?;
            u.check_tail(tail_tol)?;
            v.check_tail(tail_tol)?;
            // Normalize the truncated vectors themselves; φ₊ ⊥ φ₋ then holds
            // exactly by parity.
            let plus = &u.vector + &v.vector;
            let minus = &u.vector - &v.vector;
            let w = CMatrix::from_columns(&[plus.normalize(), minus.normalize()]);
            check_orthonormal(&w, 1e-10)?;
            Ok(w)
        };
        let left_basis = basis(self.a)?;
        let right_basis = basis(self.b)?;
        let r = &left_basis * to_complex(&self.marginal_left()) * left_basis.adjoint();
        let s = &right_basis * to_complex(&self.marginal_right()) * right_basis.adjoint();
        Ok(LiftedBipartite {
            r: DensityOperator::new(*space, r, "bipartite R")?,
            s: DensityOperator::new(*space, s, "bipartite S")?,
            f_support: to_complex(&self.coupling_matrix()),
            left_basis,
            right_basis,
        })
    }
}

/// Closed-form objects in the truncated Fock basis.
#[derive(Debug, Clone)]
pub struct LiftedBipartite<T: Real> {
    pub r: DensityOperator<T>,
    pub s: DensityOperator<T>,
    /// Columns φ₊, φ₋.
    pub left_basis: CMatrix<T>,
    /// Columns ψ₊, ψ₋.
    pub right_basis: CMatrix<T>,
    pub f_support: CMatrix<T>,
}

impl<T: Real> LiftedBipartite<T> {
    /// The coupling on the full two-particle space, W F W^†.
    pub fn coupling_full(&self) -> CMatrix<T> {
        let w = kron(&self.left_basis, &self.right_basis);
        &w * &self.f_support * w.adjoint()
    }
}

/// 𝒜 + 𝒟 − ℬ − 𝒞, identically zero.
pub fn cost_entry_identity<T: Real>(e: &CostEntries<T>) -> T {
    e.a + e.d - e.b - e.c
}

pub fn identity2<T: Real>() -> CMatrix<T> {
    identity::<T>(2)
}
