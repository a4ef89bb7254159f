//! Gauss–Hermite quadrature of position-space formulas, used to validate the
//! analytic Fock-basis matrix elements.

use crate::scalar::CMatrix;
use nalgebra::{Complex, DMatrix, DVector};
use std::f64::consts::PI;

/// Nodes and weights for ∫ f(u) e^{−u²} du (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Newton polish on g_n, then Christoffel weights 1/Σ g_k².
    let weights = nodes
        .iter_mut()
        .map(|x| {
            for _ in 0..3 {
                let g = scaled_hermite(n + 1, *x);
                let dg = (2.0 * n as f64).sqrt() * g[n - 1];
                *x -= g[n] / dg;
            }
            let g = scaled_hermite(n, *x);
            1.0 / g.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    (nodes, weights)
}

/// g_n(u) = h_n(u) e^{u²/2} for n < count, where h_n are the normalized
/// Hermite functions.
pub fn scaled_hermite(count: usize, u: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(count);
    if count == 0 {
        return g;
    }
    g.push(PI.powf(-0.25));
    if count > 1 {
        g.push(2f64.sqrt() * u * g[0]);
    }
    for n in 1..count.saturating_sub(1) {
        let next = (2.0 / (n as f64 + 1.0)).sqrt() * u * g[n] - (n as f64 / (n as f64 + 1.0)).sqrt() * g[n - 1];
        g.push(next);
    }
    g
}

fn nodes_for(levels: usize) -> usize {
    4 * levels
}

/// ⟨m|x|n⟩ = √ℏ ∫ h_m u h_n du.
pub fn position_matrix(levels: usize, hbar: f64) -> CMatrix<f64> {
    let (u, w) = gauss_hermite(nodes_for(levels));
    let mut m = CMatrix::zeros(levels, levels);
    for (&ui, &wi) in u.iter().zip(&w) {
        let g = scaled_hermite(levels, ui);
        for a in 0..levels {
            for b in 0..levels {
                m[(a, b)] += Complex::new(wi * g[a] * ui * g[b] * hbar.sqrt(), 0.0);
            }
        }
    }
    m
}

/// ⟨m|−iℏ∂_x|n⟩ = −i√ℏ ∫ h_m h_n' du, with h_n' = −u h_n + √(2n) h_{n−1}.
pub fn momentum_matrix(levels: usize, hbar: f64) -> CMatrix<f64> {
    let (u, w) = gauss_hermite(nodes_for(levels));
    let mut m = CMatrix::zeros(levels, levels);
    for (&ui, &wi) in u.iter().zip(&w) {
        let g = scaled_hermite(levels + 1, ui);
        for b in 0..levels {
            let prev = if b > 0 { (2.0 * b as f64).sqrt() * g[b - 1] } else { 0.0 };
            let dg = -ui * g[b] + prev;
            for a in 0..levels {
                m[(a, b)] += Complex::new(0.0, -hbar.sqrt() * wi * g[a] * dg);
            }
        }
    }
    m
}

/// ⟨ψ_n| (πℏ)^{−1/4} e^{−(x−q)²/2ℏ} e^{ipx/ℏ} ⟩ for n < levels.
pub fn coherent_coefficients(levels: usize, hbar: f64, q: f64, p: f64) -> DVector<Complex<f64>> {
    let s = q / hbar.sqrt();
    let k = p / hbar.sqrt();
    let (u, w) = gauss_hermite(nodes_for(levels).max(64));
    let mut c = DVector::zeros(levels);
    for (&ui, &wi) in u.iter().zip(&w) {
        let g = scaled_hermite(levels, ui);
        let env = PI.powf(-0.25) * (ui * s - s * s / 2.0).exp();
        let osc = Complex::from_polar(1.0, k * ui);
        for n in 0..levels {
            c[n] += osc * (wi * g[n] * env);
        }
    }
    c
}

/// Fock coefficients ⟨ψ_m ⊗ ψ_n|Ψ_{0,0}⟩ of the cost ground state
/// Ψ_{0,0}(x,y) = (2ℏ)^{−1/2} h_0((x+y)/(2√(2ℏ))) h_0((x−y)/√(2ℏ)),
/// returned in the two-particle ordering m·levels + n.
pub fn cost_ground_state(levels: usize, nodes: usize) -> DVector<Complex<f64>> {
    // In u = x/√ℏ, v = y/√ℏ the integrand is
    // e^{−u²−v²} g_m(u) g_n(v) (2π)^{−1/2} e^{(3/16)(u²+v²) + (3/8)uv}; ℏ drops out.
    let (u, w) = gauss_hermite(nodes);
    let gs: Vec<Vec<f64>> = u.iter().map(|&x| scaled_hermite(levels, x)).collect();
    let mut c = DVector::zeros(levels * levels);
    for i in 0..u.len() {
        for j in 0..u.len() {
            let (a, b) = (u[i], u[j]);
            let f = w[i] * w[j] * (2.0 * PI).powf(-0.5) * ((3.0 / 16.0) * (a * a + b * b) + (3.0 / 8.0) * a * b).exp();
            for m in 0..levels {
                for n in 0..levels {
                    c[m * levels + n] += Complex::new(f * gs[i][m] * gs[j][n], 0.0);
                }
            }
        }
    }
    c
}
