//! Discrete classical transport with quadratic phase-space cost.

use crate::error::{QmkError, Result};
use crate::fock::FockSpace;
use crate::scalar::Field;
use crate::sdp::{quantum_mk2, SolverOptions};
use crate::states::{toeplitz_quantize, PhasePoint, PhaseSpaceMeasure};
use serde::Serialize;
use std::collections::VecDeque;

/// Largest support handled by [`brute_force_mk2`].
pub const BRUTE_FORCE_MAX: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T> {
    /// `matrix[i][j]` is the mass sent from `mu` point i to `nu` point j.
    pub matrix: Vec<Vec<T>>,
    pub cost: T,
}

impl<T: Field> TransportPlan<T> {
    /// Largest absolute deviation of the row/column sums from the weights.
    pub fn marginal_error(&self, rows: &[T], cols: &[T]) -> T {
        let mut worst = T::zero();
        for (i, w) in rows.iter().enumerate() {
            let s = self.matrix[i].iter().fold(T::zero(), |a, x| a + x.clone());
            let e = (s - w.clone()).abs();
            if e > worst {
                worst = e;
            }
        }
        for (j, w) in cols.iter().enumerate() {
            let s = self.matrix.iter().fold(T::zero(), |a, r| a + r[j].clone());
            let e = (s - w.clone()).abs();
            if e > worst {
                worst = e;
            }
        }
        worst
    }
}

/// |q₁−q₂|² + |p₁−p₂|² over any ordered field.
pub fn quadratic_cost<T: Field>(x: &PhasePoint<T>, y: &PhasePoint<T>) -> T {
    let sq = |a: &T, b: &T| {
        let d = a.clone() - b.clone();
        d.clone() * d
    };
    let dq = x.q.iter().zip(&y.q).map(|(a, b)| sq(a, b));
    let dp = x.p.iter().zip(&y.p).map(|(a, b)| sq(a, b));
    dq.chain(dp).fold(T::zero(), |s, v| s + v)
}

pub fn cost_table<T: Field>(mu: &PhaseSpaceMeasure<T>, nu: &PhaseSpaceMeasure<T>) -> Result<Vec<Vec<T>>> {
    if mu.is_empty() || nu.is_empty() {
        return Err(QmkError::InvalidMeasure("empty support".into()));
    }
    if mu.dim_d() != nu.dim_d() {
        return Err(QmkError::DimensionMismatch { expected: mu.dim_d(), found: nu.dim_d() });
    }
    Ok(mu.points.iter().map(|x| nu.points.iter().map(|y| quadratic_cost(x, y)).collect()).collect())
}

fn plan_cost<T: Field>(plan: &[Vec<T>], cost: &[Vec<T>]) -> T {
    let mut total = T::zero();
    for (row, crow) in plan.iter().zip(cost) {
        for (x, c) in row.iter().zip(crow) {
            total = total + x.clone() * c.clone();
        }
    }
    total
}

/// Spanning-tree basis of the transportation problem. Node k < m is row k,
/// node m + j is column j.
struct Basis {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
}

impl Basis {
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }

    /// Tree path from `from` to `to` as a list of basis indices.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let adj = self.adjacency();
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(u) = queue.pop_front() {
            if u == to {
                break;
            }
            for &(v, k) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    prev[v] = Some((u, k));
                    queue.push_back(v);
                }
            }
        }
        let mut out = Vec::new();
        let mut cur = to;
        while let Some((u, k)) = prev[cur] {
            out.push(k);
            cur = u;
        }
        out.reverse();
        out
    }
}

fn northwest_corner<T: Field>(rows: &[T], cols: &[T]) -> (Basis, Vec<T>) {
    let (m, n) = (rows.len(), cols.len());
    let mut s = rows.to_vec();
    let mut t = cols.to_vec();
    let (mut i, mut j) = (0, 0);
    let mut cells = Vec::with_capacity(m + n - 1);
    let mut flows = Vec::with_capacity(m + n - 1);
    loop {
        let x = if s[i] < t[j] { s[i].clone() } else { t[j].clone() };
        s[i] = s[i].clone() - x.clone();
        t[j] = t[j].clone() - x.clone();
        cells.push((i, j));
        flows.push(x);
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || s[i] <= t[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    (Basis { m, n, cells }, flows)
}

/// Transportation simplex: northwest-corner start, MODI potentials,
/// Bland's rule for both entering and leaving cells.
pub fn transportation_simplex<T: Field>(rows: &[T], cols: &[T], cost: &[Vec<T>]) -> Result<TransportPlan<T>> {
    let (m, n) = (rows.len(), cols.len());
    if m == 0 || n == 0 {
        return Err(QmkError::InvalidMeasure("empty support".into()));
    }
    if cost.len() != m || cost.iter().any(|r| r.len() != n) {
        return Err(QmkError::DimensionMismatch { expected: m * n, found: cost.iter().map(Vec::len).sum() });
    }
    let (mut basis, mut flows) = northwest_corner(rows, cols);
    let eps = T::pivot_eps();
    let neg_eps = T::zero() - eps.clone();
    loop {
        // Potentials u_i + v_j = c_ij on the basis tree, u_0 = 0.
        let adj = basis.adjacency();
        let mut pot: Vec<Option<T>> = vec![None; m + n];
        pot[0] = Some(T::zero());
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            let pu = pot[u].clone().expect("visited node has a potential");
            for &(v, k) in &adj[u] {
                if pot[v].is_none() {
                    let (i, j) = basis.cells[k];
                    pot[v] = Some(cost[i][j].clone() - pu.clone());
                    queue.push_back(v);
                }
            }
        }
        let pot: Vec<T> = pot.into_iter().map(|p| p.expect("basis is a spanning tree")).collect();

        let mut entering = None;
        'scan: for i in 0..m {
            for j in 0..n {
                if basis.cells.contains(&(i, j)) {
                    continue;
                }
                let r = cost[i][j].clone() - pot[i].clone() - pot[m + j].clone();
                if r < neg_eps {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else { break };

        // Cycle: entering cell (+), then the tree path from column ej back to row ei.
        let path = basis.path(m + ej, ei);
        let minus: Vec<usize> = path.iter().step_by(2).copied().collect();
        let theta = minus
            .iter()
            .map(|&k| flows[k].clone())
            .fold(None, |acc: Option<T>, x| match acc {
                Some(a) if a <= x => Some(a),
                _ => Some(x),
            })
            .expect("cycle has a decreasing cell");
        let leave = minus
            .iter()
            .copied()
            .filter(|&k| flows[k].clone() - theta.clone() <= eps)
            .min_by_key(|&k| basis.cells[k])
            .expect("ratio test has a minimiser");
        for (pos, &k) in path.iter().enumerate() {
            flows[k] = if pos % 2 == 0 { flows[k].clone() - theta.clone() } else { flows[k].clone() + theta.clone() };
        }
        basis.cells[leave] = (ei, ej);
        flows[leave] = theta;
    }

    let mut matrix = vec![vec![T::zero(); n]; m];
    for (&(i, j), x) in basis.cells.iter().zip(flows) {
        matrix[i][j] = if x < T::zero() { T::zero() } else { x };
    }
    let cost_value = plan_cost(&matrix, cost);
    Ok(TransportPlan { matrix, cost: cost_value })
}

/// Optimal plan between two discrete phase-space measures.
pub fn solve_discrete_mk2<T: Field>(mu: &PhaseSpaceMeasure<T>, nu: &PhaseSpaceMeasure<T>) -> Result<TransportPlan<T>> {
    let cost = cost_table(mu, nu)?;
    transportation_simplex(&mu.weights, &nu.weights, &cost)
}

/// Exact optimum by enumerating every spanning tree of the complete
/// bipartite support graph and solving its unique flow.
pub fn brute_force_mk2<T: Field>(mu: &PhaseSpaceMeasure<T>, nu: &PhaseSpaceMeasure<T>) -> Result<T> {
    let (m, n) = (mu.len(), nu.len());
    if m > BRUTE_FORCE_MAX || n > BRUTE_FORCE_MAX {
        return Err(QmkError::SupportTooLarge { m, n });
    }
    let cost = cost_table(mu, nu)?;
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let eps = T::pivot_eps();
    let mut best: Option<T> = None;
    for mask in 0u32..(1u32 << cells.len()) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let tree: Vec<(usize, usize)> = (0..cells.len()).filter(|b| mask >> b & 1 == 1).map(|b| cells[b]).collect();
        let Some(flows) = tree_flows(&tree, &mu.weights, &nu.weights) else { continue };
        if flows.iter().any(|x| *x < T::zero() - eps.clone()) {
            continue;
        }
        let total = tree.iter().zip(&flows).fold(T::zero(), |s, (&(i, j), x)| s + x.clone() * cost[i][j].clone());
        best = match best {
            Some(b) if b <= total => Some(b),
            _ => Some(total),
        };
    }
    best.ok_or_else(|| QmkError::InvalidMeasure("no feasible basis".into()))
}

/// Flows on a spanning tree by leaf elimination; `None` if the edge set is
/// not a spanning tree.
fn tree_flows<T: Field>(tree: &[(usize, usize)], rows: &[T], cols: &[T]) -> Option<Vec<T>> {
    let (m, n) = (rows.len(), cols.len());
    let mut rest: Vec<T> = rows.iter().chain(cols).cloned().collect();
    let mut degree = vec![0usize; m + n];
    for &(i, j) in tree {
        degree[i] += 1;
        degree[m + j] += 1;
    }
    let mut done = vec![false; tree.len()];
    let mut flows = vec![T::zero(); tree.len()];
    for _ in 0..tree.len() {
        let (e, leaf) = tree.iter().enumerate().filter(|(e, _)| !done[*e]).find_map(|(e, &(i, j))| {
            if degree[i] == 1 {
                Some((e, i))
            } else if degree[m + j] == 1 {
                Some((e, m + j))
            } else {
                None
            }
        })?;
        let (i, j) = tree[e];
        let other = if leaf == i { m + j } else { i };
        let x = rest[leaf].clone();
        rest[other] = rest[other].clone() - x.clone();
        rest[leaf] = T::zero();
        flows[e] = x;
        done[e] = true;
        degree[i] -= 1;
        degree[m + j] -= 1;
    }
    // A cycle leaves an isolated vertex; every node must have been reached.
    let mut touched = vec![false; m + n];
    for &(i, j) in tree {
        touched[i] = true;
        touched[m + j] = true;
    }
    touched.iter().all(|&t| t).then_some(flows)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SemiclassicalGap {
    pub quantum: f64,
    pub classical: f64,
    /// classical + 2dℏ − quantum.
    pub bound_slack: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Compares MK_ℏ² of the Töplitz quantizations with the classical cost plus 2dℏ.
pub fn semiclassical_gap(
    mu: &PhaseSpaceMeasure<f64>,
    nu: &PhaseSpaceMeasure<f64>,
    space: &FockSpace<f64>,
    tail_tol: f64,
    opts: &SolverOptions,
) -> Result<SemiclassicalGap> {
    let r = toeplitz_quantize(mu, space, tail_tol)?;
    let s = toeplitz_quantize(nu, space, tail_tol)?;
    let (_, report) = quantum_mk2(&r, &s, opts)?;
    let classical = solve_discrete_mk2(mu, nu)?.cost;
    let shift = 2.0 * space.dim_d as f64 * space.hbar;
    Ok(SemiclassicalGap {
        quantum: report.primal_value,
        classical,
        bound_slack: classical + shift - report.primal_value,
        iterations: report.iterations,
        converged: report.converged,
    })
}
