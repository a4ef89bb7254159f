use nalgebra::Complex;
use num_rational::BigRational;
use proptest::prelude::*;
use qmk::bipartite::BipartiteInstance;
use qmk::cost::{build_cost, enclosed_spectrum_error, grading_commutator_norm, project_cost};
use qmk::fock::{choose_cutoff, coherent_state, harmonic_hamiltonian, momentum_operator, position_operator, FockSpace};
use qmk::linalg::{eigh, hermitian_defect, identity, kron, min_eigenvalue, real_trace, to_complex, trace_product};
use qmk::optimality::{commutator_transfer_residual, finite_rank_residuals, quantum_derivative, scaled_transport_residuals};
use qmk::scalar::{cr, CMatrix};
use qmk::sdp::{solve_primal, PrimalProblem, SolverOptions};
use qmk::states::{
    projector, psd_sqrt, support_projector, toeplitz_coupling, toeplitz_quantize, trace_out_left, trace_out_right, CouplingOperator,
    DensityOperator, PhasePoint, PhaseSpaceMeasure, DEFAULT_RANK_TOL,
};
use qmk::transport::{brute_force_mk2, semiclassical_gap, solve_discrete_mk2};

fn complex_matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, 2 * rows * cols)
        .prop_map(move |v| CMatrix::from_fn(rows, cols, |i, j| Complex::new(v[2 * (i * cols + j)], v[2 * (i * cols + j) + 1])))
}

fn density(n: usize, rank: usize) -> impl Strategy<Value = CMatrix<f64>> {
    complex_matrix(n, rank).prop_map(|g| {
        let m = &g * g.adjoint() + identity::<f64>(g.nrows()) * cr(1e-9);
        let t = m.trace();
        m / t
    })
}

fn orthonormal(n: usize, k: usize) -> impl Strategy<Value = CMatrix<f64>> {
    complex_matrix(n, k).prop_map(|g| g.qr().q())
}

fn measure(max_points: usize, radius: f64) -> impl Strategy<Value = PhaseSpaceMeasure<f64>> {
    prop::collection::vec((-radius..radius, -radius..radius, 0.1f64..1.0), 1..=max_points).prop_map(|pts| {
        let total: f64 = pts.iter().map(|p| p.2).sum();
        let k = pts.len();
        let mut w: Vec<f64> = pts.iter().map(|p| p.2 / total).collect();
        w[k - 1] = 1.0 - w[..k - 1].iter().sum::<f64>();
        PhaseSpaceMeasure::new(pts.iter().map(|p| PhasePoint::new(vec![p.0], vec![p.1])).collect(), w).unwrap()
    })
}

fn points_of(ms: &[&PhaseSpaceMeasure<f64>]) -> Vec<(Vec<f64>, Vec<f64>)> {
    ms.iter().flat_map(|m| m.points.iter().map(|p| (p.q.clone(), p.p.clone()))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operators_are_hermitian(hbar in 0.1f64..3.0, n in 2usize..9, d in 1usize..3) {
        let s = FockSpace::new(hbar, n, d).unwrap();
        for axis in 0..d {
            prop_assert!(hermitian_defect(&position_operator(&s, axis).unwrap().entries) < 1e-14);
            prop_assert!(hermitian_defect(&momentum_operator(&s, axis).unwrap().entries) < 1e-14);
        }
        prop_assert!(hermitian_defect(&harmonic_hamiltonian(&s).entries) < 1e-14);
    }

    #[test]
    fn coherent_energy_is_symbol_plus_d_hbar(q in -2.0f64..2.0, p in -2.0f64..2.0, hbar in 0.3f64..2.0) {
        let n = choose_cutoff(&[(vec![q], vec![p])], hbar, 1e-14);
        let s = FockSpace::new(hbar, n, 1).unwrap();
        let z = coherent_state(&s, &[q], &[p]).unwrap().vector;
        let e = z.dotc(&(harmonic_hamiltonian(&s).entries * &z)).re;
        prop_assert!((e - (q * q + p * p + hbar)).abs() < 1e-8, "{e}");
    }

    #[test]
    fn coherent_deficit_decreases_with_cutoff(q in -3.0f64..3.0, p in -3.0f64..3.0, hbar in 0.3f64..2.0, n in 1usize..30) {
        let tail = |n| coherent_state(&FockSpace::new(hbar, n, 1).unwrap(), &[q], &[p]).unwrap().tail;
        prop_assert!(tail(n + 1) <= tail(n) + 1e-16);
    }

    #[test]
    fn compressions_keep_heisenberg_floor(hbar in 0.2f64..2.0, k in 1usize..4, l in 1usize..4, seed in complex_matrix(6, 6)) {
        let s = FockSpace::new(hbar, 6, 1).unwrap();
        let c = build_cost(&s).unwrap();
        let q = seed.qr().q();
        let left = q.columns(0, k).into_owned();
        let right = q.columns(6 - l, l).into_owned();
        let proj = project_cost(&c, &left, &right).unwrap();
        prop_assert!(min_eigenvalue(&proj) >= 2.0 * hbar - 1e-10);
    }

    #[test]
    fn cost_commutes_with_total_number(hbar in 0.2f64..2.0, n in 2usize..7, d in 1usize..3) {
        let n = if d == 2 { n.min(4) } else { n };
        let c = build_cost(&FockSpace::new(hbar, n, d).unwrap()).unwrap();
        prop_assert!(grading_commutator_norm(&c) < 1e-12);
        prop_assert!(enclosed_spectrum_error(&c) < 1e-10);
        let id = identity::<f64>(c.space.dim());
        prop_assert!((project_cost(&c, &id, &id).unwrap() - &c.entries).norm() < 1e-12);
    }

    #[test]
    fn toeplitz_densities_are_states(mu in measure(4, 2.0), hbar in 0.3f64..2.0) {
        let s = FockSpace::new(hbar, choose_cutoff(&points_of(&[&mu]), hbar, 1e-10), 1).unwrap();
        let r = toeplitz_quantize(&mu, &s, 1e-10).unwrap();
        prop_assert!(hermitian_defect(&r.matrix) < 1e-14);
        prop_assert!(eigh(&r.matrix).values[0] > -1e-12);
        prop_assert!((real_trace(&r.matrix) - 1.0).abs() < 1e-12);
        prop_assert!(support_projector(&r.matrix, DEFAULT_RANK_TOL).rank() <= mu.len());
    }

    #[test]
    fn couplings_live_on_support_product(v in orthonormal(6, 2), w in orthonormal(6, 3), g in complex_matrix(6, 4)) {
        let s = FockSpace::new(1.0, 6, 1).unwrap();
        let basis = kron(&v, &w);
        let f0 = &basis * (&g * g.adjoint()) * basis.adjoint();
        let f = &f0 / cr(real_trace(&f0));
        let r = DensityOperator::new(s, trace_out_right(&f, 6, 6), "R").unwrap();
        let sd = DensityOperator::new(s, trace_out_left(&f, 6, 6), "S").unwrap();
        let c = CouplingOperator::new(f, r, sd, 1e-9).unwrap();
        let p = projector(&support_projector(&c.marginal_left.matrix, DEFAULT_RANK_TOL).basis);
        let q = projector(&support_projector(&c.marginal_right.matrix, DEFAULT_RANK_TOL).basis);
        let pq = kron(&p, &q);
        prop_assert!((&c.matrix - &pq * &c.matrix * &pq).norm() < 1e-8);
    }

    #[test]
    fn toeplitz_coupling_cost_formula(pairs in prop::collection::vec((-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5, 0.1f64..1.0), 1..=3), hbar in 0.5f64..1.5) {
        let pts: Vec<_> = pairs.iter().flat_map(|t| [(vec![t.0], vec![t.1]), (vec![t.2], vec![t.3])]).collect();
        let s = FockSpace::new(hbar, choose_cutoff(&pts, hbar, 1e-12), 1).unwrap();
        let total: f64 = pairs.iter().map(|t| t.4).sum();
        let zs: Vec<_> = pairs.iter().map(|t| (PhasePoint::new(vec![t.0], vec![t.1]), PhasePoint::new(vec![t.2], vec![t.3]))).collect();
        let w: Vec<f64> = pairs.iter().map(|t| t.4 / total).collect();
        let f = toeplitz_coupling(&zs, &w, &s, 1e-12).unwrap();
        let c = build_cost(&s).unwrap();
        let expected: f64 = zs.iter().zip(&w).map(|((a, b), w)| w * (a.sq_dist(b) + 2.0 * hbar)).sum();
        prop_assert!((trace_product(&f, &c.entries).re - expected).abs() < 1e-8);
    }
}

fn random_problem(r: CMatrix<f64>, s: CMatrix<f64>, c: CMatrix<f64>) -> PrimalProblem<f64> {
    let h = (&c + c.adjoint()) * cr(0.5);
    let n = h.nrows();
    PrimalProblem::new(h + identity::<f64>(n) * cr(3.0), r, s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rank_one_marginal_forces_product(r in density(3, 1), s in density(3, 3), c in complex_matrix(9, 9)) {
        let r = {
            let es = eigh(&r);
            let v = es.vectors.column(2).into_owned();
            &v * v.adjoint()
        };
        let rs = support_projector(&r, DEFAULT_RANK_TOL);
        let problem = random_problem(rs.compressed(), s.clone(), {
            let w = kron(&rs.basis, &identity::<f64>(3));
            w.adjoint() * c * w
        });
        let rep = solve_primal(&problem, &SolverOptions::default()).unwrap();
        prop_assert!((&rep.f - kron(&problem.marginal_left, &problem.marginal_right)).norm() < 1e-8);
    }

    #[test]
    fn duality_certificates(r in density(2, 2), s in density(3, 3), c in complex_matrix(6, 6), t in -2.0f64..2.0) {
        let problem = random_problem(r, s, c);
        let opts = SolverOptions::default();
        let rep = solve_primal(&problem, &opts).unwrap();
        prop_assert!(rep.converged);
        prop_assert!(rep.dual_value <= rep.primal_value + 1e-7);
        prop_assert!(rep.slack_min_eigenvalue >= -opts.feas_tol);
        let slack = &problem.cost - qmk::sdp::lift_pair(&rep.a, &rep.b);
        prop_assert!(trace_product(&rep.f, &slack).re < opts.gap_tol);
        let fh = psd_sqrt(&rep.f).unwrap();
        prop_assert!((trace_product(&fh, &(&problem.cost * &fh)).re - rep.primal_value).abs() < 1e-9);
        let shifted = solve_primal(&problem.shifted(t), &opts).unwrap();
        prop_assert!((shifted.primal_value - rep.primal_value - t).abs() < 1e-7);
        prop_assert!((&shifted.f - &rep.f).norm() < 1e-6);
    }

    #[test]
    fn bipartite_closed_forms(a in 0.2f64..3.0, b in 0.2f64..3.0, hi in 0usize..4) {
        let h = [0.1, 0.5, 1.0, 2.0][hi];
        let inst = BipartiteInstance::new(a, b, h).unwrap();
        let f = inst.coupling_matrix();
        prop_assert!(f.clone().symmetric_eigenvalues().min() >= -1e-12);
        prop_assert!((f.trace() - 1.0).abs() < 1e-14);
        let fc = to_complex(&f);
        prop_assert!((trace_out_right(&fc, 2, 2) - to_complex(&inst.marginal_left())).norm() < 1e-14);
        prop_assert!((trace_out_left(&fc, 2, 2) - to_complex(&inst.marginal_right())).norm() < 1e-14);
        let dual = inst.dual_pair().unwrap();
        prop_assert!((inst.mk2_value() - inst.dual_value(&dual.a, &dual.b)).abs() <= 1e-8 * (1.0 + inst.mk2_value()));
        prop_assert!(dual.slack_min_eigenvalue >= -1e-9 * (1.0 + inst.mk2_value()));
    }

    #[test]
    fn bipartite_oracle_matches_solver(a in 0.3f64..2.5, b in 0.3f64..2.5, hi in 0usize..3) {
        let h = [0.5, 1.0, 2.0][hi];
        let inst = BipartiteInstance::new(a, b, h).unwrap();
        let problem = PrimalProblem::new(to_complex(&inst.cost_matrix()), to_complex(&inst.marginal_left()), to_complex(&inst.marginal_right())).unwrap();
        let rep = solve_primal(&problem, &SolverOptions::default()).unwrap();
        prop_assert!((rep.primal_value - inst.mk2_value()).abs() <= 1e-6 * (1.0 + inst.mk2_value()));
    }

    #[test]
    fn bipartite_structure_identities(a in 0.3f64..2.5, b in 0.3f64..2.5, hi in 0usize..3) {
        let h = [0.5, 1.0, 2.0][hi];
        let inst = BipartiteInstance::new(a, b, h).unwrap();
        let dual = inst.dual_pair().unwrap();
        let f = to_complex(&inst.coupling_matrix());
        let (l, r) = (inst.left_operators(), inst.right_operators());
        let rep = finite_rank_residuals(&f, &to_complex(&dual.a), &to_complex(&dual.b), &l, &r).unwrap();
        prop_assert!(rep.axes[0].max() < 1e-8);
        let (rq, rp) = scaled_transport_residuals(&f, &l, &r, 0, b / a, b / a).unwrap();
        prop_assert!(rq < 1e-8 && rp < 1e-8);
        let comm = quantum_derivative(&l.q[0], &l.p[0], h).unwrap();
        let kappa = -inst.lambda * comm[(1, 1)].re;
        prop_assert!(commutator_transfer_residual(&f, &l, &r, 0, kappa).unwrap() < 1e-8);
    }

    #[test]
    fn semiclassical_inequality(mu in measure(3, 1.5), nu in measure(3, 1.5), hi in 0usize..2) {
        let h = [0.5, 1.0][hi];
        let s = FockSpace::new(h, choose_cutoff(&points_of(&[&mu, &nu]), h, 1e-10), 1).unwrap();
        let g = semiclassical_gap(&mu, &nu, &s, 1e-10, &SolverOptions::default()).unwrap();
        prop_assert!(g.bound_slack >= -1e-6, "{g:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_matches_enumeration(mu in measure(4, 2.0), nu in measure(4, 2.0)) {
        let plan = solve_discrete_mk2(&mu, &nu).unwrap();
        prop_assert!(plan.marginal_error(&mu.weights, &nu.weights) < 1e-12);
        prop_assert!(plan.matrix.iter().flatten().all(|&x| x >= 0.0));
        prop_assert!((plan.cost - brute_force_mk2(&mu, &nu).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn exact_scaling_covariance(
        pts in prop::collection::vec((-20i64..20, -20i64..20, 1i64..10), 1..=4),
        qts in prop::collection::vec((-20i64..20, -20i64..20, 1i64..10), 1..=4),
        sn in 1i64..9, sd in 1i64..9,
    ) {
        let rat = |x: i64, y: i64| BigRational::new(x.into(), y.into());
        let build = |v: &[(i64, i64, i64)], scale: &BigRational| {
            let total: i64 = v.iter().map(|t| t.2).sum();
            PhaseSpaceMeasure::new(
                v.iter().map(|t| PhasePoint::new(vec![rat(t.0, 4) * scale], vec![rat(t.1, 4) * scale])).collect(),
                v.iter().map(|t| rat(t.2, total)).collect(),
            ).unwrap()
        };
        let one = rat(1, 1);
        let s = rat(sn, sd);
        let base = solve_discrete_mk2(&build(&pts, &one), &build(&qts, &one)).unwrap();
        let scaled = solve_discrete_mk2(&build(&pts, &s), &build(&qts, &s)).unwrap();
        prop_assert_eq!(scaled.cost, base.cost.clone() * &s * &s);
        prop_assert_eq!(base.cost, brute_force_mk2(&build(&pts, &one), &build(&qts, &one)).unwrap());
    }
}
