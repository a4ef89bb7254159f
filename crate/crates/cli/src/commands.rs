use crate::output::{complex_json, Cell, Payload, Table};
use crate::{CliError, CliResult, Command, CommonArgs};
use qmk::bipartite::BipartiteInstance;
use qmk::cost::{build_cost, labelled_spectrum};
use qmk::fock::{choose_cutoff, FockSpace, DEFAULT_TAIL_TOL};
use qmk::linalg::to_complex;
use qmk::optimality::{ehrenfest_check, finite_rank_residuals, scaled_transport_residuals};
use qmk::sdp::{certify, quantum_mk2, SolverOptions};
use qmk::states::{DensityKind, DensityOperator, DensitySpec, PhaseSpaceMeasure};
use qmk::transport::{semiclassical_gap, solve_discrete_mk2};
use qmk::QmkError;
use rayon::prelude::*;
use serde_json::json;

struct Loaded {
    r: DensityOperator<f64>,
    s: DensityOperator<f64>,
    warnings: Vec<String>,
}

fn solver_options(common: &CommonArgs) -> SolverOptions {
    let mut opts = SolverOptions::default();
    if let Some(t) = common.tol {
        opts.tol = t;
    }
    if let Some(n) = common.max_iter {
        opts.max_iter = n;
    }
    opts
}

fn parse_specs(common: &CommonArgs, texts: &[String], needed: usize) -> CliResult<Vec<DensitySpec>> {
    if texts.len() < needed {
        let flag = if needed == 1 { "--input" } else { "--input and --input2" };
        return Err(CliError::Usage(format!("this command needs {flag}")));
    }
    let single_hbar = match common.hbar.as_slice() {
        [] => None,
        [h] => Some(*h),
        _ => return Err(CliError::Usage("this command takes a single --hbar value".into())),
    };
    let mut specs = Vec::new();
    for t in texts.iter().take(needed) {
        let mut spec = DensitySpec::from_json(t)?;
        if let Some(h) = single_hbar {
            spec.hbar = h;
        }
        specs.push(spec);
    }
    if let [x, y] = specs.as_slice() {
        if x.hbar != y.hbar {
            return Err(QmkError::InvalidInstance(format!("inputs disagree on hbar: {} vs {}", x.hbar, y.hbar)).into());
        }
        if x.d != y.d {
            return Err(QmkError::DimensionMismatch { expected: x.d, found: y.d }.into());
        }
    }
    Ok(specs)
}

/// Common cutoff for a set of specs. Fock matrices fix it; otherwise the
/// largest automatic cutoff wins. An explicit override quantizes without the
/// tail check and reports the tails that exceed the tolerance.
fn quantize(specs: &[DensitySpec], cutoff: Option<usize>) -> CliResult<(Vec<DensityOperator<f64>>, Vec<String>)> {
    let mut warnings = Vec::new();
    let fixed: Vec<usize> = specs
        .iter()
        .filter(|s| s.kind == DensityKind::FockMatrix)
        .map(|s| s.natural_cutoff(DEFAULT_TAIL_TOL))
        .collect::<qmk::Result<_>>()?;
    if let Some(&n) = fixed.first() {
        if let Some(&m) = fixed.iter().find(|&&m| m != n) {
            return Err(QmkError::DimensionMismatch { expected: n, found: m }.into());
        }
    }
    let n = match (cutoff, fixed.first()) {
        (Some(n), _) => n,
        (None, Some(&n)) => n,
        (None, None) => {
            let mut n = 0;
            for s in specs {
                n = n.max(s.natural_cutoff(DEFAULT_TAIL_TOL)?);
            }
            n
        }
    };
    let tail_tol = if cutoff.is_some() { f64::INFINITY } else { DEFAULT_TAIL_TOL };
    let mut out = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        let rho = s.to_density(Some(n), tail_tol)?;
        if cutoff.is_some() && rho.truncation_deficit > DEFAULT_TAIL_TOL {
            warnings.push(format!(
                "input {}: coherent tail {:e} exceeds {:e} at cutoff {n}",
                i + 1,
                rho.truncation_deficit,
                DEFAULT_TAIL_TOL
            ));
        }
        out.push(rho);
    }
    Ok((out, warnings))
}

fn load_pair(common: &CommonArgs, texts: &[String]) -> CliResult<Loaded> {
    let specs = parse_specs(common, texts, 2)?;
    let (mut rhos, warnings) = quantize(&specs, common.cutoff)?;
    let s = rhos.pop().expect("two densities");
    let r = rhos.pop().expect("two densities");
    Ok(Loaded { r, s, warnings })
}

fn scalar_table(pairs: Vec<(&'static str, Cell)>) -> Table {
    let (header, row): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let mut t = Table::new(header);
    t.push(row);
    t
}

pub fn execute(command: &Command, texts: &[String]) -> CliResult<Payload> {
    match command {
        Command::Distance(c) => distance(c, texts),
        Command::Dual(c) => dual(c, texts),
        Command::Certify(c) => certify_cmd(c, texts),
        Command::Structure(c) => structure(c, texts),
        Command::BipartiteSweep { common, a, b } => bipartite_sweep(common, a, b),
        Command::ToeplitzCheck(c) => toeplitz_check(c, texts),
        Command::Classical(c) => classical(c, texts),
        Command::Spectrum { common, dim } => spectrum(common, *dim),
    }
}

fn distance(common: &CommonArgs, texts: &[String]) -> CliResult<Payload> {
    let l = load_pair(common, texts)?;
    let (sp, rep) = quantum_mk2(&l.r, &l.s, &solver_options(common))?;
    let table = scalar_table(vec![
        ("mk2", Cell::F(rep.primal_value)),
        ("dual", Cell::F(rep.dual_value)),
        ("gap", Cell::F(rep.gap)),
        ("iterations", Cell::U(rep.iterations)),
        ("converged", Cell::B(rep.converged)),
        ("primal_residual", Cell::F(rep.primal_residual)),
        ("dual_residual", Cell::F(rep.dual_residual)),
        ("cutoff", Cell::U(l.r.space.cutoff)),
        ("hbar", Cell::F(l.r.space.hbar)),
        ("rank_left", Cell::U(sp.left.rank())),
        ("rank_right", Cell::U(sp.right.rank())),
    ]);
    let result = json!({
        "mk2": rep.primal_value,
        "dual": rep.dual_value,
        "gap": rep.gap,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "primal_residual": rep.primal_residual,
        "dual_residual": rep.dual_residual,
        "cutoff": l.r.space.cutoff,
        "hbar": l.r.space.hbar,
        "d": l.r.space.dim_d,
        "rank_left": sp.left.rank(),
        "rank_right": sp.right.rank(),
    });
    Ok(Payload { result, table, converged: rep.converged, warnings: l.warnings })
}

fn dual(common: &CommonArgs, texts: &[String]) -> CliResult<Payload> {
    let l = load_pair(common, texts)?;
    let (sp, rep) = quantum_mk2(&l.r, &l.s, &solver_options(common))?;
    let a = sp.lift_left(&rep.a);
    let b = sp.lift_right(&rep.b);
    let mut table = Table::new(vec!["potential", "row", "col", "re", "im"]);
    for (name, m) in [("A", &a), ("B", &b)] {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                table.push(vec![Cell::S(name.into()), Cell::U(i), Cell::U(j), Cell::F(m[(i, j)].re), Cell::F(m[(i, j)].im)]);
            }
        }
    }
    let result = json!({
        "value": rep.dual_value,
        "mk2": rep.primal_value,
        "gap": rep.gap,
        "slack_min_eigenvalue": rep.slack_min_eigenvalue,
        "iterations": rep.iterations,
        "a": complex_json(&a),
        "b": complex_json(&b),
        "a_support": complex_json(&rep.a),
        "b_support": complex_json(&rep.b),
    });
    Ok(Payload { result, table, converged: rep.converged, warnings: l.warnings })
}

fn certify_cmd(common: &CommonArgs, texts: &[String]) -> CliResult<Payload> {
    let l = load_pair(common, texts)?;
    let (sp, rep) = quantum_mk2(&l.r, &l.s, &solver_options(common))?;
    let cert = certify(&rep, &sp.problem);
    let table = scalar_table(vec![
        ("gap", Cell::F(cert.gap)),
        ("marginal_residual_left", Cell::F(cert.marginal_residual_left)),
        ("marginal_residual_right", Cell::F(cert.marginal_residual_right)),
        ("feasibility_margin", Cell::F(cert.feasibility_margin)),
        ("range_angle", Cell::F(cert.range_angle)),
        ("complementary_slackness", Cell::F(cert.complementary_slackness)),
        ("feasible", Cell::B(cert.feasible)),
    ]);
    let result = json!({
        "mk2": rep.primal_value,
        "gap": cert.gap,
        "marginal_residual_left": cert.marginal_residual_left,
        "marginal_residual_right": cert.marginal_residual_right,
        "feasibility_margin": cert.feasibility_margin,
        "smallest_slack_eigenvalues": cert.smallest_slack_eigenvalues,
        "range_angle": cert.range_angle,
        "complementary_slackness": cert.complementary_slackness,
        "feasible": cert.feasible,
        "iterations": rep.iterations,
    });
    Ok(Payload { result, table, converged: rep.converged, warnings: l.warnings })
}

fn structure(common: &CommonArgs, texts: &[String]) -> CliResult<Payload> {
    let l = load_pair(common, texts)?;
    let (sp, rep) = quantum_mk2(&l.r, &l.s, &solver_options(common))?;
    let report = finite_rank_residuals(&rep.f, &rep.a, &rep.b, &sp.left_ops, &sp.right_ops)?;
    let ehr = ehrenfest_check(&rep.f, &rep.a, &rep.b, &sp.left_ops, &sp.right_ops)?;
    let mut table = Table::new(vec!["axis", "identity", "residual"]);
    let mut axes = Vec::new();
    for (j, ax) in report.axes.iter().enumerate() {
        for (name, v) in [("a_q", ax.a_q), ("a_p", ax.a_p), ("b_q", ax.b_q), ("b_p", ax.b_p)] {
            table.push(vec![Cell::U(j), Cell::S(name.into()), Cell::F(v)]);
        }
        axes.push(json!({ "axis": j, "a_q": ax.a_q, "a_p": ax.a_p, "b_q": ax.b_q, "b_p": ax.b_p }));
    }
    let kernel = report.kernel.as_ref().map(|k| {
        json!({ "max_angle": k.max_angle, "pass": k.pass, "null_dim": k.null_dim, "range_dim": k.range_dim })
    });
    if let Some(k) = &report.kernel {
        table.push(vec![Cell::Empty, Cell::S("kernel_angle".into()), Cell::F(k.max_angle)]);
    }
    table.push(vec![Cell::Empty, Cell::S("ehrenfest_gap".into()), Cell::F(ehr.gap)]);
    let pairs = |v: &[(f64, f64)]| v.iter().map(|&(q, p)| json!({ "q": q, "p": p })).collect::<Vec<_>>();
    let result = json!({
        "mk2": rep.primal_value,
        "gap": rep.gap,
        "axes": axes,
        "kernel": kernel,
        "ehrenfest": {
            "gap": ehr.gap,
            "left_mean": pairs(&ehr.lhs),
            "left_transported": pairs(&ehr.rhs),
            "right_mean": pairs(&ehr.lhs_right),
            "right_transported": pairs(&ehr.rhs_right),
        },
    });
    Ok(Payload { result, table, converged: rep.converged, warnings: l.warnings })
}

fn sorted_unique(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

struct SweepRow {
    cells: Vec<Cell>,
    converged: bool,
}

fn bipartite_sweep(common: &CommonArgs, a: &[f64], b: &[f64]) -> CliResult<Payload> {
    let hbars = if common.hbar.is_empty() { vec![1.0] } else { sorted_unique(&common.hbar) };
    let mut params = Vec::new();
    for &x in &sorted_unique(a) {
        for &y in &sorted_unique(b) {
            for &h in &hbars {
                params.push((x, y, h));
            }
        }
    }
    let opts = solver_options(common);
    let rows: Vec<CliResult<SweepRow>> = params
        .par_iter()
        .map(|&(x, y, h)| -> CliResult<SweepRow> {
            let inst = BipartiteInstance::new(x, y, h)?;
            let n = match common.cutoff {
                Some(n) => n,
                None => choose_cutoff(&[(vec![x], vec![0.0]), (vec![y], vec![0.0])], h, DEFAULT_TAIL_TOL),
            };
            let space = FockSpace::new(h, n, 1)?;
            let lifted = inst.lift_to_fock(&space, DEFAULT_TAIL_TOL)?;
            let (_, rep) = quantum_mk2(&lifted.r, &lifted.s, &opts)?;
            let f = to_complex(&inst.coupling_matrix());
            let k_p = y * inst.mu / (x * inst.lambda);
            let (rq, rp) = scaled_transport_residuals(&f, &inst.left_operators(), &inst.right_operators(), 0, y / x, k_p)?;
            let oracle = inst.mk2_value();
            Ok(SweepRow {
                cells: vec![
                    Cell::F(x),
                    Cell::F(y),
                    Cell::F(h),
                    Cell::F(oracle),
                    Cell::F(rep.primal_value),
                    Cell::F(rep.gap),
                    Cell::F(rq),
                    Cell::F(rp),
                ],
                converged: rep.converged,
            })
        })
        .collect();
    let mut table = Table::new(vec!["a", "b", "hbar", "mk2_oracle", "mk2_solver", "gap", "residual_oufder_q", "residual_oufder_p"]);
    let mut converged = true;
    for row in rows {
        let row = row?;
        converged &= row.converged;
        table.push(row.cells);
    }
    Ok(Payload::from_table(table, converged))
}

fn toeplitz_check(common: &CommonArgs, texts: &[String]) -> CliResult<Payload> {
    if texts.is_empty() {
        return Err(CliError::Usage("this command needs --input".into()));
    }
    let base = DensitySpec::from_json(&texts[0])?;
    if base.kind != DensityKind::CoherentMixture {
        return Err(QmkError::InvalidDensity("toeplitz-check needs a coherent mixture".into()).into());
    }
    let hbars = if common.hbar.is_empty() { vec![base.hbar] } else { sorted_unique(&common.hbar) };
    let opts = solver_options(common);
    let rows: Vec<CliResult<(Vec<Cell>, bool, Vec<String>)>> = hbars
        .par_iter()
        .map(|&h| {
            let mut spec = base.clone();
            spec.hbar = h;
            let (rhos, warnings) = quantize(std::slice::from_ref(&spec), common.cutoff)?;
            let r = &rhos[0];
            let (_, rep) = quantum_mk2(r, r, &opts)?;
            let expected = 2.0 * spec.d as f64 * h;
            let cells = vec![
                Cell::F(h),
                Cell::U(spec.d),
                Cell::F(rep.primal_value),
                Cell::F(expected),
                Cell::F(rep.primal_value - expected),
            ];
            Ok((cells, rep.converged, warnings))
        })
        .collect();
    let mut table = Table::new(vec!["hbar", "d", "mk2", "expected", "delta"]);
    let mut converged = true;
    let mut warnings = Vec::new();
    for row in rows {
        let (cells, ok, w) = row?;
        converged &= ok;
        warnings.extend(w);
        table.push(cells);
    }
    let mut payload = Payload::from_table(table, converged);
    payload.warnings = warnings;
    Ok(payload)
}

fn classical(common: &CommonArgs, texts: &[String]) -> CliResult<Payload> {
    let specs = parse_specs(common, texts, 2)?;
    if specs.iter().any(|s| s.kind != DensityKind::CoherentMixture) {
        return Err(QmkError::InvalidDensity("classical needs two coherent mixtures".into()).into());
    }
    let measures: Vec<PhaseSpaceMeasure<f64>> = specs.iter().map(|s| s.measure()).collect::<qmk::Result<_>>()?;
    let (hbar, d) = (specs[0].hbar, specs[0].d);
    let (n, tail_tol, mut warnings) = match common.cutoff {
        Some(n) => {
            let (_, w) = quantize(&specs, Some(n))?;
            (n, f64::INFINITY, w)
        }
        None => {
            let n = measures.iter().map(|m| m.auto_cutoff(hbar, DEFAULT_TAIL_TOL)).max().unwrap_or(1);
            (n, DEFAULT_TAIL_TOL, vec![])
        }
    };
    let space = FockSpace::new(hbar, n, d)?;
    let plan = solve_discrete_mk2(&measures[0], &measures[1])?;
    let gap = semiclassical_gap(&measures[0], &measures[1], &space, tail_tol, &solver_options(common))?;
    if gap.bound_slack < -1e-8 {
        warnings.push(format!("semiclassical bound violated by {:e}", -gap.bound_slack));
    }
    let mut table = Table::new(vec!["i", "j", "mass"]);
    for (i, row) in plan.matrix.iter().enumerate() {
        for (j, &m) in row.iter().enumerate() {
            table.push(vec![Cell::U(i), Cell::U(j), Cell::F(m)]);
        }
    }
    let result = json!({
        "classical": gap.classical,
        "quantum": gap.quantum,
        "bound_slack": gap.bound_slack,
        "plan": plan.matrix,
        "plan_cost": plan.cost,
        "iterations": gap.iterations,
        "cutoff": n,
        "hbar": hbar,
    });
    Ok(Payload { result, table, converged: gap.converged, warnings })
}

fn spectrum(common: &CommonArgs, dim: usize) -> CliResult<Payload> {
    let hbar = match common.hbar.as_slice() {
        [] => 1.0,
        [h] => *h,
        _ => return Err(CliError::Usage("spectrum takes a single --hbar value".into())),
    };
    let space = FockSpace::new(hbar, common.cutoff.unwrap_or(8), dim)?;
    let cost = build_cost(&space)?;
    let mut table = Table::new(vec!["value", "total_quanta", "enclosed", "relative_quanta", "expected"]);
    for e in labelled_spectrum(&cost) {
        table.push(vec![
            Cell::F(e.value),
            Cell::U(e.total_quanta),
            Cell::B(e.enclosed),
            e.relative_quanta.map_or(Cell::Empty, Cell::U),
            e.expected.map_or(Cell::Empty, Cell::F),
        ]);
    }
    Ok(Payload::from_table(table, true))
}
