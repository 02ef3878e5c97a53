use nalgebra::DMatrix;
use proptest::prelude::*;
use tilted_sdp::{solve, LinearFunctional, SdpError, SdpProblem, Sense, SolverOptions, Status};

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn forced_trace_minimum() {
    // min tr(X) s.t. X_11 = 1, X ⪰ 0 (2x2).
    let mut p = SdpProblem::new(vec![2], Sense::Minimize);
    p.set_objective(LinearFunctional::new().with(0, 0, 0, 1.0).with(0, 1, 1, 1.0));
    p.add_constraint(LinearFunctional::new().with(0, 0, 0, 1.0), 1.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-8);
    let x = &sol.primal[0];
    assert!((x[(0, 0)] - 1.0).abs() < 1e-8);
    assert!(x[(1, 1)].abs() < 1e-8);
    assert!(x[(0, 1)].abs() < 1e-8);
    assert!(sol.primal_residual < 1e-8);
    assert!(sol.gap < 1e-7);
}

#[test]
fn maximize_off_diagonal_of_correlation_matrix() {
    // max X_12 with unit diagonal: optimum 1 at the all-ones matrix.
    let mut p = SdpProblem::new(vec![2], Sense::Maximize);
    p.set_objective(LinearFunctional::new().with(0, 0, 1, 1.0));
    p.add_constraint(LinearFunctional::new().with(0, 0, 0, 1.0), 1.0);
    p.add_constraint(LinearFunctional::new().with(0, 1, 1, 1.0), 1.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-7, "{}", sol.objective);
    // Maximization: the dual bounds the primal from above.
    assert!(sol.dual_objective >= sol.objective - 1e-9);
    let dual_value: f64 = sol.dual.iter().sum();
    assert!((dual_value - sol.dual_objective).abs() < 1e-9);
}

/// Hand-built level-1 moment matrix for CHSH over {I, A0, A1, B0, B1}.
fn chsh_level1() -> SdpProblem {
    let mut p = SdpProblem::new(vec![5], Sense::Maximize);
    // A0B0 + A0B1 + A1B0 - A1B1, entries (A_x, B_y) at rows 1,2 and cols 3,4.
    p.set_objective(
        LinearFunctional::new()
            .with(0, 1, 3, 1.0)
            .with(0, 1, 4, 1.0)
            .with(0, 2, 3, 1.0)
            .with(0, 2, 4, -1.0),
    );
    for i in 0..5 {
        p.add_constraint(LinearFunctional::new().with(0, i, i, 1.0), 1.0);
    }
    p
}

#[test]
fn chsh_level_one_reaches_tsirelson() {
    let sol = solve(&chsh_level1(), &opts()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!(
        (sol.objective - 2.0 * 2f64.sqrt()).abs() < 1e-6,
        "{}",
        sol.objective
    );
}

#[test]
fn multiple_blocks_behave_like_independent_cones() {
    // Two 1x1 blocks: min x + 2y s.t. x + y = 1 → x = 1, y = 0.
    let mut p = SdpProblem::new(vec![1, 1], Sense::Minimize);
    p.set_objective(LinearFunctional::new().with(0, 0, 0, 1.0).with(1, 0, 0, 2.0));
    p.add_constraint(LinearFunctional::new().with(0, 0, 0, 1.0).with(1, 0, 0, 1.0), 1.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-8);
    assert!((sol.primal[0][(0, 0)] - 1.0).abs() < 1e-7);
}

#[test]
fn negative_diagonal_is_infeasible() {
    let mut p = SdpProblem::new(vec![2], Sense::Minimize);
    p.set_objective(LinearFunctional::new().with(0, 0, 1, 1.0));
    p.add_constraint(LinearFunctional::new().with(0, 0, 0, 1.0), -1.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
}

#[test]
fn dependent_rows_are_dropped_or_flagged() {
    let row = || LinearFunctional::new().with(0, 0, 0, 1.0).with(0, 0, 1, 1.0);
    let mut p = SdpProblem::new(vec![2], Sense::Minimize);
    p.set_objective(LinearFunctional::new().with(0, 0, 0, 1.0).with(0, 1, 1, 1.0));
    p.add_constraint(row(), 1.0);
    p.add_constraint(LinearFunctional::new().with(0, 1, 1, 1.0), 1.0);
    // Twice the first row, consistent right-hand side.
    p.add_constraint(
        LinearFunctional::new().with(0, 0, 0, 2.0).with(0, 1, 0, 2.0),
        2.0,
    );
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.dropped_constraints, vec![2]);
    assert_eq!(sol.status, Status::Optimal);
    assert_eq!(sol.dual[2], 0.0);

    p.constraints[2].rhs = 3.0;
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
}

#[test]
fn construction_errors() {
    let mut p = SdpProblem::new(vec![2], Sense::Minimize);
    p.add_constraint(LinearFunctional::new().with(0, 0, 2, 1.0), 1.0);
    assert!(matches!(
        solve(&p, &opts()),
        Err(SdpError::EntryOutOfRange { block: 0, .. })
    ));

    let p = SdpProblem::new(vec![], Sense::Minimize);
    assert_eq!(solve(&p, &opts()).unwrap_err(), SdpError::NoBlocks);

    let p = SdpProblem::new(vec![129], Sense::Minimize);
    assert!(matches!(
        solve(&p, &opts()),
        Err(SdpError::BlockDimension { dim: 129, .. })
    ));

    let mut p = SdpProblem::new(vec![1], Sense::Minimize);
    p.set_objective(LinearFunctional::new().with(1, 0, 0, 1.0));
    assert!(matches!(
        solve(&p, &opts()),
        Err(SdpError::EntryOutOfRange { block: 1, .. })
    ));
}

#[test]
fn lower_triangle_entries_are_folded_onto_upper() {
    let f = LinearFunctional::new().with(0, 3, 1, 2.0);
    assert_eq!((f.entries[0].row, f.entries[0].col), (1, 3));
}

#[test]
fn interchange_round_trip() {
    let p = chsh_level1();
    let text = p.to_json();
    let back = SdpProblem::from_json(&text).unwrap();
    assert_eq!(back, p);
    assert!(text.contains("\"sense\": \"maximize\""));

    let sol = solve(&p, &opts()).unwrap();
    let again = tilted_sdp::SdpSolution::from_json(&sol.to_json()).unwrap();
    assert_eq!(again.status, sol.status);
    assert_eq!(again.primal[0], sol.primal[0]);

    assert!(matches!(
        SdpProblem::from_json("{\"blocks\": [2]}"),
        Err(SdpError::Interchange(_))
    ));
}

#[test]
fn solves_are_bitwise_reproducible() {
    let a = solve(&chsh_level1(), &opts()).unwrap();
    let b = solve(&chsh_level1(), &opts()).unwrap();
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.primal, b.primal);
    assert_eq!(a.dual, b.dual);
    assert_eq!(a.history, b.history);
}

#[test]
fn kkt_residuals_below_tolerance_at_optimum() {
    let sol = solve(&chsh_level1(), &SolverOptions { tol: 1e-10, max_iter: 100 }).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!(sol.primal_residual <= 1e-10);
    assert!(sol.dual_residual <= 1e-10);
    assert!(sol.gap <= 1e-10);
    let min_eig = |m: &DMatrix<f64>| {
        m.clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    assert!(min_eig(&sol.primal[0]) > -1e-12);
    assert!(min_eig(&sol.dual_slack[0]) > -1e-12);
}

/// Weak duality up to the infeasibility of the iterate: for a minimization,
/// `p - d = <X, Z> + <R_d, X> - y·r_p`, so `d <= p + slack` at every iterate
/// and `d <= p` once both residuals vanish.
fn assert_weak_duality(sol: &tilted_sdp::SdpSolution, sense: Sense) {
    for (k, rec) in sol.history.iter().enumerate() {
        let (lo, hi) = match sense {
            Sense::Minimize => (rec.dual_objective, rec.primal_objective),
            Sense::Maximize => (rec.primal_objective, rec.dual_objective),
        };
        assert!(
            lo <= hi + rec.infeasibility_slack + 1e-9,
            "iterate {k}: {lo} > {hi} + {}",
            rec.infeasibility_slack
        );
        if rec.infeasibility_slack < 1e-12 {
            assert!(lo <= hi + 1e-9, "feasible iterate {k}: {lo} > {hi}");
        }
    }
}

#[test]
fn weak_duality_along_the_path() {
    let sol = solve(&chsh_level1(), &opts()).unwrap();
    assert_weak_duality(&sol, Sense::Maximize);
    let last = sol.history.last().unwrap();
    assert!(last.primal_objective <= last.dual_objective + 1e-9);
}

fn random_problem(n: usize, m: usize, seed: &[f64]) -> SdpProblem {
    // Feasible by construction: b = A(X0) with X0 = I + small symmetric
    // perturbation; bounded because C = I + (small) is positive definite.
    let mut it = seed.iter().cycle().copied();
    let mut p = SdpProblem::new(vec![n], Sense::Minimize);
    let mut obj = LinearFunctional::new();
    for i in 0..n {
        for j in i..n {
            let v = it.next().unwrap() * 0.2;
            obj.add(0, i, j, if i == j { 1.0 + v.abs() } else { v });
        }
    }
    p.set_objective(obj);
    let x0 = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.1 / (1 + i + j) as f64 });
    for _ in 0..m {
        let mut f = LinearFunctional::new();
        for i in 0..n {
            for j in i..n {
                f.add(0, i, j, it.next().unwrap());
            }
        }
        let rhs = f.evaluate(std::slice::from_ref(&x0));
        p.add_constraint(f, rhs);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_feasible_problems_close_the_gap(
        n in 2usize..6,
        m in 1usize..5,
        seed in proptest::collection::vec(-1.0f64..1.0, 40),
    ) {
        let p = random_problem(n, m, &seed);
        let sol = solve(&p, &opts()).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
        prop_assert!(sol.gap < 1e-7);
        prop_assert!(sol.primal_residual < 1e-8);
        assert_weak_duality(&sol, Sense::Minimize);
        let last = sol.history.last().unwrap();
        prop_assert!(last.dual_objective <= last.primal_objective + 1e-9);
    }
}
