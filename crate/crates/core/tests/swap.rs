use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tilted_core::bell::reference_cases;
use tilted_core::qsim::{
    ideal_realization, random_realization, verify_selftest_relations, white_noise_realization,
};
use tilted_core::swap::{apply_isometry, fidelity_objective_symbolic};

#[test]
fn self_test_relations_hold_at_ideal_points() {
    for case in reference_cases() {
        let r = ideal_realization(case.theta, case.mu).unwrap();
        let rep = verify_selftest_relations(&r, &case.family, 1e-9).unwrap();
        assert!(rep.zz_residual < 1e-10, "{}", case.name);
        assert!(rep.xx_residual < 1e-10, "{}", case.name);
        assert!(rep.flag().is_none());
        let f = apply_isometry(&r, case.mu).unwrap().fidelity(case.theta);
        assert!((f - 1.0).abs() < 1e-10);
    }
}

#[test]
fn noisy_state_is_flagged() {
    let case = &reference_cases()[1];
    let r = white_noise_realization(case.theta, case.mu, 0.8).unwrap();
    let rep = verify_selftest_relations(&r, &case.family, 1e-9).unwrap();
    assert!(rep.flag().is_some());
}

#[test]
fn symbolic_and_numeric_fidelity_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in reference_cases() {
        let f = fidelity_objective_symbolic(case.theta, case.mu).unwrap();
        let ideal = ideal_realization(case.theta, case.mu).unwrap();
        assert!((ideal.expectation(&f) - 1.0).abs() < 1e-10);
        for _ in 0..20 {
            let r = random_realization(&mut rng, (2, 2));
            let out = apply_isometry(&r, case.mu).unwrap();
            let numeric = out.fidelity(case.theta);
            assert!((r.expectation(&f) - numeric).abs() < 1e-10);

            let rho = &out.rho_swap;
            assert!((rho - rho.adjoint()).camax() < 1e-12);
            let herm: DMatrix<f64> = DMatrix::from_fn(8, 8, |i, j| {
                let (bi, bj) = (i / 4, j / 4);
                let z = rho[(i % 4, j % 4)];
                match (bi, bj) {
                    (0, 0) | (1, 1) => z.re,
                    (0, 1) => -z.im,
                    _ => z.im,
                }
            });
            let min = herm.symmetric_eigenvalues().min();
            assert!(min > -1e-10, "min eigenvalue {min}");
        }
    }
}
