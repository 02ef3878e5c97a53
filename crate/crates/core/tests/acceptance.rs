//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tilted_core::bell::{bound_curve, chsh_case, reference_cases, standard_tilted};
use tilted_core::npa::{
    observed_from_normalized, randomness_bound, robustness_sweep, FidelityProblem, NpaOptions,
};
use tilted_core::qsim::{
    ideal_realization, maximize_violation, random_realization, verify_selftest_relations,
    SeeSawOptions,
};
use tilted_core::sos::{build_certificate, verify_certificate, Variant};
use tilted_core::swap::{apply_isometry, fidelity_objective_symbolic};
use tilted_core::{parse_rational, BellFamily, ExactFamily, Rational};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64())
    })
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for a in ["1", "6/5", "4/3", "3/2", "7/4"] {
        for b in ["0", "1/4", "1/2", "1"] {
            let (a, b) = (parse_rational(a).unwrap(), parse_rational(b).unwrap());
            let fam = ExactFamily::new(a.clone(), b.clone()).map_err(|e| e.to_string())?;
            let two = Rational::from_integer(2.into());
            ensure(fam.classical_bound_enumerated() == two * a + b, || {
                format!("classical bound mismatch at {fam:?}")
            })?;
            let ffam = fam.to_f64();
            let v = maximize_violation(&ffam, (2, 2), &SeeSawOptions::default())
                .map_err(|e| e.to_string())?
                .value;
            worst = worst.max((v - ffam.quantum_bound_f64()).abs());
            count += 1;
        }
    }
    ensure(worst < 1e-8, || format!("see-saw deviation {worst:.2e}"))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!("{count} points, max |see-saw − η| = {worst:.1e}"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    for (a, b) in [("4/3", "3/2"), ("4/3", "0")] {
        let fam = ExactFamily::new(parse_rational(a).unwrap(), parse_rational(b).unwrap())
            .map_err(|e| e.to_string())?;
        for v in [Variant::Sos1, Variant::Sos2] {
            let cert = build_certificate(&fam, v).map_err(|e| e.to_string())?;
            ensure(verify_certificate(&cert).is_zero(), || format!("({a}, {b}) {v:?} residual nonzero"))?;
        }
    }
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let alpha = 1.0 + 2.0 * (k % 10) as f64 / 9.0;
        let beta = (2.0 / alpha) * (k / 10) as f64 / 5.0 * 0.98;
        let fam = BellFamily::new(alpha, beta).map_err(|e| e.to_string())?;
        for v in [Variant::Sos1, Variant::Sos2] {
            let cert = build_certificate(&fam, v).map_err(|e| e.to_string())?;
            worst = worst.max(verify_certificate(&cert).max_abs_coefficient());
        }
    }
    ensure(worst < 1e-10, || format!("float residual {worst:.2e}"))?;
    within(start.elapsed(), 30.0)?;
    Ok(format!("exact residuals zero, 50-point float max {worst:.1e}"))
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in reference_cases() {
        let r = ideal_realization(case.theta, case.mu).map_err(|e| e.to_string())?;
        let rep = verify_selftest_relations(&r, &case.family, 1e-9).map_err(|e| e.to_string())?;
        let f = apply_isometry(&r, case.mu).map_err(|e| e.to_string())?.fidelity(case.theta);
        worst = worst.max(rep.zz_residual).max(rep.xx_residual).max((f - 1.0).abs());
    }
    ensure(worst < 1e-10, || format!("residual {worst:.2e}"))?;
    Ok(format!("max residual {worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in reference_cases() {
        let f = fidelity_objective_symbolic(case.theta, case.mu).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let r = random_realization(&mut rng, (2, 2));
            let numeric = apply_isometry(&r, case.mu).map_err(|e| e.to_string())?.fidelity(case.theta);
            worst = worst.max((r.expectation(&f) - numeric).abs());
        }
    }
    ensure(worst < 1e-10, || format!("disagreement {worst:.2e}"))?;
    Ok(format!("20 realizations per case, max gap {worst:.1e}"))
}

fn criterion_5() -> Outcome {
    let opts = NpaOptions::default();
    let chsh = chsh_case();
    let cases = reference_cases();
    let mut parts = Vec::new();
    for (case, want, tol) in [
        (&chsh, 1.2283, 0.005),
        (&cases[0], 1.1519, 0.005),
        (&cases[1], 0.4195, 0.01),
        (&cases[2], 0.5669, 0.01),
    ] {
        let start = Instant::now();
        let eta = case.family.quantum_bound_f64();
        let h = randomness_bound(&case.family, eta, (0, 0), &opts)
            .map_err(|e| format!("{}: {e}", case.name))?
            .entropy_bits;
        ensure((h - want).abs() <= tol, || format!("{}: H = {h:.4}, want {want} ± {tol}", case.name))?;
        // Four solves per bound.
        within(start.elapsed() / 4, 5.0)?;
        parts.push(format!("{} {h:.4}", case.name));
    }
    Ok(parts.join(", "))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let opts = NpaOptions::default();
    let grid: Vec<f64> = (0..10).map(|k| k as f64 / 9.0).collect();
    let mut last = Vec::new();
    for case in reference_cases() {
        let pts = robustness_sweep(&case.family, case.theta, case.mu, &grid, &opts)
            .map_err(|e| format!("{}: {e}", case.name))?;
        for w in pts.windows(2) {
            ensure(w[1].result >= w[0].result - 1e-7, || {
                format!("{}: not monotone at V = {}", case.name, w[1].normalized)
            })?;
        }
        let top = pts.last().unwrap().result;
        ensure(top >= 0.999, || format!("{}: fidelity {top} at V = 1", case.name))?;
        last.push(top);
    }
    let case = &reference_cases()[2];
    let gen = FidelityProblem::new(&case.family, case.theta, case.mu)
        .and_then(|p| p.solve(observed_from_normalized(&case.family, 0.95), &opts))
        .map_err(|e| e.to_string())?;
    let (fam, mu) = standard_tilted(case.theta).map_err(|e| e.to_string())?;
    let std = FidelityProblem::new(&fam, case.theta, mu)
        .and_then(|p| p.solve(observed_from_normalized(&fam, 0.95), &opts))
        .map_err(|e| e.to_string())?;
    ensure(gen > std, || format!("case2 generalized {gen} ≤ standard {std}"))?;
    within(start.elapsed(), 300.0)?;
    Ok(format!(
        "F(V=1) = {:.5}/{:.5}/{:.5}; case2 at V=0.95: {gen:.4} > {std:.4}",
        last[0], last[1], last[2]
    ))
}

fn criterion_7() -> Outcome {
    let mu = 0.75f64.atan();
    let grid: Vec<f64> = (0..25).map(|k| 1.2 * k as f64 / 24.0).collect();
    let rows = bound_curve(mu, &grid);
    let feasible = rows.iter().filter(|r| r.feasible()).count();
    for r in rows.iter().filter(|r| r.feasible()) {
        ensure(r.classical.unwrap() < r.quantum.unwrap(), || format!("C ≥ η at β = {}", r.beta))?;
    }
    let mut worst: f64 = 0.0;
    for case in reference_cases() {
        let row = bound_curve(mu, &[case.family.beta_f64()])[0];
        worst = worst.max((row.alpha - case.family.alpha_f64()).abs());
    }
    ensure(worst < 1e-9, || format!("reference pair off curve by {worst:.2e}"))?;
    Ok(format!("{feasible}/25 feasible rows with C < η, reference pairs within {worst:.1e}"))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let opts = NpaOptions::default();
    let mut margin = f64::INFINITY;
    for case in reference_cases() {
        let fp = FidelityProblem::new(&case.family, case.theta, case.mu).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let r = random_realization(&mut rng, (2, 2));
            let bound = fp.solve(r.bell_value(&case.family), &opts).map_err(|e| e.to_string())?;
            let actual = apply_isometry(&r, case.mu).map_err(|e| e.to_string())?.fidelity(case.theta);
            ensure(bound <= actual + 1e-7, || format!("{}: bound {bound} > fidelity {actual}", case.name))?;
            margin = margin.min(actual - bound);
        }
    }
    Ok(format!("10 realizations per case, min slack {margin:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 bounds", criterion_1),
        ("2 sos certificates", criterion_2),
        ("3 self-testing relations", criterion_3),
        ("4 symbolic/numeric fidelity", criterion_4),
        ("5 min-entropy at maximal violation", criterion_5),
        ("6 robustness curves", criterion_6),
        ("7 bound curve", criterion_7),
        ("8 relaxation soundness", criterion_8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {name}: {detail} [{:.2}s]", start.elapsed().as_secs_f64());
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
