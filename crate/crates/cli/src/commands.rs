use serde_json::{json, Value};
use tilted_core::bell::{
    application_params, bound_curve as curve, chsh_case, curve_to_csv, params_from_state,
    reference_cases, Protocol, ReferenceCase,
};
use tilted_core::npa::{
    fidelity_csv, randomness_csv, randomness_sweep, FidelityProblem, NpaOptions,
    ViolationConstraint, ACCEPT_GAP, ACCEPT_RESIDUAL, BOUNDARY_BACKOFF,
};
use tilted_core::qsim::{behavior_of, ideal_realization, verify_selftest_relations, white_noise_realization};
use tilted_core::sos::{build_certificate, SosCertificate, Variant};
use tilted_core::swap::apply_isometry;
use tilted_core::{parse_rational, BellFamily, Rational, Scalar};

use crate::args::{
    AppArgs, BoundsArgs, CaseArg, CurveArgs, Global, Mode, ProtocolArg, SimulateArgs, SosArgs,
    SweepArgs, VariantArg,
};
use crate::error::CliError;
use crate::output::{self, num};

const DEFAULT_TOL: f64 = 1e-9;
const DEFAULT_POINTS: usize = 11;

fn required<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, CliError> {
    v.clone().ok_or_else(|| CliError::Invalid(format!("missing --{flag}")))
}

fn tol(global: &mut Global) -> f64 {
    *global.tol.get_or_insert(DEFAULT_TOL)
}

fn angle_or_null(r: Result<f64, tilted_core::BellError>) -> Value {
    r.map(num).unwrap_or(Value::Null)
}

pub fn bounds(global: &Global, a: BoundsArgs) -> Result<(), CliError> {
    let fam = BellFamily::new(required(&a.alpha, "alpha")?, required(&a.beta, "beta")?)?;
    let result = json!({
        "classical": fam.classical_bound(),
        "quantum": fam.quantum_bound_f64(),
        "theta": angle_or_null(fam.theta()),
        "mu": angle_or_null(fam.mu()),
        "boundary": fam.is_boundary(),
    });
    output::json(global, output::metadata("bounds", global, &a, json!({})), result)
}

fn check_certificates<T: Scalar>(
    fam: &BellFamily<T>,
    variants: &[Variant],
    corrupt: bool,
    tol: f64,
) -> Result<(Vec<Value>, bool), CliError> {
    let mut reports = Vec::new();
    let mut all_pass = true;
    for &v in variants {
        let mut cert: SosCertificate<T> = build_certificate(fam, v)?;
        if corrupt {
            if let Some(t) = cert.terms.first_mut() {
                t.scale = t.scale.clone() + T::from_ratio(1, 1000);
            }
        }
        let pass = cert.passes(tol);
        all_pass &= pass;
        let mut report = cert.report();
        report["pass"] = json!(pass);
        reports.push(report);
    }
    Ok((reports, all_pass))
}

pub fn sos_verify(global: &Global, mut a: SosArgs) -> Result<(), CliError> {
    let mut global = global.clone();
    let tol = *global.tol.get_or_insert(1e-10);
    let mode = *a.mode.get_or_insert(Mode::Exact);
    let variant = *a.variant.get_or_insert(VariantArg::Both);
    let corrupt = *a.corrupt.get_or_insert(false);
    let variants: &[Variant] = match variant {
        VariantArg::Sos1 => &[Variant::Sos1],
        VariantArg::Sos2 => &[Variant::Sos2],
        VariantArg::Both => &[Variant::Sos1, Variant::Sos2],
    };
    let (alpha, beta) = (required(&a.alpha, "alpha")?, required(&a.beta, "beta")?);
    let parse = |s: &str| {
        parse_rational(s).ok_or_else(|| CliError::Invalid(format!("cannot parse {s:?} as a number")))
    };
    let (qa, qb): (Rational, Rational) = (parse(&alpha)?, parse(&beta)?);
    let (reports, pass) = match mode {
        Mode::Exact => check_certificates(&BellFamily::new(qa, qb)?, variants, corrupt, tol)?,
        Mode::Float => {
            let fam = BellFamily::new(qa.to_f64_lossy(), qb.to_f64_lossy())?;
            check_certificates(&fam, variants, corrupt, tol)?
        }
    };
    let meta = output::metadata("sos-verify", &global, &a, json!({}));
    output::json(&global, meta, json!({ "pass": pass, "certificates": reports }))?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed("certificate residual does not vanish".into()))
    }
}

pub fn simulate(global: &Global, mut a: SimulateArgs) -> Result<(), CliError> {
    let (theta, mu) = (required(&a.theta, "theta")?, required(&a.mu, "mu")?);
    let v = *a.visibility.get_or_insert(1.0);
    let fam = params_from_state(theta, mu)?;
    let r = if v == 1.0 {
        ideal_realization(theta, mu)?
    } else {
        white_noise_realization(theta, mu, v)?
    };
    let behavior = behavior_of(&r);
    behavior
        .check(1e-10)
        .map_err(|e| CliError::Failed(format!("behavior check failed: {e}")))?;
    let report = verify_selftest_relations(&r, &fam, 1e-9)?;
    let fidelity = apply_isometry(&r, mu)?.fidelity(theta);
    let result = json!({
        "alpha": fam.alpha_f64(),
        "beta": fam.beta_f64(),
        "classical": fam.classical_bound(),
        "quantum": fam.quantum_bound_f64(),
        "bell_value": behavior.bell_value(&fam),
        "swap_fidelity": fidelity,
        "selftest": report,
        "behavior": behavior,
    });
    output::json(global, output::metadata("simulate", global, &a, json!({})), result)
}

fn case_of(c: CaseArg) -> ReferenceCase {
    match c {
        CaseArg::Case0 => reference_cases()[0].clone(),
        CaseArg::Case1 => reference_cases()[1].clone(),
        CaseArg::Case2 => reference_cases()[2].clone(),
        CaseArg::Chsh => chsh_case(),
    }
}

struct SweepSetup {
    family: BellFamily<f64>,
    theta: f64,
    mu: f64,
    grid: Vec<f64>,
    opts: NpaOptions,
}

fn sweep_setup(global: &mut Global, a: &mut SweepArgs) -> Result<SweepSetup, CliError> {
    let (theta, mu, derived) = match a.case {
        Some(c) => {
            let rc = case_of(c);
            (rc.theta, rc.mu, rc.family)
        }
        None => {
            let (t, m) = (required(&a.theta, "theta (or --case)")?, required(&a.mu, "mu (or --case)")?);
            (t, m, params_from_state(t, m)?)
        }
    };
    let family = match (a.alpha, a.beta) {
        (Some(al), Some(be)) => BellFamily::new(al, be)?,
        (None, None) => derived,
        _ => return Err(CliError::Invalid("give both --alpha and --beta or neither".into())),
    };
    a.theta = Some(theta);
    a.mu = Some(mu);
    a.alpha = Some(family.alpha_f64());
    a.beta = Some(family.beta_f64());
    let grid = match &a.grid {
        Some(g) => g.clone(),
        None => {
            let n = *a.points.get_or_insert(DEFAULT_POINTS);
            match n {
                0 => Vec::new(),
                1 => vec![1.0],
                _ => (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
            }
        }
    };
    if let Some(v) = grid.iter().find(|v| !v.is_finite() || **v > 1.0) {
        return Err(CliError::Invalid(format!("normalized violation {v} must be finite and at most 1")));
    }
    let constraint = if *a.inequality.get_or_insert(false) {
        ViolationConstraint::AtLeast
    } else {
        ViolationConstraint::Equal
    };
    let opts = NpaOptions {
        tol: tol(global),
        constraint,
        ..NpaOptions::default()
    };
    Ok(SweepSetup {
        family,
        theta,
        mu,
        grid,
        opts,
    })
}

fn solver_meta(s: &SweepSetup) -> Value {
    json!({
        "solver": {
            "tol": s.opts.tol,
            "max_iter": s.opts.max_iter,
            "accept_residual": ACCEPT_RESIDUAL,
            "accept_gap": ACCEPT_GAP,
            "boundary_backoff": BOUNDARY_BACKOFF,
            "constraint": s.opts.constraint,
        },
        "classical_bound": s.family.classical_bound(),
        "quantum_bound": s.family.quantum_bound_f64(),
    })
}

pub fn robustness(global: &Global, mut a: SweepArgs) -> Result<(), CliError> {
    let mut global = global.clone();
    a.input = None;
    let s = sweep_setup(&mut global, &mut a)?;
    let problem = FidelityProblem::new(&s.family, s.theta, s.mu)?;
    let points = tilted_core::npa::robustness_sweep(&s.family, s.theta, s.mu, &s.grid, &s.opts)?;
    let mut extra = solver_meta(&s);
    extra["basis"] = json!(problem.structure.basis.monomials());
    extra["basis_size"] = json!(problem.structure.basis.len());
    let meta = output::metadata("robustness", &global, &a, extra);
    output::csv(&global, meta, &fidelity_csv(&points))
}

pub fn randomness(global: &Global, mut a: SweepArgs) -> Result<(), CliError> {
    let mut global = global.clone();
    let input = a.input.get_or_insert_with(|| vec![0, 0]).clone();
    if input.len() != 2 || input.iter().any(|&i| i > 1) {
        return Err(CliError::Invalid("--input must be x,y with x, y ∈ {0, 1}".into()));
    }
    let s = sweep_setup(&mut global, &mut a)?;
    let points = randomness_sweep(&s.family, (input[0], input[1]), &s.grid, &s.opts)?;
    let mut extra = solver_meta(&s);
    let basis = tilted_core::npa::MomentBasis::local1();
    extra["basis"] = json!(basis.monomials());
    extra["basis_size"] = json!(basis.len());
    let meta = output::metadata("randomness", &global, &a, extra);
    output::csv(&global, meta, &randomness_csv(&points))
}

pub fn bound_curve(global: &Global, mut a: CurveArgs) -> Result<(), CliError> {
    let mu = match (a.mu, a.tan_mu) {
        (Some(m), None) => m,
        (None, Some(t)) => t.atan(),
        (None, None) => {
            a.tan_mu = Some(0.75);
            0.75f64.atan()
        }
        (Some(_), Some(_)) => return Err(CliError::Invalid("give --mu or --tan-mu, not both".into())),
    };
    if !(mu.is_finite() && mu > 0.0 && mu < std::f64::consts::FRAC_PI_2) {
        return Err(CliError::Invalid(format!("μ = {mu} must lie in (0, π/2)")));
    }
    let betas = match &a.betas {
        Some(b) => b.clone(),
        None => {
            let lo = *a.beta_min.get_or_insert(0.0);
            let hi = *a.beta_max.get_or_insert(1.2);
            let n = *a.points.get_or_insert(25);
            match n {
                0 => Vec::new(),
                1 => vec![lo],
                _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
            }
        }
    };
    if let Some(b) = betas.iter().find(|b| !b.is_finite() || **b < 0.0) {
        return Err(CliError::Invalid(format!("β = {b} must be finite and non-negative")));
    }
    let meta = output::metadata("bound-curve", global, &a, json!({ "mu": mu }));
    output::csv(global, meta, &curve_to_csv(&curve(mu, &betas)))
}

pub fn app_params(global: &Global, mut a: AppArgs) -> Result<(), CliError> {
    let theta = required(&a.theta, "theta")?;
    let protocol = match *a.protocol.get_or_insert(ProtocolArg::Qkd) {
        ProtocolArg::Qkd => Protocol::Qkd,
        ProtocolArg::Qpq => Protocol::Qpq,
    };
    let fam = application_params(theta, protocol)?;
    let result = json!({
        "protocol": protocol,
        "alpha": fam.alpha_f64(),
        "beta": fam.beta_f64(),
        "classical": fam.classical_bound(),
        "quantum": fam.quantum_bound_f64(),
        "mu": angle_or_null(fam.mu()),
    });
    output::json(global, output::metadata("app-params", global, &a, json!({})), result)
}
