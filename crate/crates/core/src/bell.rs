//! The generalized tilted-CHSH family
//! `B[α,β] = βA0 + α(A0B0 + A0B1) + A1B0 − A1B1` with `α ≥ 1`, `β ≥ 0`.
//!
//! Its classical bound is `C = 2α + β` and its quantum bound
//! `η = √((4 + β²)(1 + α²))`. The maximal violation self-tests the state
//! `cos θ|00⟩ + sin θ|11⟩` with
//! `sin 2θ = √((4 − α²β²)/(4 + β²))`, measured at angle `tan μ = sin 2θ / α`.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::format::sig12;
use crate::ncpoly::{Letter, NcPolynomial};
use crate::scalar::Scalar;

/// Slack used when a float computation should land exactly on `α = 1`.
const ALPHA_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BellError {
    #[error("α must be ≥ 1 (got {alpha})")]
    AlphaBelowOne { alpha: f64 },
    #[error("β must be ≥ 0 (got {beta})")]
    NegativeBeta { beta: f64 },
    #[error("infeasible parameters: α²β² = {product} exceeds 4")]
    Infeasible { product: f64 },
    #[error("parameters must be finite")]
    NonFinite,
    #[error("αβ = 2 is the product-state boundary: θ and μ are undefined")]
    Boundary,
    #[error("{name} = {value} is outside {range}")]
    InvalidAngle {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("state too weakly entangled for this μ (α = {alpha} < 1)")]
    TooWeaklyEntangled { alpha: f64 },
}

/// One member of the family. Parameters are validated on construction; the
/// boundary `αβ = 2` is admitted, but its angles are undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct BellFamily<T> {
    alpha: T,
    beta: T,
}

impl<T: Scalar> BellFamily<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self, BellError> {
        let (af, bf) = (alpha.to_f64_lossy(), beta.to_f64_lossy());
        if !af.is_finite() || !bf.is_finite() {
            return Err(BellError::NonFinite);
        }
        if alpha < T::one() {
            return Err(BellError::AlphaBelowOne { alpha: af });
        }
        if beta.is_negative() {
            return Err(BellError::NegativeBeta { beta: bf });
        }
        let product = alpha.clone() * alpha.clone() * beta.clone() * beta.clone();
        if product > T::from_ratio(4, 1) {
            return Err(BellError::Infeasible {
                product: product.to_f64_lossy(),
            });
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> &T {
        &self.alpha
    }

    pub fn beta(&self) -> &T {
        &self.beta
    }

    /// `αβ = 2`: the self-tested state degenerates to a product state.
    pub fn is_boundary(&self) -> bool {
        self.alpha.clone() * self.beta.clone() == T::from_ratio(2, 1)
    }

    /// `C = 2α + β`.
    pub fn classical_bound(&self) -> T {
        T::from_ratio(2, 1) * self.alpha.clone() + self.beta.clone()
    }

    /// `η² = (4 + β²)(1 + α²)`.
    pub fn quantum_bound_squared(&self) -> T {
        let four = T::from_ratio(4, 1);
        (four + self.beta.clone() * self.beta.clone())
            * (T::one() + self.alpha.clone() * self.alpha.clone())
    }

    /// `η` in the coefficient type, when it is representable there.
    pub fn quantum_bound(&self) -> Option<T> {
        self.quantum_bound_squared().sqrt_exact()
    }

    pub fn quantum_bound_f64(&self) -> f64 {
        self.quantum_bound_squared().to_f64_lossy().sqrt()
    }

    pub fn build_operator(&self) -> NcPolynomial<T> {
        let [a0, a1, b0, b1] = Letter::ALL.map(NcPolynomial::<T>::letter);
        let correlators = &(&a0 * &b0) + &(&a0 * &b1);
        a0.scale(&self.beta) + correlators.scale(&self.alpha) + &a1 * &b0 - &a1 * &b1
    }

    /// Maximum over the 16 deterministic strategies `a_x, b_y ∈ {±1}`.
    pub fn classical_bound_enumerated(&self) -> T {
        let op = self.build_operator();
        let mut best: Option<T> = None;
        for bits in 0u8..16 {
            let value = op.evaluate_commuting(|l| {
                if bits >> (l as u8) & 1 == 1 {
                    -T::one()
                } else {
                    T::one()
                }
            });
            if best.as_ref().map_or(true, |b| value > *b) {
                best = Some(value);
            }
        }
        best.expect("sixteen strategies")
    }

    pub fn to_f64(&self) -> BellFamily<f64> {
        BellFamily {
            alpha: self.alpha.to_f64_lossy(),
            beta: self.beta.to_f64_lossy(),
        }
    }

    /// `sin 2θ = √((4 − α²β²)/(4 + β²))`.
    pub fn sin_2theta(&self) -> f64 {
        let (a, b) = (self.alpha.to_f64_lossy(), self.beta.to_f64_lossy());
        ((4.0 - a * a * b * b).max(0.0) / (4.0 + b * b)).sqrt()
    }

    /// `cos 2θ = β(1 + α²)/η`, which stays accurate near `θ = π/4`.
    pub fn cos_2theta(&self) -> f64 {
        let (a, b) = (self.alpha.to_f64_lossy(), self.beta.to_f64_lossy());
        b * (1.0 + a * a) / self.quantum_bound_f64()
    }

    /// Self-tested state angle in `(0, π/4]`.
    pub fn theta(&self) -> Result<f64, BellError> {
        if self.is_boundary() || self.sin_2theta() == 0.0 {
            return Err(BellError::Boundary);
        }
        Ok(0.5 * self.sin_2theta().atan2(self.cos_2theta()))
    }

    /// Measurement angle in `(0, π/4]`.
    pub fn mu(&self) -> Result<f64, BellError> {
        self.theta()?;
        Ok(self.sin_2theta().atan2(self.alpha.to_f64_lossy()))
    }
}

impl BellFamily<f64> {
    pub fn alpha_f64(&self) -> f64 {
        self.alpha
    }

    pub fn beta_f64(&self) -> f64 {
        self.beta
    }
}

fn check_angle(name: &'static str, value: f64) -> Result<(), BellError> {
    if value.is_finite() && value > 0.0 && value <= FRAC_PI_4 + 1e-15 {
        Ok(())
    } else {
        Err(BellError::InvalidAngle {
            name,
            value,
            range: "(0, π/4]",
        })
    }
}

/// The family member whose maximal violation is attained by
/// `cos θ|00⟩ + sin θ|11⟩` with measurement angle `μ`.
pub fn params_from_state(theta: f64, mu: f64) -> Result<BellFamily<f64>, BellError> {
    check_angle("θ", theta)?;
    check_angle("μ", mu)?;
    let (s, c) = ((2.0 * theta).sin(), (2.0 * theta).cos());
    // cos 2θ at θ = π/4 rounds to ~6e-17 rather than 0.
    let c = if c < 1e-15 { 0.0 } else { c };
    let mut alpha = s / mu.tan();
    if alpha < 1.0 {
        if alpha < 1.0 - ALPHA_SLACK {
            return Err(BellError::TooWeaklyEntangled { alpha });
        }
        alpha = 1.0;
    }
    let beta = 2.0 * c / (alpha * alpha + s * s).sqrt();
    BellFamily::new(alpha, beta)
}

/// The standard tilted-CHSH member (`α = 1`) for a given state.
pub fn standard_tilted(theta: f64) -> Result<(BellFamily<f64>, f64), BellError> {
    check_angle("θ", theta)?;
    let mu = (2.0 * theta).sin().atan();
    Ok((params_from_state(theta, mu)?, mu))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Qkd,
    Qpq,
}

/// Parameter choice for key distribution (`α = 1/tan 2θ`, `β = 0`) or
/// private queries (`α = 1`, `β = 2cos θ/√(1 + sin²θ)`).
pub fn application_params(theta: f64, protocol: Protocol) -> Result<BellFamily<f64>, BellError> {
    match protocol {
        Protocol::Qkd => {
            check_angle("θ", theta)?;
            let mut alpha = 1.0 / (2.0 * theta).tan();
            if alpha < 1.0 {
                if alpha < 1.0 - ALPHA_SLACK {
                    return Err(BellError::AlphaBelowOne { alpha });
                }
                alpha = 1.0;
            }
            BellFamily::new(alpha, 0.0)
        }
        Protocol::Qpq => {
            if !(theta.is_finite() && theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2 + 1e-15) {
                return Err(BellError::InvalidAngle {
                    name: "θ",
                    value: theta,
                    range: "(0, π/2]",
                });
            }
            let beta = (2.0 * theta.cos() / (1.0 + theta.sin().powi(2)).sqrt()).max(0.0);
            BellFamily::new(1.0, beta)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub beta: f64,
    pub alpha: f64,
    /// `None` when the row is infeasible (`α < 1`).
    pub classical: Option<f64>,
    pub quantum: Option<f64>,
}

impl CurveRow {
    pub fn feasible(&self) -> bool {
        self.classical.is_some()
    }
}

/// Bounds along the curve of families sharing the measurement angle `μ`:
/// `α = 2/√(tan²μ (4 + β²) + β²)`.
pub fn bound_curve(mu: f64, beta_grid: &[f64]) -> Vec<CurveRow> {
    let t = mu.tan();
    beta_grid
        .iter()
        .map(|&beta| {
            let alpha = 2.0 / (t * t * (4.0 + beta * beta) + beta * beta).sqrt();
            let fam = if alpha >= 1.0 - ALPHA_SLACK {
                BellFamily::new(alpha.max(1.0), beta).ok()
            } else {
                None
            };
            CurveRow {
                beta,
                alpha,
                classical: fam.as_ref().map(|f| f.classical_bound()),
                quantum: fam.as_ref().map(|f| f.quantum_bound_f64()),
            }
        })
        .collect()
}

/// CSV with header `beta,alpha,classical,quantum`; infeasible rows carry
/// `infeasible` in both bound columns.
pub fn curve_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("beta,alpha,classical,quantum\n");
    for r in rows {
        let cell = |v: Option<f64>| v.map_or_else(|| "infeasible".to_string(), sig12);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            sig12(r.beta),
            sig12(r.alpha),
            cell(r.classical),
            cell(r.quantum)
        );
    }
    out
}

/// A target state together with the family and settings that self-test it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCase {
    pub name: &'static str,
    pub theta: f64,
    pub mu: f64,
    pub family: BellFamily<f64>,
}

/// The three target states sharing `tan μ = 3/4`:
/// `θ = π/4`, `θ = ½ arcsin(3/4)` and `θ = π/6`.
pub fn reference_cases() -> [ReferenceCase; 3] {
    let mu = 0.75f64.atan();
    let case = |name, theta: f64| ReferenceCase {
        name,
        theta,
        mu,
        family: params_from_state(theta, mu).expect("reference parameters are feasible"),
    };
    [
        case("case0", FRAC_PI_4),
        case("case1", 0.5 * 0.75f64.asin()),
        case("case2", std::f64::consts::FRAC_PI_6),
    ]
}

/// CHSH with its optimal settings.
pub fn chsh_case() -> ReferenceCase {
    ReferenceCase {
        name: "chsh",
        theta: FRAC_PI_4,
        mu: FRAC_PI_4,
        family: BellFamily::new(1.0, 0.0).expect("CHSH is feasible"),
    }
}
