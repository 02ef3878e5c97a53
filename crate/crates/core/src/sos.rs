//! Sum-of-squares certificates for `η·I − B[α,β]`.
//!
//! Two closed-form decompositions are provided, plus a numerical search over
//! Gram matrices in a five-element polynomial basis. With rational `(α, β, η)`
//! the closed forms verify to the exact zero polynomial.

use nalgebra::{DMatrix, SymmetricEigen};
use serde_json::json;
use tilted_sdp::{solve, LinearFunctional, SdpError, SdpProblem, Sense, SolverOptions, Status};

use crate::bell::{BellError, BellFamily};
use crate::ncpoly::{Letter, NcPolynomial, Word};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SosError {
    #[error(transparent)]
    Parameters(#[from] BellError),
    #[error("η is irrational at α = {alpha}, β = {beta}; use floating-point coefficients")]
    IrrationalBound { alpha: String, beta: String },
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("certificate search did not converge (status {0:?})")]
    NotOptimal(Status),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Variant {
    #[serde(rename = "SOS1")]
    Sos1,
    #[serde(rename = "SOS2")]
    Sos2,
    /// Found numerically by [`search_certificate`].
    #[serde(rename = "searched")]
    Searched,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosTerm<T> {
    pub scale: T,
    pub poly: NcPolynomial<T>,
}

/// `shift = Σ scale · poly† poly` is claimed; [`verify_certificate`] checks it.
#[derive(Debug, Clone, PartialEq)]
pub struct SosCertificate<T> {
    pub variant: Variant,
    pub alpha: T,
    pub beta: T,
    pub eta: T,
    pub shift: NcPolynomial<T>,
    pub terms: Vec<SosTerm<T>>,
}

fn eta_of<T: Scalar>(fam: &BellFamily<T>) -> Result<T, SosError> {
    fam.quantum_bound().ok_or_else(|| SosError::IrrationalBound {
        alpha: fam.alpha().to_string(),
        beta: fam.beta().to_string(),
    })
}

fn letters<T: Scalar>() -> [NcPolynomial<T>; 4] {
    Letter::ALL.map(NcPolynomial::letter)
}

/// The three CHSH-like combinations `S_0, S_1, S_2`.
pub fn chsh_combinations<T: Scalar>(alpha: &T) -> [NcPolynomial<T>; 3] {
    let [a0, a1, b0, b1] = letters::<T>();
    let inv = T::one() / alpha.clone();
    let sum = &b0 + &b1;
    let diff = &b0 - &b1;
    let s0 = &a0 * &diff + (&a1 * &sum).scale(&inv);
    let s1 = (&a0 * &sum).scale(&inv) - &a1 * &diff;
    let s2 = &a0 * &diff - (&a1 * &sum).scale(alpha);
    [s0, s1, s2]
}

struct Pieces<T> {
    eta: T,
    shift: NcPolynomial<T>,
    /// `Δ + 2η` with `Δ = 2(α² − 1)η/(α² + 1)`.
    denom: T,
    t1: NcPolynomial<T>,
    t2: NcPolynomial<T>,
    p: [NcPolynomial<T>; 4],
}

fn pieces<T: Scalar>(fam: &BellFamily<T>) -> Result<Pieces<T>, SosError> {
    let eta = eta_of(fam)?;
    let (alpha, beta) = (fam.alpha().clone(), fam.beta().clone());
    let two = T::from_ratio(2, 1);
    let half = T::from_ratio(1, 2);
    let a2 = alpha.clone() * alpha.clone();
    let a2p1 = a2.clone() + T::one();
    let delta = two.clone() * (a2.clone() - T::one()) * eta.clone() / a2p1.clone();
    let denom = delta + two.clone() * eta.clone();

    let [a0, a1, b0, b1] = letters::<T>();
    let one = NcPolynomial::<T>::one();
    let [s0, s1, s2] = chsh_combinations(&alpha);
    let shift = one.scale(&eta) - fam.build_operator();

    let t1 = a0.scale(&-beta.clone()) + one.scale(&(eta.clone() / a2p1.clone())) - &a1 * &(&b0 - &b1);
    let t2 = a0.scale(&-(eta.clone() * alpha.clone() / a2p1)) + (&b0 + &b1);

    let p2 = a1.scale(&beta) - s0;
    let p3 = a0.scale(&two) - (&b0 + &b1).scale(&(eta.clone() / (two.clone() * alpha.clone())))
        + s1.scale(&(beta.clone() * half.clone()));
    let p4 = a1.scale(&two) - (&b0 - &b1).scale(&(eta.clone() * half.clone()))
        + s2.scale(&(beta * half));
    Ok(Pieces {
        eta,
        p: [shift.clone(), p2, p3, p4],
        shift,
        denom,
        t1,
        t2,
    })
}

/// The closed-form decomposition of the requested variant. Terms whose scale
/// vanishes (the `(α² − 1)` terms at `α = 1`) are omitted.
pub fn build_certificate<T: Scalar>(
    fam: &BellFamily<T>,
    variant: Variant,
) -> Result<SosCertificate<T>, SosError> {
    let pc = pieces(fam)?;
    let alpha = fam.alpha().clone();
    let a2 = alpha.clone() * alpha.clone();
    let pre = T::one() / pc.denom.clone();
    let side = pre.clone() * (a2.clone() - T::one());
    let [p1, p2, p3, p4] = pc.p;
    let raw = match variant {
        Variant::Sos1 => vec![
            (side.clone(), pc.t1),
            (side, pc.t2),
            (pre.clone(), p1),
            (pre * a2, p2),
        ],
        Variant::Sos2 => vec![
            (side.clone(), pc.t2),
            (side, pc.t1),
            (pre.clone() * a2, p3),
            (pre, p4),
        ],
        Variant::Searched => {
            panic!("searched certificates come from search_certificate")
        }
    };
    let terms = raw
        .into_iter()
        .filter(|(scale, _)| !scale.is_zero())
        .map(|(scale, poly)| SosTerm { scale, poly })
        .collect();
    Ok(SosCertificate {
        variant,
        alpha,
        beta: fam.beta().clone(),
        eta: pc.eta,
        shift: pc.shift,
        terms,
    })
}

/// `shift − Σ scale · poly† poly`.
pub fn verify_certificate<T: Scalar>(cert: &SosCertificate<T>) -> NcPolynomial<T> {
    let mut residual = cert.shift.clone();
    for t in &cert.terms {
        residual -= t.poly.hermitian_square().scale(&t.scale);
    }
    residual
}

impl<T: Scalar> SosCertificate<T> {
    /// Exact coefficients must cancel completely; floats to within `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        let r = verify_certificate(self);
        if T::EXACT {
            r.is_zero()
        } else {
            r.max_abs_coefficient() <= tol
        }
    }

    pub fn report(&self) -> serde_json::Value {
        let residual = verify_certificate(self);
        json!({
            "variant": self.variant,
            "alpha": self.alpha.to_string(),
            "beta": self.beta.to_string(),
            "eta": self.eta.to_string(),
            "shift": self.shift.to_string(),
            "terms": self.terms.iter().map(|t| json!({
                "scale": t.scale.to_string(),
                "poly": t.poly.to_string(),
            })).collect::<Vec<_>>(),
            "residual": residual.to_string(),
            "residual_max_coefficient": residual.max_abs_coefficient(),
        })
    }
}

/// The four polynomials that must annihilate any maximally violating state:
/// `B̂`, `βA1 − S_0`, `2A0 − (η/2α)(B0 + B1) + (β/2)S_1` and
/// `2A1 − (η/2)(B0 − B1) + (β/2)S_2`.
pub fn optimality_witnesses<T: Scalar>(fam: &BellFamily<T>) -> Result<[NcPolynomial<T>; 4], SosError> {
    Ok(pieces(fam)?.p)
}

/// The nine monomials `{I, A0, A1} ⊗ {I, B0, B1}` in the order
/// `I, A0, A1, B0, B1, A0B0, A0B1, A1B0, A1B1`.
pub fn nine_monomials() -> [Word; 9] {
    let w = |a: &[u8], b: &[u8]| Word::from_parts(a, b);
    [
        w(&[], &[]),
        w(&[0], &[]),
        w(&[1], &[]),
        w(&[], &[0]),
        w(&[], &[1]),
        w(&[0], &[0]),
        w(&[0], &[1]),
        w(&[1], &[0]),
        w(&[1], &[1]),
    ]
}

/// Five polynomials `R_i = r_i · V` spanning the candidate SOS terms. With
/// `k = η/(1 + α²)` and `c = β(1 + α²)/η` every entry lies in the field
/// generated by `α, β, η`.
#[derive(Debug, Clone, PartialEq)]
pub struct SosBasis<T> {
    pub r_vectors: [[T; 9]; 5],
}

impl<T: Scalar> SosBasis<T> {
    pub fn new(fam: &BellFamily<T>) -> Result<Self, SosError> {
        let eta = eta_of(fam)?;
        let alpha = fam.alpha().clone();
        let a2p1 = alpha.clone() * alpha.clone() + T::one();
        let k = eta.clone() / a2p1.clone();
        let c = fam.beta().clone() * a2p1 / eta;
        let z = T::zero;
        let o = T::one;
        let ca = c.clone() / alpha.clone();
        let inv = T::one() / alpha.clone();
        let ak = alpha * k.clone();
        Ok(Self {
            r_vectors: [
                [z(), -ak.clone(), z(), o(), o(), z(), z(), z(), z()],
                [-ak, z(), z(), z(), z(), o(), o(), z(), z()],
                [-k.clone(), z(), z(), ca.clone(), ca.clone(), z(), z(), o(), -o()],
                [z(), z(), -k.clone(), o(), -o(), z(), z(), ca.clone(), ca],
                [z(), z(), -(c * k), z(), z(), o(), -o(), inv.clone(), inv],
            ],
        })
    }

    pub fn polynomials(&self) -> [NcPolynomial<T>; 5] {
        let v = nine_monomials();
        self.r_vectors.clone().map(|r| {
            NcPolynomial::from_terms(v.iter().cloned().zip(r))
        })
    }
}

/// The symmetry of the family: `A1 → −A1`, `B0 ↔ B1`.
pub fn symmetry_transform<T: Scalar>(p: &NcPolynomial<T>) -> NcPolynomial<T> {
    p.substitute(|l| match l {
        Letter::A0 => NcPolynomial::letter(Letter::A0),
        Letter::A1 => -NcPolynomial::letter(Letter::A1),
        Letter::B0 => NcPolynomial::letter(Letter::B1),
        Letter::B1 => NcPolynomial::letter(Letter::B0),
    })
}

/// Result of the Gram-matrix search.
#[derive(Debug, Clone)]
pub struct SearchResult {
    /// Smallest `λ` with `λ·I − B` a sum of squares in the basis.
    pub bound: f64,
    /// Gram blocks for `(R_1, R_2, R_3)` and `(R_4, R_5)`.
    pub gram: [DMatrix<f64>; 2],
    /// Certificate for `bound·I − B` from the eigendecomposition of the blocks.
    pub certificate: SosCertificate<f64>,
}

/// Minimizes `λ` such that `λ·I − B = Σ M_μν R_μ† R_ν` with `M = M_1 ⊕ M_2`
/// positive semidefinite, matching coefficients on all 25 words of
/// `{I, A0, A1, A0A1, A1A0} ⊗ {I, B0, B1, B0B1, B1B0}`.
pub fn search_certificate<T: Scalar>(fam: &BellFamily<T>, tol: f64) -> Result<SearchResult, SosError> {
    let ffam = fam.to_f64();
    let basis = SosBasis::new(&ffam)?;
    let r = basis.polynomials();
    let blocks: [&[usize]; 2] = [&[0, 1, 2], &[3, 4]];
    let bell = ffam.build_operator();

    let parts: [&[u8]; 5] = [&[], &[0], &[1], &[0, 1], &[1, 0]];
    let mut words = Vec::with_capacity(25);
    for a in parts {
        for b in parts {
            words.push(Word::from_parts(a, b));
        }
    }

    // Coefficient of each word in R_μ† R_ν, per block.
    let functional = |w: &Word| {
        let mut f = LinearFunctional::new();
        for (bi, idx) in blocks.iter().enumerate() {
            for (p, &mu) in idx.iter().enumerate() {
                for (q, &nu) in idx.iter().enumerate().skip(p) {
                    let mut coeff = (&r[mu].adjoint() * &r[nu]).coefficient(w);
                    if q != p {
                        coeff += (&r[nu].adjoint() * &r[mu]).coefficient(w);
                    }
                    if coeff != 0.0 {
                        f.add(bi, p, q, coeff);
                    }
                }
            }
        }
        f
    };

    let mut problem = SdpProblem::new(vec![3, 2], Sense::Minimize);
    problem.set_objective(functional(&Word::identity()));
    for w in words.iter().filter(|w| !w.is_identity()) {
        problem.add_constraint(functional(w), -bell.coefficient(w));
    }
    let sol = solve(
        &problem,
        &SolverOptions {
            tol,
            ..SolverOptions::default()
        },
    )?;
    if sol.status != Status::Optimal {
        return Err(SosError::NotOptimal(sol.status));
    }

    let mut terms = Vec::new();
    for (bi, idx) in blocks.iter().enumerate() {
        let eig = SymmetricEigen::new(sol.primal[bi].clone());
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda <= 0.0 {
                continue;
            }
            let mut poly = NcPolynomial::zero();
            for (p, &mu) in idx.iter().enumerate() {
                poly += r[mu].scale(&eig.eigenvectors[(p, k)]);
            }
            terms.push(SosTerm { scale: lambda, poly });
        }
    }
    let bound = sol.objective;
    let certificate = SosCertificate {
        variant: Variant::Searched,
        alpha: ffam.alpha_f64(),
        beta: ffam.beta_f64(),
        eta: bound,
        shift: NcPolynomial::constant(bound) - bell,
        terms,
    };
    Ok(SearchResult {
        bound,
        gram: [sol.primal[0].clone(), sol.primal[1].clone()],
        certificate,
    })
}
