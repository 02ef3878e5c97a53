//! The swap isometry: local extraction operators built from the untrusted
//! observables, their action on a realization, and the fidelity of the
//! swapped-out ancilla state as a polynomial in the letters.

use nalgebra::{DMatrix, DVector};

use crate::ncpoly::{Letter, NcPolynomial};
use crate::qsim::Realization;
use crate::C64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SwapError {
    #[error("extraction operators undefined at μ = {0} (need sin μ and cos μ nonzero)")]
    UndefinedExtraction(f64),
    #[error("state angle θ = {0} must be finite")]
    InvalidTheta(f64),
}

/// `Z_A = A0`, `X_A = A1`, `Z_B = (B0 + B1)/(2cos μ)`, `X_B = (B0 − B1)/(2sin μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionOps {
    pub mu: f64,
    pub z_a: NcPolynomial<f64>,
    pub x_a: NcPolynomial<f64>,
    pub z_b: NcPolynomial<f64>,
    pub x_b: NcPolynomial<f64>,
}

impl ExtractionOps {
    pub fn new(mu: f64) -> Result<Self, SwapError> {
        let (s, c) = (mu.sin(), mu.cos());
        if !mu.is_finite() || s.abs() < 1e-12 || c.abs() < 1e-12 {
            return Err(SwapError::UndefinedExtraction(mu));
        }
        let [a0, a1, b0, b1] = Letter::ALL.map(NcPolynomial::<f64>::letter);
        Ok(Self {
            mu,
            z_a: a0,
            x_a: a1,
            z_b: (&b0 + &b1).scale(&(0.5 / c)),
            x_b: (&b0 - &b1).scale(&(0.5 / s)),
        })
    }

    /// Alice's factor for ancilla value `i`: `(I + Z_A)` or `(X_A − X_A Z_A)`.
    pub fn alice_factor(&self, i: usize) -> NcPolynomial<f64> {
        let one = NcPolynomial::one();
        match i {
            0 => &one + &self.z_a,
            _ => &self.x_a - &(&self.x_a * &self.z_a),
        }
    }

    /// Bob's factor for ancilla value `s`: `(I + Z_B)` or `(X_B − X_B Z_B)`.
    pub fn bob_factor(&self, s: usize) -> NcPolynomial<f64> {
        let one = NcPolynomial::one();
        match s {
            0 => &one + &self.z_b,
            _ => &self.x_b - &(&self.x_b * &self.z_b),
        }
    }

    /// `L_is` with `Φ(|ψ⟩) = Σ_is L_is|ψ⟩|i s⟩`.
    pub fn branch(&self, i: usize, s: usize) -> NcPolynomial<f64> {
        (&self.alice_factor(i) * &self.bob_factor(s)).scale(&0.25)
    }
}

/// `cos θ|00⟩ + sin θ|11⟩` as amplitudes indexed by `2i + s`.
pub fn target_amplitudes(theta: f64) -> [f64; 4] {
    [theta.cos(), 0.0, 0.0, theta.sin()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwapOutput {
    /// Amplitude `phys * 4 + (2i + s)` on physical system ⊗ ancilla pair.
    pub output_state: DVector<C64>,
    /// Reduced ancilla state, basis `|00⟩, |01⟩, |10⟩, |11⟩` (Alice first).
    pub rho_swap: DMatrix<C64>,
}

impl SwapOutput {
    /// `⟨ψ̄|ρ_swap|ψ̄⟩` for `ψ̄ = cos θ|00⟩ + sin θ|11⟩`.
    pub fn fidelity(&self, theta: f64) -> f64 {
        let t = target_amplitudes(theta);
        let mut f = C64::new(0.0, 0.0);
        for k in 0..4 {
            for l in 0..4 {
                f += self.rho_swap[(k, l)] * t[k] * t[l];
            }
        }
        f.re
    }
}

/// Applies the isometry as written, without renormalizing `Z_B` or `X_B`.
pub fn apply_isometry(r: &Realization, mu: f64) -> Result<SwapOutput, SwapError> {
    let ops = ExtractionOps::new(mu)?;
    let branches: Vec<DVector<C64>> = (0..4).map(|k| r.apply(&ops.branch(k / 2, k % 2))).collect();
    let dim = branches[0].len();
    let output_state = DVector::from_fn(dim * 4, |idx, _| branches[idx % 4][idx / 4]);
    let rho_swap = DMatrix::from_fn(4, 4, |k, l| branches[l].dotc(&branches[k]));
    Ok(SwapOutput {
        output_state,
        rho_swap,
    })
}

/// `(I + Z_A)|ψ⟩/(2cos θ)`, the physical state left behind by an ideal swap.
pub fn junk_state(r: &Realization, theta: f64) -> DVector<C64> {
    let mut p = NcPolynomial::<f64>::letter(Letter::A0);
    p.add_term(crate::Word::identity(), 1.0);
    r.apply(&p.scale(&(0.5 / theta.cos())))
}

/// The fidelity `⟨ψ̄|ρ_swap|ψ̄⟩` as a polynomial `F` with
/// `⟨ψ|F|ψ⟩ = fidelity` for every realization. Expands
/// `Σ_ijst ψ̄_is ψ̄_jt C_ijst` with `C_ijst = L_jt† L_is`.
pub fn fidelity_objective_symbolic(theta: f64, mu: f64) -> Result<NcPolynomial<f64>, SwapError> {
    if !theta.is_finite() {
        return Err(SwapError::InvalidTheta(theta));
    }
    let ops = ExtractionOps::new(mu)?;
    let t = target_amplitudes(theta);
    let mut f = NcPolynomial::zero();
    for i in 0..2 {
        for s in 0..2 {
            for j in 0..2 {
                for tt in 0..2 {
                    let w = t[2 * i + s] * t[2 * j + tt];
                    if w == 0.0 {
                        continue;
                    }
                    let c = &ops.branch(j, tt).adjoint() * &ops.branch(i, s);
                    f += c.scale(&w);
                }
            }
        }
    }
    Ok(f)
}

/// Per-party maximal reduced word length in `F`.
pub fn max_word_degree<T: crate::Scalar>(f: &NcPolynomial<T>) -> (usize, usize) {
    f.degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{ideal_realization, white_noise_realization};
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn extraction_needs_nondegenerate_angle() {
        assert!(ExtractionOps::new(0.0).is_err());
        assert!(ExtractionOps::new(std::f64::consts::FRAC_PI_2).is_err());
        assert!(ExtractionOps::new(0.3).is_ok());
    }

    #[test]
    fn ideal_swap_factorizes() {
        for case in crate::bell::reference_cases() {
            let r = ideal_realization(case.theta, case.mu).unwrap();
            let out = apply_isometry(&r, case.mu).unwrap();
            assert!((out.fidelity(case.theta) - 1.0).abs() < 1e-10);
            let junk = junk_state(&r, case.theta);
            let t = target_amplitudes(case.theta);
            let expected = DVector::from_fn(16, |idx, _| junk[idx / 4] * t[idx % 4]);
            assert!((&out.output_state - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn white_noise_fidelity_decreases() {
        let mut last = f64::INFINITY;
        for k in 0..=10 {
            let v = 1.0 - 0.1 * k as f64;
            let r = white_noise_realization(FRAC_PI_4, FRAC_PI_4, v).unwrap();
            let f = apply_isometry(&r, FRAC_PI_4).unwrap().fidelity(FRAC_PI_4);
            if k == 0 {
                assert!((f - 1.0).abs() < 1e-10);
            } else {
                assert!(f < last, "v = {v}: {f} !< {last}");
            }
            last = f;
        }
    }

    #[test]
    fn symbolic_fidelity_shape() {
        let f = fidelity_objective_symbolic(0.4, 0.5).unwrap();
        assert_eq!(max_word_degree(&f), (3, 4));
        let g = fidelity_objective_symbolic(FRAC_PI_4, FRAC_PI_4).unwrap();
        assert_eq!(max_word_degree(&g), (3, 4));
        assert_eq!(max_word_degree(&NcPolynomial::<f64>::zero()), (0, 0));
        // Identity coefficient at θ = μ = π/4.
        let id = g.coefficient(&crate::Word::identity());
        assert!((id - 0.21875).abs() < 1e-15, "{id}");
        assert_eq!(g.len(), 28);
        assert_eq!(f.len(), 30);
        // F = L†L with L = cos θ L_00 + sin θ L_11.
        let ops = ExtractionOps::new(0.5).unwrap();
        let l = ops.branch(0, 0).scale(&0.4f64.cos()) + ops.branch(1, 1).scale(&0.4f64.sin());
        let diff = &f - &l.hermitian_square();
        assert!(diff.max_abs_coefficient() < 1e-14);
    }
}
