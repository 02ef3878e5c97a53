//! Finite-dimensional realizations: a pure state with two binary observables
//! per party, the behaviors they produce, and a see-saw maximizer used as an
//! independent oracle for quantum bounds.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{BellError, BellFamily};
use crate::ncpoly::{self, Letter, LetterAssignment, NcPolyError, NcPolynomial};
use crate::scalar::Scalar;
use crate::swap::ExtractionOps;
use crate::C64;

/// Tolerance on state norm, hermiticity and `O² = I`.
pub const REALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QsimError {
    #[error(transparent)]
    Algebra(#[from] NcPolyError),
    #[error(transparent)]
    Parameters(#[from] BellError),
    #[error("observable {letter} is not Hermitian (deviation {deviation:e})")]
    NotHermitian { letter: Letter, deviation: f64 },
    #[error("observable {letter} does not square to the identity (deviation {deviation:e})")]
    NotInvolution { letter: Letter, deviation: f64 },
    #[error("local dimensions must be at least 2, got ({0}, {1})")]
    Dimension(usize, usize),
    #[error(transparent)]
    Swap(#[from] crate::swap::SwapError),
    #[error("white-noise visibility must lie in [0, 1], got {0}")]
    Visibility(f64),
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn pauli_z() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

pub fn pauli_x() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

/// A pure state on `C^dA ⊗ C^dB` with Hermitian involutions for each party.
/// Amplitude `state[i * dB + j]` belongs to `|i⟩|j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    state: DVector<C64>,
    ops: LetterAssignment,
}

impl Realization {
    pub fn new(
        state: DVector<C64>,
        obs_a: [DMatrix<C64>; 2],
        obs_b: [DMatrix<C64>; 2],
    ) -> Result<Self, QsimError> {
        let ops = LetterAssignment { a: obs_a, b: obs_b };
        let (da, db) = ops.dims()?;
        if state.len() != da * db {
            return Err(NcPolyError::StateDimension {
                expected: da * db,
                found: state.len(),
            }
            .into());
        }
        let norm = state.norm();
        if (norm - 1.0).abs() > REALIZATION_TOL {
            return Err(NcPolyError::NotNormalized { norm }.into());
        }
        for l in Letter::ALL {
            let m = ops.matrix(l);
            let deviation = (m - m.adjoint()).camax();
            if deviation > REALIZATION_TOL {
                return Err(QsimError::NotHermitian { letter: l, deviation });
            }
            let deviation = (m * m - DMatrix::identity(m.nrows(), m.nrows())).camax();
            if deviation > REALIZATION_TOL {
                return Err(QsimError::NotInvolution { letter: l, deviation });
            }
        }
        Ok(Self { state, ops })
    }

    pub fn state(&self) -> &DVector<C64> {
        &self.state
    }

    pub fn assignment(&self) -> &LetterAssignment {
        &self.ops
    }

    pub fn observable(&self, l: Letter) -> &DMatrix<C64> {
        self.ops.matrix(l)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.ops.a[0].nrows(), self.ops.b[0].nrows())
    }

    /// `p(A ⊗ I, I ⊗ B)|ψ⟩`.
    pub fn apply<T: Scalar>(&self, p: &NcPolynomial<T>) -> DVector<C64> {
        ncpoly::apply(p, &self.ops, &self.state).expect("validated realization")
    }

    /// `Re ⟨ψ|p|ψ⟩`.
    pub fn expectation<T: Scalar>(&self, p: &NcPolynomial<T>) -> f64 {
        self.state.dotc(&self.apply(p)).re
    }

    pub fn bell_value<T: Scalar>(&self, fam: &BellFamily<T>) -> f64 {
        self.expectation(&fam.build_operator())
    }
}

/// `cos θ|00⟩ + sin θ|11⟩` with `A0 = σz`, `A1 = σx`,
/// `B0 = cos μ σz + sin μ σx`, `B1 = cos μ σz − sin μ σx`.
pub fn ideal_realization(theta: f64, mu: f64) -> Result<Realization, QsimError> {
    for (name, value) in [("θ", theta), ("μ", mu)] {
        if !(value.is_finite() && value > 0.0 && value <= std::f64::consts::FRAC_PI_4 + 1e-15) {
            return Err(BellError::InvalidAngle {
                name,
                value,
                range: "(0, π/4]",
            }
            .into());
        }
    }
    let state = DVector::from_vec(vec![c(theta.cos()), c(0.0), c(0.0), c(theta.sin())]);
    let (z, x) = (pauli_z(), pauli_x());
    let b0 = &z * c(mu.cos()) + &x * c(mu.sin());
    let b1 = &z * c(mu.cos()) - &x * c(mu.sin());
    Realization::new(state, [z, x], [b0, b1])
}

/// Haar-like random unitary from the QR factorization of a random matrix.
fn random_unitary(rng: &mut impl Rng, d: usize) -> DMatrix<C64> {
    let m = DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    m.qr().q()
}

/// A random Hermitian involution with a balanced spectrum.
pub fn random_involution(rng: &mut impl Rng, d: usize) -> DMatrix<C64> {
    let u = random_unitary(rng, d);
    let signs = DVector::from_fn(d, |i, _| c(if i < d / 2 { 1.0 } else { -1.0 }));
    let m = &u * DMatrix::from_diagonal(&signs) * u.adjoint();
    // Remove rounding asymmetry so validation sees an exact Hermitian matrix.
    (&m + m.adjoint()) * c(0.5)
}

pub fn random_state(rng: &mut impl Rng, dim: usize) -> DVector<C64> {
    let v = DVector::from_fn(dim, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let n = v.norm();
    v / c(n)
}

pub fn random_realization(rng: &mut impl Rng, dims: (usize, usize)) -> Realization {
    let (da, db) = dims;
    let a = [random_involution(rng, da), random_involution(rng, da)];
    let b = [random_involution(rng, db), random_involution(rng, db)];
    Realization::new(random_state(rng, da * db), a, b).expect("random realization is valid")
}

/// A purification of `v|ψ⟩⟨ψ| + (1 − v)I/4` for the ideal two-qubit
/// realization. Each party holds its qubit plus a two-dimensional purifying
/// register, and its observables act trivially on the register.
pub fn white_noise_realization(theta: f64, mu: f64, v: f64) -> Result<Realization, QsimError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(QsimError::Visibility(v));
    }
    let ideal = ideal_realization(theta, mu)?;
    let (ct, st) = (theta.cos(), theta.sin());
    // Eigenbasis of the noisy state: |ψ⟩, its partner, |01⟩, |10⟩.
    let basis: [[f64; 4]; 4] = [
        [ct, 0.0, 0.0, st],
        [st, 0.0, 0.0, -ct],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ];
    let weights = [v + (1.0 - v) / 4.0, (1.0 - v) / 4.0, (1.0 - v) / 4.0, (1.0 - v) / 4.0];
    let mut state = DVector::<C64>::zeros(16);
    for (k, (vec, w)) in basis.iter().zip(weights).enumerate() {
        let amp = w.sqrt();
        let (ka, kb) = (k / 2, k % 2);
        for (ab, &x) in vec.iter().enumerate() {
            let (a, b) = (ab / 2, ab % 2);
            let alice = a * 2 + ka;
            let bob = b * 2 + kb;
            state[alice * 4 + bob] += c(amp * x);
        }
    }
    let state = &state / c(state.norm());
    let id2 = DMatrix::<C64>::identity(2, 2);
    let lift = |m: &DMatrix<C64>| m.kronecker(&id2);
    let ops = ideal.assignment();
    Realization::new(
        state,
        [lift(&ops.a[0]), lift(&ops.a[1])],
        [lift(&ops.b[0]), lift(&ops.b[1])],
    )
}

/// Joint outcome probabilities `p(a, b | x, y)`, stored as
/// `p[x][y][i][j]` with outcome index 0 for `+1` and 1 for `−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    pub p: [[[[f64; 2]; 2]; 2]; 2],
}

impl Behavior {
    pub fn prob(&self, a: i8, b: i8, x: usize, y: usize) -> f64 {
        let idx = |o: i8| if o > 0 { 0 } else { 1 };
        self.p[x][y][idx(a)][idx(b)]
    }

    /// `⟨A_x B_y⟩`.
    pub fn correlator(&self, x: usize, y: usize) -> f64 {
        let t = &self.p[x][y];
        t[0][0] - t[0][1] - t[1][0] + t[1][1]
    }

    /// `⟨A_x⟩`, read from the `y = 0` table.
    pub fn marginal_a(&self, x: usize) -> f64 {
        let t = &self.p[x][0];
        t[0][0] + t[0][1] - t[1][0] - t[1][1]
    }

    pub fn marginal_b(&self, y: usize) -> f64 {
        let t = &self.p[0][y];
        t[0][0] + t[1][0] - t[0][1] - t[1][1]
    }

    pub fn bell_value<T: Scalar>(&self, fam: &BellFamily<T>) -> f64 {
        let (a, b) = (fam.alpha().to_f64_lossy(), fam.beta().to_f64_lossy());
        b * self.marginal_a(0)
            + a * (self.correlator(0, 0) + self.correlator(0, 1))
            + self.correlator(1, 0)
            - self.correlator(1, 1)
    }

    /// Checks positivity, normalization and no-signaling within `tol`.
    pub fn check(&self, tol: f64) -> Result<(), String> {
        for x in 0..2 {
            for y in 0..2 {
                let t = &self.p[x][y];
                if t.iter().flatten().any(|&v| v < -tol) {
                    return Err(format!("negative probability at (x, y) = ({x}, {y})"));
                }
                let sum: f64 = t.iter().flatten().sum();
                if (sum - 1.0).abs() > tol {
                    return Err(format!("table ({x}, {y}) sums to {sum}"));
                }
            }
        }
        for x in 0..2 {
            let m0 = self.p[x][0][0][0] + self.p[x][0][0][1];
            let m1 = self.p[x][1][0][0] + self.p[x][1][0][1];
            if (m0 - m1).abs() > tol {
                return Err(format!("Alice's marginal for x = {x} depends on y"));
            }
        }
        for y in 0..2 {
            let m0 = self.p[0][y][0][0] + self.p[0][y][1][0];
            let m1 = self.p[1][y][0][0] + self.p[1][y][1][0];
            if (m0 - m1).abs() > tol {
                return Err(format!("Bob's marginal for y = {y} depends on x"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("behavior serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct BehaviorJson {
    p: BTreeMap<String, [[f64; 2]; 2]>,
}

impl Serialize for Behavior {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut p = BTreeMap::new();
        for x in 0..2 {
            for y in 0..2 {
                p.insert(format!("{x},{y}"), self.p[x][y]);
            }
        }
        BehaviorJson { p }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Behavior {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let json = BehaviorJson::deserialize(d)?;
        let mut p = [[[[0.0; 2]; 2]; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                let key = format!("{x},{y}");
                p[x][y] = *json
                    .p
                    .get(&key)
                    .ok_or_else(|| serde::de::Error::custom(format!("missing table {key}")))?;
            }
        }
        Ok(Behavior { p })
    }
}

/// Probabilities from the projectors `(I ± O)/2`.
pub fn behavior_of(r: &Realization) -> Behavior {
    let mut p = [[[[0.0; 2]; 2]; 2]; 2];
    let proj = |l: Letter, sign: f64| {
        let mut poly = NcPolynomial::<f64>::constant(0.5);
        poly.add_term(crate::Word::letter(l), 0.5 * sign);
        poly
    };
    let a_letters = [Letter::A0, Letter::A1];
    let b_letters = [Letter::B0, Letter::B1];
    for x in 0..2 {
        for y in 0..2 {
            for (i, sa) in [1.0, -1.0].into_iter().enumerate() {
                for (j, sb) in [1.0, -1.0].into_iter().enumerate() {
                    let op = &proj(a_letters[x], sa) * &proj(b_letters[y], sb);
                    p[x][y][i][j] = r.expectation(&op);
                }
            }
        }
    }
    Behavior { p }
}

/// The element of `{O : O = O†, O² = I}` maximizing `Re tr(O N)`.
fn best_involution(n: &DMatrix<C64>) -> DMatrix<C64> {
    let h = (n + n.adjoint()) * c(0.5);
    let eig = SymmetricEigen::new(h);
    let d = eig.eigenvalues.len();
    let signs = DVector::from_fn(d, |i, _| c(if eig.eigenvalues[i] >= 0.0 { 1.0 } else { -1.0 }));
    let m = &eig.eigenvectors * DMatrix::from_diagonal(&signs) * eig.eigenvectors.adjoint();
    (&m + m.adjoint()) * c(0.5)
}

/// Largest eigenvalue and a unit eigenvector of a Hermitian matrix.
fn top_eigen(m: &DMatrix<C64>) -> (f64, DVector<C64>) {
    let eig = SymmetricEigen::new((m + m.adjoint()) * c(0.5));
    let (k, &value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let v = eig.eigenvectors.column(k).into_owned();
    let n = v.norm();
    (value, v / c(n))
}

#[derive(Debug, Clone)]
pub struct SeeSawOptions {
    pub restarts: usize,
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for SeeSawOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            tol: 1e-12,
            max_sweeps: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeeSawResult {
    pub realization: Realization,
    pub value: f64,
    pub restart: usize,
}

fn see_saw_once<T: Scalar>(
    fam: &BellFamily<T>,
    dims: (usize, usize),
    opts: &SeeSawOptions,
    restart: usize,
) -> (f64, Realization) {
    let (da, db) = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart as u64));
    let mut ops = LetterAssignment {
        a: [random_involution(&mut rng, da), random_involution(&mut rng, da)],
        b: [random_involution(&mut rng, db), random_involution(&mut rng, db)],
    };
    let (alpha, beta) = (fam.alpha().to_f64_lossy(), fam.beta().to_f64_lossy());
    let op = fam.build_operator().to_f64();
    let (mut value, mut psi) = top_eigen(&ncpoly::operator_matrix(&op, &ops).expect("dims"));
    let id_b = DMatrix::<C64>::identity(db, db);
    for _ in 0..opts.max_sweeps {
        // Row-major reshape of the state: psi_mat[(i, j)] = psi[i * db + j].
        let psi_mat = DMatrix::from_fn(da, db, |i, j| psi[i * db + j]);
        let k0 = &id_b * c(beta) + (&ops.b[0] + &ops.b[1]) * c(alpha);
        let k1 = &ops.b[0] - &ops.b[1];
        for (x, k) in [k0, k1].iter().enumerate() {
            ops.a[x] = best_involution(&(&psi_mat * k.transpose() * psi_mat.adjoint()));
        }
        let j0 = &ops.a[0] * c(alpha) + &ops.a[1];
        let j1 = &ops.a[0] * c(alpha) - &ops.a[1];
        for (y, j) in [j0, j1].iter().enumerate() {
            ops.b[y] = best_involution(&(psi_mat.adjoint() * j * &psi_mat).transpose());
        }
        let (next, next_psi) = top_eigen(&ncpoly::operator_matrix(&op, &ops).expect("dims"));
        psi = next_psi;
        let improved = next - value;
        value = next;
        if improved.abs() <= opts.tol {
            break;
        }
    }
    let r = Realization::new(psi, ops.a, ops.b).expect("see-saw keeps involutions");
    (value, r)
}

/// Largest Bell value found by see-saw ascent over random restarts. Restarts
/// run in parallel; the result does not depend on scheduling.
pub fn maximize_violation<T: Scalar>(
    fam: &BellFamily<T>,
    dims: (usize, usize),
    opts: &SeeSawOptions,
) -> Result<SeeSawResult, QsimError> {
    if dims.0 < 2 || dims.1 < 2 {
        return Err(QsimError::Dimension(dims.0, dims.1));
    }
    let runs: Vec<(f64, Realization)> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|k| see_saw_once(fam, dims, opts, k))
        .collect();
    let (restart, (value, realization)) = runs
        .into_iter()
        .enumerate()
        .reduce(|best, cur| if cur.1 .0 > best.1 .0 { cur } else { best })
        .expect("at least one restart");
    Ok(SeeSawResult {
        realization,
        value,
        restart,
    })
}

/// Residuals of the two relations that a maximal violation forces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTestReport {
    /// `‖(Z_A − Z_B)|ψ⟩‖`.
    pub zz_residual: f64,
    /// `‖(sin θ X_A(I + Z_B) − cos θ X_B(I − Z_A))|ψ⟩‖`.
    pub xx_residual: f64,
    pub bell_value: f64,
    pub quantum_bound: f64,
    pub at_maximum: bool,
}

impl SelfTestReport {
    pub fn flag(&self) -> Option<&'static str> {
        (!self.at_maximum).then_some("not at maximal violation")
    }
}

/// Evaluates both relations with the extraction operators for `fam`.
/// `tol` decides whether the realization counts as maximally violating.
pub fn verify_selftest_relations<T: Scalar>(
    r: &Realization,
    fam: &BellFamily<T>,
    tol: f64,
) -> Result<SelfTestReport, QsimError> {
    let theta = fam.theta()?;
    let ops = ExtractionOps::new(fam.mu()?)?;
    let one = NcPolynomial::<f64>::one();
    let zz = &ops.z_a - &ops.z_b;
    let xx = (&ops.x_a * &(&one + &ops.z_b)).scale(&theta.sin())
        - (&ops.x_b * &(&one - &ops.z_a)).scale(&theta.cos());
    let bell_value = r.bell_value(fam);
    let quantum_bound = fam.quantum_bound_f64();
    Ok(SelfTestReport {
        zz_residual: r.apply(&zz).norm(),
        xx_residual: r.apply(&xx).norm(),
        bell_value,
        quantum_bound,
        at_maximum: bell_value >= quantum_bound - tol,
    })
}
