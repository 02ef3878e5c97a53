//! Moment-matrix relaxations for the two-input, two-output Bell scenario and
//! the two certification problems built on them: a lower bound on the swap
//! fidelity and an upper bound on the guessing probability.
//!
//! The moment matrix is real symmetric and indexed by words in the raw
//! letters. Entries `(u, v)` whose products `u†v` agree up to reversal share
//! one moment.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use tilted_sdp::{
    solve, LinearFunctional, SdpError, SdpProblem, SdpSolution, Sense, SolverOptions, Status,
};

use crate::bell::{BellError, BellFamily};
use crate::format::sig12;
use crate::ncpoly::{Letter, NcPolynomial, Word};
use crate::qsim::Realization;
use crate::scalar::Scalar;
use crate::swap::{fidelity_objective_symbolic, SwapError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NpaError {
    #[error(transparent)]
    Parameters(#[from] BellError),
    #[error(transparent)]
    Swap(#[from] SwapError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("monomial {0} is not covered by the moment basis")]
    Uncovered(String),
    #[error("super-quantum value: observed {observed} exceeds the quantum bound {eta}")]
    SuperQuantum { observed: f64, eta: f64 },
    #[error("SDP ended with status {status:?} (objective {objective})")]
    NotOptimal { status: Status, objective: f64 },
}

/// The representative of `{w, w†}` used as a moment key.
pub fn canonical(w: &Word) -> Word {
    let r = w.adjoint();
    if r < *w {
        r
    } else {
        w.clone()
    }
}

/// `u† v` in normal form.
fn moment_word(u: &Word, v: &Word) -> Word {
    u.adjoint().mul(v)
}

/// An ordered list of distinct words with the identity first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentBasis {
    monomials: Vec<Word>,
    #[serde(skip)]
    index: HashMap<Word, usize>,
}

impl MomentBasis {
    fn from_words(words: Vec<Word>) -> Self {
        let mut monomials = Vec::new();
        let mut index = HashMap::new();
        for w in words {
            if !index.contains_key(&w) {
                index.insert(w.clone(), monomials.len());
                monomials.push(w);
            }
        }
        Self { monomials, index }
    }

    /// `{I, A0, A1} ⊗ {I, B0, B1}`.
    pub fn local1() -> Self {
        let parts: [&[u8]; 3] = [&[], &[0], &[1]];
        let mut words = Vec::new();
        for a in parts {
            for b in parts {
                words.push(Word::from_parts(a, b));
            }
        }
        Self::from_words(words)
    }

    /// Extends [`MomentBasis::local1`] until every monomial of `targets` is
    /// some `u†v` (up to reversal). Targets are processed shortest first;
    /// each uncovered one is split as `u†v` in the way that adds the fewest
    /// and shortest new words, ties broken lexicographically.
    pub fn augmented<T: Scalar>(targets: &[&NcPolynomial<T>]) -> Self {
        let mut basis = Self::local1();
        let mut wanted: Vec<Word> = targets
            .iter()
            .flat_map(|p| p.words().map(canonical))
            .collect();
        wanted.sort_by(|x, y| (x.len(), x).cmp(&(y.len(), y)));
        wanted.dedup();
        for m in wanted {
            if basis.covers(&m) {
                continue;
            }
            let mut best: Option<((usize, usize, Vec<Word>), Vec<Word>)> = None;
            for cand in [m.clone(), m.adjoint()] {
                let (a, b) = (cand.a_part(), cand.b_part());
                for i in 0..=a.len() {
                    for j in 0..=b.len() {
                        let u_dag = Word::from_parts(&a[..i], &b[..j]);
                        let u = u_dag.adjoint();
                        let v = Word::from_parts(&a[i..], &b[j..]);
                        let mut new: Vec<Word> = Vec::new();
                        for w in [u, v] {
                            if !basis.index.contains_key(&w) && !new.contains(&w) {
                                new.push(w);
                            }
                        }
                        let key = (new.len(), new.iter().map(Word::len).sum(), new.clone());
                        if best.as_ref().map_or(true, |(k, _)| key < *k) {
                            best = Some((key, new));
                        }
                    }
                }
            }
            let (_, new) = best.expect("the trivial split always exists");
            let mut words = basis.monomials;
            words.extend(new);
            basis = Self::from_words(words);
        }
        basis
    }

    fn covers(&self, m: &Word) -> bool {
        let target = canonical(m);
        self.monomials.iter().any(|u| {
            self.monomials
                .iter()
                .any(|v| canonical(&moment_word(u, v)) == target)
        })
    }

    pub fn monomials(&self) -> &[Word] {
        &self.monomials
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn position(&self, w: &Word) -> Option<usize> {
        self.index.get(w).copied()
    }
}

/// Which matrix entries share a moment.
#[derive(Debug, Clone)]
pub struct MomentMatrixStructure {
    pub basis: MomentBasis,
    /// `entry_class[i][j]` is the moment id of entry `(i, j)`.
    pub entry_class: Vec<Vec<usize>>,
    /// Canonical word of each moment id.
    pub moments: Vec<Word>,
    /// Upper-triangle positions of each moment id, in row-major order.
    pub positions: Vec<Vec<(usize, usize)>>,
    id_of: BTreeMap<Word, usize>,
}

impl MomentMatrixStructure {
    pub fn new(basis: MomentBasis) -> Self {
        let n = basis.len();
        let mut entry_class = vec![vec![0; n]; n];
        let mut moments = Vec::new();
        let mut positions: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut id_of = BTreeMap::new();
        for i in 0..n {
            for j in i..n {
                let w = canonical(&moment_word(&basis.monomials[i], &basis.monomials[j]));
                let id = *id_of.entry(w.clone()).or_insert_with(|| {
                    moments.push(w);
                    positions.push(Vec::new());
                    moments.len() - 1
                });
                entry_class[i][j] = id;
                entry_class[j][i] = id;
                positions[id].push((i, j));
            }
        }
        Self {
            basis,
            entry_class,
            moments,
            positions,
            id_of,
        }
    }

    pub fn moment_id(&self, w: &Word) -> Option<usize> {
        self.id_of.get(&canonical(w)).copied()
    }

    pub fn identity_id(&self) -> usize {
        self.moment_id(&Word::identity()).expect("identity is in every basis")
    }

    /// `p` as a linear functional on moment ids.
    pub fn functional<T: Scalar>(&self, p: &NcPolynomial<T>) -> Result<BTreeMap<usize, f64>, NpaError> {
        let mut out = BTreeMap::new();
        for (w, c) in p.terms() {
            let id = self
                .moment_id(w)
                .ok_or_else(|| NpaError::Uncovered(w.to_string()))?;
            *out.entry(id).or_insert(0.0) += c.to_f64_lossy();
        }
        out.retain(|_, v| *v != 0.0);
        Ok(out)
    }

    /// `Re⟨ψ|w|ψ⟩` for every moment of a realization.
    pub fn moments_of(&self, r: &Realization) -> Vec<f64> {
        self.moments
            .iter()
            .map(|w| r.expectation(&NcPolynomial::<f64>::monomial(w.clone(), 1.0)))
            .collect()
    }

    /// Moments of a deterministic strategy with outcomes `value(letter) = ±1`.
    pub fn deterministic_moments(&self, value: impl Fn(Letter) -> f64) -> Vec<f64> {
        self.moments
            .iter()
            .map(|w| w.letters().map(&value).product())
            .collect()
    }
}

pub fn evaluate(f: &BTreeMap<usize, f64>, moments: &[f64]) -> f64 {
    f.iter().map(|(&id, &c)| c * moments[id]).sum()
}

/// The Bell operator as a functional on moment ids.
pub fn bell_value_functional<T: Scalar>(
    fam: &BellFamily<T>,
    structure: &MomentMatrixStructure,
) -> Result<BTreeMap<usize, f64>, NpaError> {
    structure.functional(&fam.build_operator())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationConstraint {
    /// `⟨B⟩ = observed`.
    Equal,
    /// `⟨B⟩ ≥ observed`.
    AtLeast,
}

#[derive(Debug, Clone, Serialize)]
pub struct NpaOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub constraint: ViolationConstraint,
}

impl Default for NpaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100,
            constraint: ViolationConstraint::Equal,
        }
    }
}

/// A moment-matrix relaxation in the solver's dual form. The moments are
/// the free dual variables and `Γ(y)` is the dual slack; the primal variable
/// is the Gram matrix of a sum-of-squares certificate, so the primal
/// objective is a rigorous bound. The Bell-value constraint is removed by
/// solving it for the moment with the largest coefficient.
#[derive(Debug, Clone)]
pub struct MomentProgram {
    pub problem: SdpProblem,
    offset: f64,
    flip: f64,
}

impl MomentProgram {
    pub fn new(
        structure: &MomentMatrixStructure,
        objective: &BTreeMap<usize, f64>,
        sense: Sense,
        bell: &BTreeMap<usize, f64>,
        observed: f64,
        constraint: ViolationConstraint,
    ) -> Self {
        let n = structure.basis.len();
        let id = structure.identity_id();
        let flip = match sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let get = |f: &BTreeMap<usize, f64>, k: usize| f.get(&k).copied().unwrap_or(0.0);
        let pivot = bell
            .iter()
            .filter(|(&k, _)| k != id)
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .map(|(&k, _)| k)
            .expect("the Bell operator has non-identity terms");
        let bp = bell[&pivot];
        let rhs = observed - get(bell, id);

        // Γ(y) = G_0 + Σ_k y_k G_k with the pivot moment substituted.
        let class_matrix = |lf: &mut LinearFunctional, k: usize, scale: f64| {
            for &(i, j) in &structure.positions[k] {
                lf.add(0, i, j, if i == j { scale } else { 2.0 * scale });
            }
        };
        let mut g0 = LinearFunctional::new();
        class_matrix(&mut g0, id, 1.0);
        class_matrix(&mut g0, pivot, rhs / bp);
        let offset = flip * (get(objective, id) + get(objective, pivot) * rhs / bp);

        let blocks = match constraint {
            ViolationConstraint::Equal => vec![n],
            ViolationConstraint::AtLeast => vec![n, 1],
        };
        let mut p = SdpProblem::new(blocks, Sense::Minimize);
        p.set_objective(g0);
        for k in 0..structure.moments.len() {
            if k == id || k == pivot {
                continue;
            }
            let ratio = get(bell, k) / bp;
            let mut gk = LinearFunctional::new();
            class_matrix(&mut gk, k, -1.0);
            if ratio != 0.0 {
                class_matrix(&mut gk, pivot, ratio);
            }
            let fk = flip * (get(objective, k) - get(objective, pivot) * ratio);
            p.add_constraint(gk, -fk);
        }
        if constraint == ViolationConstraint::AtLeast {
            // Slack s ≥ 0 with ⟨B⟩ = observed + s.
            let mut gs = LinearFunctional::new();
            class_matrix(&mut gs, pivot, -1.0 / bp);
            gs.add(1, 0, 0, -1.0);
            p.add_constraint(gs, -flip * get(objective, pivot) / bp);
        }
        Self {
            problem: p,
            offset,
            flip,
        }
    }

    /// Optimal value in the caller's sense, from the certificate side.
    pub fn value(&self, sol: &SdpSolution) -> f64 {
        self.flip * (self.offset - sol.objective)
    }

    pub fn solve(&self, opts: &NpaOptions) -> Result<f64, NpaError> {
        Ok(self.value(&run(&self.problem, opts)?))
    }
}

/// Fraction of `η − C` by which values at the quantum bound are backed off.
///
/// At `⟨B⟩ = η` the moment matrix is forced to be singular and the SDP has
/// no interior. Fidelity bounds only grow and guessing-probability bounds
/// only shrink as the observed value rises, so solving slightly below `η`
/// yields a valid, marginally weaker bound.
pub const BOUNDARY_BACKOFF: f64 = 1e-6;

/// A stalled solve is accepted when it meets these relative residual and
/// gap levels.
pub const ACCEPT_RESIDUAL: f64 = 1e-8;
pub const ACCEPT_GAP: f64 = 1e-7;

/// The Bell value actually imposed for an observed value.
pub fn effective_observed(eta: f64, classical: f64, observed: f64, tol: f64) -> Result<f64, NpaError> {
    if !observed.is_finite() || observed > eta + tol.max(1e-12) {
        return Err(NpaError::SuperQuantum { observed, eta });
    }
    Ok(observed.min(eta - BOUNDARY_BACKOFF * (eta - classical)))
}

fn check_observed<T: Scalar>(fam: &BellFamily<T>, observed: f64, tol: f64) -> Result<f64, NpaError> {
    effective_observed(
        fam.quantum_bound_f64(),
        fam.classical_bound().to_f64_lossy(),
        observed,
        tol,
    )
}

fn run(problem: &SdpProblem, opts: &NpaOptions) -> Result<SdpSolution, NpaError> {
    let sol = solve(
        problem,
        &SolverOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
        },
    )?;
    let stalled_ok = sol.status == Status::MaxIter
        && sol.primal_residual <= ACCEPT_RESIDUAL
        && sol.dual_residual <= ACCEPT_RESIDUAL
        && sol.gap <= ACCEPT_GAP;
    if sol.status != Status::Optimal && !stalled_ok {
        return Err(NpaError::NotOptimal {
            status: sol.status,
            objective: sol.objective,
        });
    }
    Ok(sol)
}

/// `C + V(η − C)`.
pub fn observed_from_normalized<T: Scalar>(fam: &BellFamily<T>, v: f64) -> f64 {
    let c = fam.classical_bound().to_f64_lossy();
    c + v * (fam.quantum_bound_f64() - c)
}

/// A fidelity relaxation for one target: cached basis and functionals.
#[derive(Debug, Clone)]
pub struct FidelityProblem {
    pub structure: MomentMatrixStructure,
    pub objective: BTreeMap<usize, f64>,
    pub bell: BTreeMap<usize, f64>,
    pub eta: f64,
    pub classical: f64,
}

impl FidelityProblem {
    pub fn new<T: Scalar>(fam: &BellFamily<T>, theta: f64, mu: f64) -> Result<Self, NpaError> {
        let f = fidelity_objective_symbolic(theta, mu)?;
        let op = fam.build_operator().to_f64();
        let basis = MomentBasis::augmented(&[&f, &op]);
        let structure = MomentMatrixStructure::new(basis);
        Ok(Self {
            objective: structure.functional(&f)?,
            bell: structure.functional(&op)?,
            structure,
            eta: fam.quantum_bound_f64(),
            classical: fam.classical_bound().to_f64_lossy(),
        })
    }

    pub fn program(&self, observed: f64, constraint: ViolationConstraint) -> MomentProgram {
        MomentProgram::new(
            &self.structure,
            &self.objective,
            Sense::Minimize,
            &self.bell,
            observed,
            constraint,
        )
    }

    pub fn solve(&self, observed: f64, opts: &NpaOptions) -> Result<f64, NpaError> {
        let observed = effective_observed(self.eta, self.classical, observed, opts.tol)?;
        self.program(observed, opts.constraint).solve(opts)
    }
}

/// Smallest swap fidelity with `cos θ|00⟩ + sin θ|11⟩` compatible with the
/// observed Bell value.
pub fn robustness_bound<T: Scalar>(
    fam: &BellFamily<T>,
    theta: f64,
    mu: f64,
    observed: f64,
    opts: &NpaOptions,
) -> Result<f64, NpaError> {
    FidelityProblem::new(fam, theta, mu)?.solve(observed, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomnessBound {
    /// `max_ab p(ab|xy)`.
    pub guess_prob: f64,
    /// `−log2(guess_prob)`.
    pub entropy_bits: f64,
    /// Per outcome pair, in the order `++, +−, −+, −−`.
    pub per_outcome: [f64; 4],
}

/// Upper bound on `max_ab p(ab|xy)` over the level-one relaxation, one SDP
/// per outcome pair.
pub fn randomness_bound<T: Scalar>(
    fam: &BellFamily<T>,
    observed: f64,
    input: (usize, usize),
    opts: &NpaOptions,
) -> Result<RandomnessBound, NpaError> {
    let observed = check_observed(fam, observed, opts.tol)?;
    let structure = MomentMatrixStructure::new(MomentBasis::local1());
    let bell = bell_value_functional(fam, &structure)?;
    let ax = Word::letter(Letter::new(crate::Party::A, input.0 as u8));
    let by = Word::letter(Letter::new(crate::Party::B, input.1 as u8));
    let mut per_outcome = [0.0; 4];
    for (k, (a, b)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .into_iter()
        .enumerate()
    {
        let proj = NcPolynomial::from_terms([
            (Word::identity(), 0.25),
            (ax.clone(), 0.25 * a),
            (by.clone(), 0.25 * b),
            (ax.mul(&by), 0.25 * a * b),
        ]);
        let objective = structure.functional(&proj)?;
        per_outcome[k] = MomentProgram::new(
            &structure,
            &objective,
            Sense::Maximize,
            &bell,
            observed,
            opts.constraint,
        )
        .solve(opts)?;
    }
    let guess_prob = per_outcome.iter().copied().fold(f64::MIN, f64::max).min(1.0);
    Ok(RandomnessBound {
        guess_prob,
        entropy_bits: -guess_prob.log2(),
        per_outcome,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint<R> {
    pub violation: f64,
    pub normalized: f64,
    pub result: R,
}

/// Fidelity bounds along a grid of normalized violations, solved in
/// parallel and returned in grid order.
pub fn robustness_sweep<T: Scalar>(
    fam: &BellFamily<T>,
    theta: f64,
    mu: f64,
    grid: &[f64],
    opts: &NpaOptions,
) -> Result<Vec<SweepPoint<f64>>, NpaError> {
    let fp = FidelityProblem::new(fam, theta, mu)?;
    grid.par_iter()
        .map(|&v| {
            let obs = observed_from_normalized(fam, v);
            Ok(SweepPoint {
                violation: obs,
                normalized: v,
                result: fp.solve(obs, opts)?,
            })
        })
        .collect()
}

pub fn randomness_sweep<T: Scalar>(
    fam: &BellFamily<T>,
    input: (usize, usize),
    grid: &[f64],
    opts: &NpaOptions,
) -> Result<Vec<SweepPoint<RandomnessBound>>, NpaError> {
    grid.par_iter()
        .map(|&v| {
            let obs = observed_from_normalized(fam, v);
            Ok(SweepPoint {
                violation: obs,
                normalized: v,
                result: randomness_bound(fam, obs, input, opts)?,
            })
        })
        .collect()
}

/// CSV with header `violation,V,fidelity_bound`, one row per grid point.
pub fn fidelity_csv(points: &[SweepPoint<f64>]) -> String {
    let mut out = String::from("violation,V,fidelity_bound\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", sig12(p.violation), sig12(p.normalized), sig12(p.result));
    }
    out
}

/// CSV with header `violation,V,guess_prob,entropy_bits`.
pub fn randomness_csv(points: &[SweepPoint<RandomnessBound>]) -> String {
    let mut out = String::from("violation,V,guess_prob,entropy_bits\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            sig12(p.violation),
            sig12(p.normalized),
            sig12(p.result.guess_prob),
            sig12(p.result.entropy_bits)
        );
    }
    out
}
