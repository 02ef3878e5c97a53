//! Polynomials in the four measurement letters `A0, A1, B0, B1`, reduced
//! modulo `x² = 1` and `[A_x, B_y] = 0`.
//!
//! Every [`Word`] is kept in normal form: its Alice letters, freely reduced,
//! followed by its Bob letters, freely reduced. Products, adjoints and
//! substitutions all return normal forms, so two polynomials are equal in the
//! quotient algebra exactly when their term maps are equal.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Scalar;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

/// One of the four binary observables. The derived order is `A0 < A1 < B0 < B1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    A0,
    A1,
    B0,
    B1,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::A0, Letter::A1, Letter::B0, Letter::B1];

    pub fn new(party: Party, index: u8) -> Self {
        match (party, index) {
            (Party::A, 0) => Letter::A0,
            (Party::A, 1) => Letter::A1,
            (Party::B, 0) => Letter::B0,
            (Party::B, 1) => Letter::B1,
            _ => panic!("measurement index must be 0 or 1, got {index}"),
        }
    }

    pub fn party(self) -> Party {
        match self {
            Letter::A0 | Letter::A1 => Party::A,
            Letter::B0 | Letter::B1 => Party::B,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Letter::A0 | Letter::B0 => 0,
            Letter::A1 | Letter::B1 => 1,
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.party() {
            Party::A => 'A',
            Party::B => 'B',
        };
        write!(f, "{p}{}", self.index())
    }
}

/// Appends `x` to a freely reduced sequence, cancelling `x x`.
fn push_reduced(seq: &mut Vec<u8>, x: u8) {
    if seq.last() == Some(&x) {
        seq.pop();
    } else {
        seq.push(x);
    }
}

/// A monomial in normal form. Ordered lexicographically on
/// `(alice part, bob part)`, which makes the identity the smallest word.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    a: Vec<u8>,
    b: Vec<u8>,
}

impl Word {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn letter(l: Letter) -> Self {
        Self::from_letters([l])
    }

    /// Normalizes an arbitrary product of letters.
    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> Self {
        let mut w = Word::default();
        for l in letters {
            match l.party() {
                Party::A => push_reduced(&mut w.a, l.index()),
                Party::B => push_reduced(&mut w.b, l.index()),
            }
        }
        w
    }

    /// Builds a word from per-party index sequences, reducing each.
    pub fn from_parts(a: &[u8], b: &[u8]) -> Self {
        let mut w = Word::default();
        for &x in a {
            push_reduced(&mut w.a, x);
        }
        for &x in b {
            push_reduced(&mut w.b, x);
        }
        w
    }

    pub fn a_part(&self) -> &[u8] {
        &self.a
    }

    pub fn b_part(&self) -> &[u8] {
        &self.b
    }

    pub fn is_identity(&self) -> bool {
        self.a.is_empty() && self.b.is_empty()
    }

    pub fn len(&self) -> usize {
        self.a.len() + self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_identity()
    }

    /// Reduced length of each party's part.
    pub fn degrees(&self) -> (usize, usize) {
        (self.a.len(), self.b.len())
    }

    /// Letters in normal-form order.
    pub fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        self.a
            .iter()
            .map(|&i| Letter::new(Party::A, i))
            .chain(self.b.iter().map(|&i| Letter::new(Party::B, i)))
    }

    pub fn mul(&self, rhs: &Word) -> Word {
        let mut w = self.clone();
        for &x in &rhs.a {
            push_reduced(&mut w.a, x);
        }
        for &x in &rhs.b {
            push_reduced(&mut w.b, x);
        }
        w
    }

    /// Reverses both parts; letters are self-adjoint.
    pub fn adjoint(&self) -> Word {
        Word {
            a: self.a.iter().rev().copied().collect(),
            b: self.b.iter().rev().copied().collect(),
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        for &i in &self.a {
            write!(f, "A{i}")?;
        }
        if !self.a.is_empty() && !self.b.is_empty() {
            write!(f, ".")?;
        }
        for &i in &self.b {
            write!(f, "B{i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NcPolyError {
    #[error("cannot parse {what} from {text:?}")]
    Parse { what: &'static str, text: String },
    #[error("letter {letter}: expected a {expected}x{expected} matrix, found {rows}x{cols}")]
    DimensionMismatch {
        letter: Letter,
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("state has dimension {found}, expected {expected}")]
    StateDimension { expected: usize, found: usize },
    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
}

impl FromStr for Word {
    type Err = NcPolyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || NcPolyError::Parse {
            what: "word",
            text: s.to_string(),
        };
        let s = s.trim();
        if s == "I" {
            return Ok(Word::identity());
        }
        let mut letters = Vec::new();
        let mut chars = s.chars().filter(|&c| c != '.');
        while let Some(p) = chars.next() {
            let party = match p {
                'A' => Party::A,
                'B' => Party::B,
                _ => return Err(err()),
            };
            let idx = match chars.next() {
                Some('0') => 0,
                Some('1') => 1,
                _ => return Err(err()),
            };
            letters.push(Letter::new(party, idx));
        }
        if letters.is_empty() {
            return Err(err());
        }
        Ok(Word::from_letters(letters))
    }
}

/// A finite linear combination of normal-form words. Zero coefficients are
/// never stored; the zero polynomial has no terms.
#[derive(Debug, Clone, PartialEq)]
pub struct NcPolynomial<T> {
    terms: BTreeMap<Word, T>,
}

impl<T: Scalar> Default for NcPolynomial<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Scalar> NcPolynomial<T> {
    pub fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Self::constant(T::one())
    }

    pub fn constant(c: T) -> Self {
        Self::monomial(Word::identity(), c)
    }

    pub fn letter(l: Letter) -> Self {
        Self::monomial(Word::letter(l), T::one())
    }

    pub fn monomial(word: Word, coeff: T) -> Self {
        let mut p = Self::zero();
        p.add_term(word, coeff);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Word, T)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (w, c) in terms {
            p.add_term(w, c);
        }
        p
    }

    /// Adds `coeff * word`, dropping the entry if it cancels.
    pub fn add_term(&mut self, word: Word, coeff: T) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(word) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().clone() + coeff;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &T)> {
        self.terms.iter()
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.terms.keys()
    }

    pub fn coefficient(&self, w: &Word) -> T {
        self.terms.get(w).cloned().unwrap_or_else(T::zero)
    }

    pub fn scale(&self, c: &T) -> Self {
        Self::from_terms(self.terms.iter().map(|(w, v)| (w.clone(), v.clone() * c.clone())))
    }

    /// Adjoint for real coefficients: each word is reversed.
    pub fn adjoint(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(w, c)| (w.adjoint(), c.clone())))
    }

    /// `p† p`.
    pub fn hermitian_square(&self) -> Self {
        &self.adjoint() * self
    }

    pub fn map_coefficients<U: Scalar>(&self, f: impl Fn(&T) -> U) -> NcPolynomial<U> {
        NcPolynomial::from_terms(self.terms.iter().map(|(w, c)| (w.clone(), f(c))))
    }

    pub fn to_f64(&self) -> NcPolynomial<f64> {
        self.map_coefficients(|c| c.to_f64_lossy())
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.to_f64_lossy().abs())
            .fold(0.0, f64::max)
    }

    /// Largest reduced word length per party, `(0, 0)` for the zero polynomial.
    pub fn degrees(&self) -> (usize, usize) {
        self.terms.keys().fold((0, 0), |(da, db), w| {
            let (a, b) = w.degrees();
            (da.max(a), db.max(b))
        })
    }

    /// Replaces every letter by a polynomial and re-normalizes. The images of
    /// Alice's letters must commute with those of Bob's for the result to be
    /// meaningful.
    pub fn substitute(&self, image: impl Fn(Letter) -> NcPolynomial<T>) -> Self {
        let images: Vec<NcPolynomial<T>> = Letter::ALL.iter().map(|&l| image(l)).collect();
        let mut out = Self::zero();
        for (w, c) in &self.terms {
            let mut acc = Self::constant(c.clone());
            for l in w.letters() {
                acc = &acc * &images[l as usize];
            }
            out += acc;
        }
        out
    }

    /// Evaluates with every letter replaced by a commuting scalar, as for a
    /// deterministic local strategy.
    pub fn evaluate_commuting(&self, value: impl Fn(Letter) -> T) -> T {
        self.terms.iter().fold(T::zero(), |acc, (w, c)| {
            let mono = w.letters().fold(T::one(), |m, l| m * value(l));
            acc + c.clone() * mono
        })
    }
}

impl<T: Scalar> From<Letter> for NcPolynomial<T> {
    fn from(l: Letter) -> Self {
        Self::letter(l)
    }
}

impl<T: Scalar> Add for &NcPolynomial<T> {
    type Output = NcPolynomial<T>;
    fn add(self, rhs: Self) -> NcPolynomial<T> {
        let mut out = self.clone();
        out += rhs.clone();
        out
    }
}

impl<T: Scalar> Add for NcPolynomial<T> {
    type Output = NcPolynomial<T>;
    fn add(mut self, rhs: Self) -> NcPolynomial<T> {
        self += rhs;
        self
    }
}

impl<T: Scalar> AddAssign for NcPolynomial<T> {
    fn add_assign(&mut self, rhs: Self) {
        for (w, c) in rhs.terms {
            self.add_term(w, c);
        }
    }
}

impl<T: Scalar> Sub for &NcPolynomial<T> {
    type Output = NcPolynomial<T>;
    fn sub(self, rhs: Self) -> NcPolynomial<T> {
        let mut out = self.clone();
        out -= rhs.clone();
        out
    }
}

impl<T: Scalar> Sub for NcPolynomial<T> {
    type Output = NcPolynomial<T>;
    fn sub(mut self, rhs: Self) -> NcPolynomial<T> {
        self -= rhs;
        self
    }
}

impl<T: Scalar> SubAssign for NcPolynomial<T> {
    fn sub_assign(&mut self, rhs: Self) {
        for (w, c) in rhs.terms {
            self.add_term(w, -c);
        }
    }
}

impl<T: Scalar> Neg for NcPolynomial<T> {
    type Output = NcPolynomial<T>;
    fn neg(self) -> NcPolynomial<T> {
        Self::from_terms(self.terms.into_iter().map(|(w, c)| (w, -c)))
    }
}

impl<T: Scalar> Mul for &NcPolynomial<T> {
    type Output = NcPolynomial<T>;
    fn mul(self, rhs: Self) -> NcPolynomial<T> {
        let mut out = NcPolynomial::zero();
        for (u, cu) in &self.terms {
            for (v, cv) in &rhs.terms {
                out.add_term(u.mul(v), cu.clone() * cv.clone());
            }
        }
        out
    }
}

impl<T: Scalar> Mul for NcPolynomial<T> {
    type Output = NcPolynomial<T>;
    fn mul(self, rhs: Self) -> NcPolynomial<T> {
        &self * &rhs
    }
}

/// Canonical text form, e.g. `2 * A0.B0 - 1 * A1.B1 + 1/2 * I`; terms appear
/// in word order and the zero polynomial prints as `0`.
impl<T: Scalar> fmt::Display for NcPolynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            match (k, neg) {
                (0, false) => write!(f, "{c} * {w}")?,
                (0, true) => write!(f, "-{} * {w}", c.abs())?,
                (_, false) => write!(f, " + {c} * {w}")?,
                (_, true) => write!(f, " - {} * {w}", c.abs())?,
            }
        }
        Ok(())
    }
}

impl<T: Scalar> FromStr for NcPolynomial<T> {
    type Err = NcPolyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || NcPolyError::Parse {
            what: "polynomial",
            text: s.to_string(),
        };
        let tokens: Vec<&str> = s.split_whitespace().collect();
        if tokens == ["0"] {
            return Ok(Self::zero());
        }
        let mut p = Self::zero();
        let mut i = 0;
        let mut sign_negative = false;
        while i < tokens.len() {
            if i > 0 {
                sign_negative = match tokens[i] {
                    "+" => false,
                    "-" => true,
                    _ => return Err(err()),
                };
                i += 1;
            }
            let (coeff, star, word) = match (tokens.get(i), tokens.get(i + 1), tokens.get(i + 2)) {
                (Some(c), Some(s), Some(w)) => (*c, *s, *w),
                _ => return Err(err()),
            };
            if star != "*" {
                return Err(err());
            }
            let c: T = coeff.parse().map_err(|_| err())?;
            let w: Word = word.parse()?;
            p.add_term(w, if sign_negative { -c } else { c });
            i += 3;
        }
        if tokens.is_empty() {
            return Err(err());
        }
        Ok(p)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl<T: Scalar> Serialize for NcPolynomial<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de, T: Scalar> Deserialize<'de> for NcPolynomial<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Concrete operators for each letter: Alice's act on the first tensor
/// factor, Bob's on the second.
#[derive(Debug, Clone, PartialEq)]
pub struct LetterAssignment {
    pub a: [DMatrix<C64>; 2],
    pub b: [DMatrix<C64>; 2],
}

impl LetterAssignment {
    pub fn matrix(&self, l: Letter) -> &DMatrix<C64> {
        match l {
            Letter::A0 => &self.a[0],
            Letter::A1 => &self.a[1],
            Letter::B0 => &self.b[0],
            Letter::B1 => &self.b[1],
        }
    }

    /// Local dimensions `(dA, dB)`, checking every matrix against them.
    pub fn dims(&self) -> Result<(usize, usize), NcPolyError> {
        let da = self.a[0].nrows();
        let db = self.b[0].nrows();
        for l in Letter::ALL {
            let m = self.matrix(l);
            let expected = match l.party() {
                Party::A => da,
                Party::B => db,
            };
            if m.nrows() != expected || m.ncols() != expected {
                return Err(NcPolyError::DimensionMismatch {
                    letter: l,
                    expected,
                    rows: m.nrows(),
                    cols: m.ncols(),
                });
            }
        }
        Ok((da, db))
    }
}

fn word_factors(w: &Word, assign: &LetterAssignment, da: usize, db: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let mut ma = DMatrix::<C64>::identity(da, da);
    for &i in w.a_part() {
        ma = ma * &assign.a[i as usize];
    }
    let mut mb = DMatrix::<C64>::identity(db, db);
    for &i in w.b_part() {
        mb = mb * &assign.b[i as usize];
    }
    (ma, mb)
}

/// `p(A_x ⊗ I, I ⊗ B_y) |ψ⟩`, with `ψ[i * dB + j]` the amplitude of `|i⟩|j⟩`.
pub fn apply<T: Scalar>(
    p: &NcPolynomial<T>,
    assign: &LetterAssignment,
    state: &DVector<C64>,
) -> Result<DVector<C64>, NcPolyError> {
    let (da, db) = assign.dims()?;
    if state.len() != da * db {
        return Err(NcPolyError::StateDimension {
            expected: da * db,
            found: state.len(),
        });
    }
    // Row-major reshape: psi_mat[(i, j)] = state[i * db + j].
    let psi = DMatrix::from_fn(da, db, |i, j| state[i * db + j]);
    let mut out = DMatrix::<C64>::zeros(da, db);
    for (w, c) in p.terms() {
        let (ma, mb) = word_factors(w, assign, da, db);
        out += (ma * &psi * mb.transpose()) * C64::new(c.to_f64_lossy(), 0.0);
    }
    Ok(DVector::from_fn(da * db, |k, _| out[(k / db, k % db)]))
}

/// The full matrix of `p` on the tensor-product space.
pub fn operator_matrix<T: Scalar>(
    p: &NcPolynomial<T>,
    assign: &LetterAssignment,
) -> Result<DMatrix<C64>, NcPolyError> {
    let (da, db) = assign.dims()?;
    let mut out = DMatrix::<C64>::zeros(da * db, da * db);
    for (w, c) in p.terms() {
        let (ma, mb) = word_factors(w, assign, da, db);
        out += ma.kronecker(&mb) * C64::new(c.to_f64_lossy(), 0.0);
    }
    Ok(out)
}

/// `⟨ψ| p |ψ⟩` for a normalized state.
pub fn substitute_numeric<T: Scalar>(
    p: &NcPolynomial<T>,
    assign: &LetterAssignment,
    state: &DVector<C64>,
) -> Result<C64, NcPolyError> {
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(NcPolyError::NotNormalized { norm });
    }
    let v = apply(p, assign, state)?;
    Ok(state.dotc(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use proptest::prelude::*;
    use rand::Rng;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::from_ratio(n, d)
    }

    fn l<T: Scalar>(x: Letter) -> NcPolynomial<T> {
        NcPolynomial::letter(x)
    }

    #[test]
    fn involution_and_commutation() {
        let a0: NcPolynomial<Q> = l(Letter::A0);
        assert_eq!(&a0 * &a0, NcPolynomial::one());
        let ab = &l::<Q>(Letter::A0) * &l(Letter::B0);
        let ba = &l::<Q>(Letter::B0) * &l(Letter::A0);
        assert_eq!(ab, ba);
        assert_eq!(ab.to_string(), "1 * A0.B0");
    }

    #[test]
    fn difference_of_squares_vanishes() {
        // (A0 + B1)(A0 - B1) = I - A0B1 + B1A0 - I = 0.
        let p = &l::<Q>(Letter::A0) + &l(Letter::B1);
        let m = &l::<Q>(Letter::A0) - &l(Letter::B1);
        assert!((&p * &m).is_zero());
    }

    #[test]
    fn adjoint_examples() {
        let ab = &l::<Q>(Letter::A0) * &l(Letter::B0);
        assert_eq!(ab.adjoint(), ab);
        let a01 = &l::<Q>(Letter::A0) * &l(Letter::A1);
        let a10 = &l::<Q>(Letter::A1) * &l(Letter::A0);
        assert_eq!(a01.adjoint(), a10);
    }

    #[test]
    fn zero_polynomial_is_accepted_everywhere() {
        let z = NcPolynomial::<Q>::zero();
        assert!(z.is_zero());
        assert!((&z * &l(Letter::A1)).is_zero());
        assert!(z.adjoint().is_zero());
        assert_eq!(z.degrees(), (0, 0));
        assert_eq!(z.to_string(), "0");
        assert_eq!("0".parse::<NcPolynomial<Q>>().unwrap(), z);
    }

    #[test]
    fn word_order_is_lexicographic() {
        let w = |s: &str| s.parse::<Word>().unwrap();
        let mut words = vec![w("B1"), w("A1"), w("A0A1"), w("I"), w("A0.B1"), w("A0")];
        words.sort();
        let shown: Vec<String> = words.iter().map(|x| x.to_string()).collect();
        assert_eq!(shown, ["I", "B1", "A0", "A0.B1", "A0A1", "A1"]);
    }

    #[test]
    fn canonical_text_form() {
        let p: NcPolynomial<Q> = NcPolynomial::from_terms([
            ("A0A1.B0".parse().unwrap(), q(2, 1)),
            ("I".parse().unwrap(), q(1, 2)),
            ("A1.B1".parse().unwrap(), q(-1, 1)),
            (".B0".parse().unwrap(), q(-3, 4)),
        ]);
        assert_eq!(p.to_string(), "1/2 * I - 3/4 * B0 + 2 * A0A1.B0 - 1 * A1.B1");
        assert_eq!(p.to_string().parse::<NcPolynomial<Q>>().unwrap(), p);
        assert!("1 * C0".parse::<NcPolynomial<Q>>().is_err());
        assert!("1 A0".parse::<NcPolynomial<Q>>().is_err());
    }

    #[test]
    fn unnormalized_words_parse_to_normal_form() {
        assert_eq!("B0A1A1A0".parse::<Word>().unwrap().to_string(), "A0.B0");
    }

    #[test]
    fn f32_coefficients() {
        let p: NcPolynomial<f32> = &l::<f32>(Letter::A0).scale(&0.5) + &l(Letter::B1);
        let sq = p.hermitian_square();
        assert!((sq.coefficient(&Word::identity()) - 1.25).abs() < 1e-6);
        assert_eq!(sq.coefficient(&"A0.B1".parse().unwrap()), 1.0);
    }

    fn pauli() -> (DMatrix<C64>, DMatrix<C64>) {
        let c = |x: f64| C64::new(x, 0.0);
        let z = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
        let x = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        (z, x)
    }

    fn qubit_assignment(mu: f64) -> LetterAssignment {
        let (z, x) = pauli();
        let b0 = &z * C64::new(mu.cos(), 0.0) + &x * C64::new(mu.sin(), 0.0);
        let b1 = &z * C64::new(mu.cos(), 0.0) - &x * C64::new(mu.sin(), 0.0);
        LetterAssignment {
            a: [z, x],
            b: [b0, b1],
        }
    }

    fn bell_state(theta: f64) -> DVector<C64> {
        DVector::from_vec(vec![
            C64::new(theta.cos(), 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(theta.sin(), 0.0),
        ])
    }

    fn tilted(alpha: f64, beta: f64) -> NcPolynomial<f64> {
        let [a0, a1, b0, b1] = Letter::ALL.map(NcPolynomial::<f64>::letter);
        let corr = &(&a0 * &b0) + &(&a0 * &b1);
        a0.scale(&beta) + corr.scale(&alpha) + &a1 * &b0 - &a1 * &b1
    }

    #[test]
    fn numeric_identity_and_bell_values() {
        let assign = qubit_assignment(std::f64::consts::FRAC_PI_4);
        let psi = bell_state(std::f64::consts::FRAC_PI_4);
        let one = substitute_numeric(&NcPolynomial::<f64>::one(), &assign, &psi).unwrap();
        assert!((one.re - 1.0).abs() < 1e-15);

        let chsh = substitute_numeric(&tilted(1.0, 0.0), &assign, &psi).unwrap();
        assert!((chsh.re - 2.0 * 2f64.sqrt()).abs() < 1e-12);

        let biased = substitute_numeric(
            &tilted(4.0 / 3.0, 0.0),
            &qubit_assignment((0.75f64).atan()),
            &psi,
        )
        .unwrap();
        assert!((biased.re - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors_name_the_letter() {
        let mut assign = qubit_assignment(0.3);
        assign.b[1] = DMatrix::identity(3, 3);
        let err = substitute_numeric(&tilted(1.0, 0.0), &assign, &bell_state(0.4)).unwrap_err();
        assert_eq!(
            err,
            NcPolyError::DimensionMismatch {
                letter: Letter::B1,
                expected: 2,
                rows: 3,
                cols: 3
            }
        );
        let assign = qubit_assignment(0.3);
        let short = DVector::from_element(3, C64::new(1.0 / 3f64.sqrt(), 0.0));
        assert!(matches!(
            substitute_numeric(&tilted(1.0, 0.0), &assign, &short),
            Err(NcPolyError::StateDimension { expected: 4, found: 3 })
        ));
    }

    fn arb_word() -> impl Strategy<Value = Vec<Letter>> {
        proptest::collection::vec(proptest::sample::select(Letter::ALL.to_vec()), 0..8)
    }

    fn arb_poly() -> impl Strategy<Value = NcPolynomial<Q>> {
        proptest::collection::vec((arb_word(), -5i64..=5, 1i64..=4), 0..5).prop_map(|terms| {
            NcPolynomial::from_terms(
                terms
                    .into_iter()
                    .map(|(w, n, d)| (Word::from_letters(w), q(n, d))),
            )
        })
    }

    proptest! {
        #[test]
        fn normal_form_ignores_cross_party_order(letters in arb_word(), seed in any::<u64>()) {
            // Move B-letters around while keeping each party's internal order.
            let a: Vec<Letter> = letters.iter().copied().filter(|l| l.party() == Party::A).collect();
            let b: Vec<Letter> = letters.iter().copied().filter(|l| l.party() == Party::B).collect();
            let mut shuffled = Vec::new();
            let (mut i, mut j, mut s) = (0, 0, seed);
            while i < a.len() || j < b.len() {
                let take_a = j >= b.len() || (i < a.len() && s & 1 == 0);
                s = s.rotate_right(1);
                if take_a { shuffled.push(a[i]); i += 1; } else { shuffled.push(b[j]); j += 1; }
            }
            prop_assert_eq!(Word::from_letters(shuffled), Word::from_letters(letters));
        }

        #[test]
        fn multiplication_is_associative(p in arb_poly(), r in arb_poly(), s in arb_poly()) {
            prop_assert_eq!(&(&p * &r) * &s, &p * &(&r * &s));
        }

        #[test]
        fn adjoint_is_an_involution(p in arb_poly()) {
            prop_assert_eq!(p.adjoint().adjoint(), p);
        }

        #[test]
        fn adjoint_is_linear_and_antimultiplicative(p in arb_poly(), r in arb_poly()) {
            prop_assert_eq!((&p + &r).adjoint(), &p.adjoint() + &r.adjoint());
            prop_assert_eq!((&p * &r).adjoint(), &r.adjoint() * &p.adjoint());
        }

        #[test]
        fn text_form_round_trips(p in arb_poly()) {
            prop_assert_eq!(p.to_string().parse::<NcPolynomial<Q>>().unwrap(), p);
        }
    }

    /// Random Hermitian involution `U diag(±1) U†` on a qubit.
    fn random_involution(rng: &mut impl rand::Rng) -> DMatrix<C64> {
        let m = DMatrix::from_fn(2, 2, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let u = m.qr().q();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(if rng.gen_bool(0.8) { -1.0 } else { 1.0 }, 0.0),
        ]));
        &u * d * u.adjoint()
    }

    #[test]
    fn numeric_substitution_is_multiplicative() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let assign = LetterAssignment {
                a: [random_involution(&mut rng), random_involution(&mut rng)],
                b: [random_involution(&mut rng), random_involution(&mut rng)],
            };
            let psi = DVector::from_fn(4, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let psi = &psi / C64::new(psi.norm(), 0.0);
            let rand_poly = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut p = NcPolynomial::<f64>::zero();
                for _ in 0..4 {
                    let len = rng.gen_range(0..5);
                    let w = Word::from_letters((0..len).map(|_| Letter::ALL[rng.gen_range(0..4)]));
                    p.add_term(w, rng.gen_range(-2.0..2.0));
                }
                p
            };
            let p = rand_poly(&mut rng);
            let r = rand_poly(&mut rng);
            let lhs = substitute_numeric(&(&p * &r), &assign, &psi).unwrap();
            let mp = operator_matrix(&p, &assign).unwrap();
            let mr = operator_matrix(&r, &assign).unwrap();
            let rhs = psi.dotc(&(mp * mr * &psi));
            prop_assert_close(lhs, rhs);
        }
    }

    fn prop_assert_close(a: C64, b: C64) {
        assert!((a - b).norm() < 1e-12, "{a} vs {b}");
    }
}
