//! Self-testing and device-independent tools for the generalized tilted-CHSH
//! family of Bell inequalities.
//!
//! The algebraic layer ([`ncpoly`], [`bell`], [`sos`]) is generic over the
//! coefficient type, so identities can be checked exactly over rationals or
//! quickly in floating point. The numeric layer ([`qsim`], [`swap`], [`npa`])
//! works in `f64`.

pub mod bell;
pub mod format;
pub mod ncpoly;
pub mod npa;
pub mod qsim;
pub mod scalar;
pub mod sos;
pub mod swap;

pub use bell::{BellError, BellFamily, Protocol, ReferenceCase};
pub use ncpoly::{Letter, LetterAssignment, NcPolyError, NcPolynomial, Party, Word};
pub use scalar::{parse_rational, Scalar};

pub type C64 = num_complex::Complex64;
pub type Rational = num_rational::BigRational;
pub type Polynomial = NcPolynomial<f64>;
pub type ExactPolynomial = NcPolynomial<Rational>;
pub type Family = BellFamily<f64>;
pub type ExactFamily = BellFamily<Rational>;
