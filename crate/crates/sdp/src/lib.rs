//! Dense semidefinite programming for small block problems.
//!
//! The solver targets problems with a handful of blocks of dimension at most
//! [`MAX_BLOCK_DIM`] and up to a few hundred equality constraints, which covers
//! the Gram-matrix and moment-matrix programs used elsewhere in this workspace.
//! Results are deterministic: the same problem always yields the same iterates.

mod problem;
mod solver;

pub use problem::{
    Constraint, Entry, IterationRecord, LinearFunctional, Owner, SdpProblem, SdpSolution, Sense,
    Status, MAX_BLOCK_DIM,
};
pub use solver::{solve, SolverOptions};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SdpError {
    #[error("problem has no matrix blocks")]
    NoBlocks,
    #[error("block {block} has unsupported dimension {dim} (allowed 1..={max})", max = MAX_BLOCK_DIM)]
    BlockDimension { block: usize, dim: usize },
    #[error("{owner}: entry ({block}, {row}, {col}) is outside the upper triangle of its block")]
    EntryOutOfRange {
        owner: Owner,
        block: usize,
        row: usize,
        col: usize,
    },
    #[error("{owner}: non-finite coefficient")]
    NonFinite { owner: Owner },
    #[error("interchange format: {0}")]
    Interchange(String),
}
