//! Problem and solution types, plus the JSON interchange format.
//!
//! A problem is stated in primal standard form over a block-diagonal
//! symmetric matrix variable `X = diag(X_1, ..., X_k)`:
//!
//! ```text
//!   min (or max)  <C, X>
//!   s.t.          <A_i, X> = b_i      i = 1..m
//!                 X_j ⪰ 0             j = 1..k
//! ```
//!
//! Linear functionals are given entry-wise on the upper triangle: an entry
//! `(block, row, col, coeff)` with `row <= col` contributes `coeff * X[row, col]`.
//! An off-diagonal coefficient therefore acts on the symmetric pair, not on
//! each of the two mirrored entries.

use serde::{Deserialize, Serialize};

use crate::SdpError;

/// Largest block dimension accepted by the solver.
pub const MAX_BLOCK_DIM: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub coeff: f64,
}

/// A linear functional on the block matrix variable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinearFunctional {
    pub entries: Vec<Entry>,
}

impl LinearFunctional {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `coeff * X_block[row, col]`. The pair is reordered onto the upper
    /// triangle, so `add(b, 2, 1, c)` and `add(b, 1, 2, c)` are the same term.
    pub fn add(&mut self, block: usize, row: usize, col: usize, coeff: f64) -> &mut Self {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        self.entries.push(Entry {
            block,
            row,
            col,
            coeff,
        });
        self
    }

    pub fn with(mut self, block: usize, row: usize, col: usize, coeff: f64) -> Self {
        self.add(block, row, col, coeff);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Evaluates the functional on explicit block matrices.
    pub fn evaluate(&self, blocks: &[nalgebra::DMatrix<f64>]) -> f64 {
        self.entries
            .iter()
            .map(|e| e.coeff * blocks[e.block][(e.row, e.col)])
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub functional: LinearFunctional,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub sense: Sense,
    pub objective: LinearFunctional,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>, sense: Sense) -> Self {
        Self {
            blocks,
            sense,
            objective: LinearFunctional::new(),
            constraints: Vec::new(),
        }
    }

    pub fn set_objective(&mut self, objective: LinearFunctional) -> &mut Self {
        self.objective = objective;
        self
    }

    pub fn add_constraint(&mut self, functional: LinearFunctional, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { functional, rhs });
        self
    }

    /// Checks block dimensions and every entry index.
    pub fn validate(&self) -> Result<(), SdpError> {
        if self.blocks.is_empty() {
            return Err(SdpError::NoBlocks);
        }
        for (block, &dim) in self.blocks.iter().enumerate() {
            if dim == 0 || dim > MAX_BLOCK_DIM {
                return Err(SdpError::BlockDimension { block, dim });
            }
        }
        let check = |f: &LinearFunctional, owner: Owner| -> Result<(), SdpError> {
            for e in &f.entries {
                let Some(&dim) = self.blocks.get(e.block) else {
                    return Err(SdpError::EntryOutOfRange {
                        owner,
                        block: e.block,
                        row: e.row,
                        col: e.col,
                    });
                };
                if e.row > e.col || e.col >= dim {
                    return Err(SdpError::EntryOutOfRange {
                        owner,
                        block: e.block,
                        row: e.row,
                        col: e.col,
                    });
                }
                if !e.coeff.is_finite() {
                    return Err(SdpError::NonFinite { owner });
                }
            }
            Ok(())
        };
        check(&self.objective, Owner::Objective)?;
        for (i, c) in self.constraints.iter().enumerate() {
            check(&c.functional, Owner::Constraint(i))?;
            if !c.rhs.is_finite() {
                return Err(SdpError::NonFinite {
                    owner: Owner::Constraint(i),
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SdpError> {
        let p: SdpProblem =
            serde_json::from_str(text).map_err(|e| SdpError::Interchange(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

/// Which functional an index error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    Objective,
    Constraint(usize),
}

impl std::fmt::Display for Owner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Owner::Objective => write!(f, "objective"),
            Owner::Constraint(i) => write!(f, "constraint {i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    MaxIter,
}

/// Per-iteration diagnostics. Objectives are reported in the problem's own
/// sense (a maximization reports the maximized value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub mu: f64,
    /// `|<R_d, X>| + |y·r_p|`: the amount by which infeasible iterates may
    /// violate weak duality.
    pub infeasibility_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: Status,
    /// Primal objective value in the problem's sense.
    pub objective: f64,
    pub dual_objective: f64,
    /// Relative duality gap `|p - d| / (1 + |p| + |d|)`.
    pub gap: f64,
    /// Relative primal residual `||b - A(X)|| / (1 + ||b||)`.
    pub primal_residual: f64,
    /// Relative dual residual `||C - A*(y) - Z|| / (1 + ||C||)`.
    pub dual_residual: f64,
    pub iterations: usize,
    /// Primal blocks, row-major.
    #[serde(with = "block_serde")]
    pub primal: Vec<nalgebra::DMatrix<f64>>,
    /// Dual slack blocks `Z`, row-major.
    #[serde(with = "block_serde")]
    pub dual_slack: Vec<nalgebra::DMatrix<f64>>,
    /// One multiplier per constraint of the original problem (dropped redundant
    /// rows get zero). For a maximization the sign is chosen so that
    /// `dual_objective = b·y` holds.
    pub dual: Vec<f64>,
    /// Indices of constraints removed as linearly dependent.
    pub dropped_constraints: Vec<usize>,
    pub history: Vec<IterationRecord>,
}

impl SdpSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SdpError> {
        serde_json::from_str(text).map_err(|e| SdpError::Interchange(e.to_string()))
    }
}

mod block_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(blocks: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Vec<f64>>> = blocks
            .iter()
            .map(|m| {
                (0..m.nrows())
                    .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                    .collect()
            })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        let rows: Vec<Vec<Vec<f64>>> = Vec::deserialize(d)?;
        rows.into_iter()
            .map(|block| {
                let n = block.len();
                if block.iter().any(|r| r.len() != n) {
                    return Err(serde::de::Error::custom("block is not square"));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| block[i][j]))
            })
            .collect()
    }
}
