//! Primal-dual path-following with Nesterov-Todd scaling and a Mehrotra
//! predictor-corrector step.
//!
//! Every block is handled densely. The Schur complement
//! `M_ij = Σ_blocks tr(A_i W A_j W)` is formed from the sparse constraint
//! entries and factored with a dense Cholesky.

use nalgebra::{DMatrix, DVector};

use crate::problem::{IterationRecord, LinearFunctional, SdpProblem, SdpSolution, Sense, Status};
use crate::SdpError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bound on the relative primal residual, dual residual and duality gap.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100,
        }
    }
}

/// Iterations without progress after which the run is declared infeasible.
const STALL_WINDOW: usize = 20;
/// Iterate norm beyond which the run is declared divergent.
const DIVERGENCE_NORM: f64 = 1e13;
/// Refinement passes applied to each Newton direction.
const REFINEMENT_STEPS: usize = 2;

/// Symmetric constraint matrix stored as its full list of nonzeros (both
/// mirrored positions of an off-diagonal pair are present).
#[derive(Debug, Clone)]
struct SparseSym {
    entries: Vec<(usize, usize, usize, f64)>,
}

impl SparseSym {
    fn from_functional(f: &LinearFunctional) -> Self {
        let mut merged: Vec<(usize, usize, usize, f64)> = Vec::new();
        let mut push = |b: usize, r: usize, c: usize, v: f64| {
            if let Some(e) = merged
                .iter_mut()
                .find(|e| e.0 == b && e.1 == r && e.2 == c)
            {
                e.3 += v;
            } else {
                merged.push((b, r, c, v));
            }
        };
        for e in &f.entries {
            if e.row == e.col {
                push(e.block, e.row, e.col, e.coeff);
            } else {
                push(e.block, e.row, e.col, 0.5 * e.coeff);
                push(e.block, e.col, e.row, 0.5 * e.coeff);
            }
        }
        merged.retain(|e| e.3 != 0.0);
        Self { entries: merged }
    }

    fn inner(&self, blocks: &[DMatrix<f64>]) -> f64 {
        self.entries
            .iter()
            .map(|&(b, r, c, v)| v * blocks[b][(r, c)])
            .sum()
    }

    fn add_scaled_to(&self, alpha: f64, blocks: &mut [DMatrix<f64>]) {
        for &(b, r, c, v) in &self.entries {
            blocks[b][(r, c)] += alpha * v;
        }
    }

    fn scale(&mut self, s: f64) {
        for e in &mut self.entries {
            e.3 *= s;
        }
    }

    fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.3 * e.3).sum::<f64>().sqrt()
    }

    fn dense(&self, dims: &[usize]) -> DVector<f64> {
        let offsets: Vec<usize> = dims
            .iter()
            .scan(0, |acc, &n| {
                let o = *acc;
                *acc += n * n;
                Some(o)
            })
            .collect();
        let total: usize = dims.iter().map(|n| n * n).sum();
        let mut v = DVector::zeros(total);
        for &(b, r, c, x) in &self.entries {
            v[offsets[b] + r * dims[b] + c] += x;
        }
        v
    }
}

/// Result of the rank-revealing pass over the constraint rows.
struct Filtered {
    kept: Vec<usize>,
    dropped: Vec<usize>,
    inconsistent: bool,
}

/// Modified Gram-Schmidt over the constraint rows in their given order. A row
/// whose residual is below `1e-10 * ||row||` is dependent; its right-hand side
/// must then agree with the combination of earlier rows.
fn filter_rows(rows: &[SparseSym], rhs: &[f64], dims: &[usize]) -> Filtered {
    let mut basis: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut inconsistent = false;
    let rhs_scale = 1.0 + rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for (i, row) in rows.iter().enumerate() {
        let mut v = row.dense(dims);
        let mut beta = rhs[i];
        let norm0 = v.norm();
        for (q, qb) in &basis {
            let h = q.dot(&v);
            v.axpy(-h, q, 1.0);
            beta -= h * qb;
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= 1e-10 * norm0 {
            if beta.abs() > 1e-9 * rhs_scale {
                inconsistent = true;
            }
            dropped.push(i);
        } else {
            basis.push((v / norm, beta / norm));
            kept.push(i);
        }
    }
    Filtered {
        kept,
        dropped,
        inconsistent,
    }
}

struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: DVector<f64>,
}

/// NT scaling point `W` with `W Z W = X`, factored as `W = G G^T` so that
/// `G^-1 X G^-T = G^T Z G = diag(d)`.
fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let lx = x.clone().cholesky()?.l();
    let lz = z.clone().cholesky()?.l();
    let svd = (lz.transpose() * &lx).svd(false, true);
    let v = svd.v_t?.transpose();
    let d = svd.singular_values;
    if d.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return None;
    }
    let n = x.nrows();
    let lx_inv = lx
        .solve_lower_triangular(&DMatrix::identity(n, n))?;
    let d_isqrt = DMatrix::from_diagonal(&d.map(|s| 1.0 / s.sqrt()));
    let d_sqrt = DMatrix::from_diagonal(&d.map(|s| s.sqrt()));
    let g = &lx * &v * d_isqrt;
    let g_inv = d_sqrt * v.transpose() * lx_inv;
    let w = &g * g.transpose();
    Some(Scaling { g, g_inv, w, d })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

fn frob_inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob_norm(a: &[DMatrix<f64>]) -> f64 {
    frob_inner(a, a).sqrt()
}

/// Largest step `t` keeping `x + t dx` positive semidefinite (`INFINITY` if
/// unbounded). `x` must be positive definite.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(chol) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = chol.l();
    let Some(t) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(s) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    let mut s = s;
    symmetrize(&mut s);
    let lam_min = s
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lam_min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam_min
    }
}

struct Snapshot {
    merit: f64,
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    z: Vec<DMatrix<f64>>,
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    gap: f64,
}

struct Workspace {
    dims: Vec<usize>,
    a: Vec<SparseSym>,
    b: DVector<f64>,
    c: Vec<DMatrix<f64>>,
}

impl Workspace {
    fn zeros(&self) -> Vec<DMatrix<f64>> {
        self.dims.iter().map(|&n| DMatrix::zeros(n, n)).collect()
    }

    fn apply_a(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|ai| ai.inner(x)))
    }

    fn apply_at(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out = self.zeros();
        for (ai, &yi) in self.a.iter().zip(y.iter()) {
            ai.add_scaled_to(yi, &mut out);
        }
        out
    }

    fn schur(&self, scalings: &[Scaling]) -> DMatrix<f64> {
        let m = self.a.len();
        let mut schur = DMatrix::zeros(m, m);
        for j in 0..m {
            // P_j = W A_j W, block by block.
            let mut p = self.zeros();
            for &(b, r, c, v) in &self.a[j].entries {
                let w = &scalings[b].w;
                let col = w.column(r);
                let row = w.row(c);
                p[b].ger(v, &col, &row.transpose(), 1.0);
            }
            for i in j..m {
                let val = self.a[i].inner(&p);
                schur[(i, j)] = val;
                schur[(j, i)] = val;
            }
        }
        schur
    }

    /// Solves the NT Newton system for a given scaled complementarity
    /// right-hand side `rc` (one symmetric matrix per block).
    fn direction(
        &self,
        scalings: &[Scaling],
        chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
        rp: &DVector<f64>,
        rd: &[DMatrix<f64>],
        rc: &[DMatrix<f64>],
    ) -> (Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>) {
        let mut gegt = Vec::with_capacity(scalings.len());
        let mut wrdw = Vec::with_capacity(scalings.len());
        for (k, sc) in scalings.iter().enumerate() {
            let n = sc.d.len();
            let e = DMatrix::from_fn(n, n, |i, j| 2.0 * rc[k][(i, j)] / (sc.d[i] + sc.d[j]));
            gegt.push(&sc.g * e * sc.g.transpose());
            wrdw.push(&sc.w * &rd[k] * &sc.w);
        }
        let rhs = rp - self.apply_a(&gegt) + self.apply_a(&wrdw);
        let mut dy = chol.solve(&rhs);
        let atdy = self.apply_at(&dy);
        let mut dz: Vec<DMatrix<f64>> = rd.iter().zip(&atdy).map(|(r, a)| r - a).collect();
        let mut dx: Vec<DMatrix<f64>> = scalings
            .iter()
            .zip(gegt)
            .zip(&dz)
            .map(|((sc, ge), dzk)| {
                let mut m = ge - &sc.w * dzk * &sc.w;
                symmetrize(&mut m);
                m
            })
            .collect();
        // Iterative refinement against the unscaled system A dx = rp,
        // which the Schur solve loses once W is badly conditioned.
        for _ in 0..REFINEMENT_STEPS {
            let res = rp - self.apply_a(&dx);
            if res.norm() <= 1e-15 * (1.0 + rp.norm()) {
                break;
            }
            let ddy = chol.solve(&res);
            let atddy = self.apply_at(&ddy);
            for ((sc, dxk), (dzk, a)) in scalings.iter().zip(&mut dx).zip(dz.iter_mut().zip(&atddy)) {
                *dzk -= a;
                *dxk += &sc.w * a * &sc.w;
                symmetrize(dxk);
            }
            dy += ddy;
        }
        (dx, dy, dz)
    }
}

/// Solves `problem` to the relative tolerance in `options`.
///
/// Construction-time inconsistencies (bad indices, empty block list) are
/// errors. Numerical outcomes, including infeasibility and iteration limits,
/// come back as a solution with the corresponding [`Status`].
pub fn solve(problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let dims = problem.blocks.clone();
    let total_dim: usize = dims.iter().sum();
    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };

    let rows: Vec<SparseSym> = problem
        .constraints
        .iter()
        .map(|c| SparseSym::from_functional(&c.functional))
        .collect();
    let rhs: Vec<f64> = problem.constraints.iter().map(|c| c.rhs).collect();
    let filtered = filter_rows(&rows, &rhs, &dims);

    let mut c_blocks: Vec<DMatrix<f64>> = dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    SparseSym::from_functional(&problem.objective).add_scaled_to(sign, &mut c_blocks);

    if filtered.inconsistent {
        return Ok(SdpSolution {
            status: Status::Infeasible,
            objective: f64::NAN,
            dual_objective: f64::NAN,
            gap: f64::NAN,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            iterations: 0,
            primal: c_blocks.iter().map(|m| DMatrix::zeros(m.nrows(), m.ncols())).collect(),
            dual_slack: c_blocks,
            dual: vec![0.0; rows.len()],
            dropped_constraints: filtered.dropped,
            history: Vec::new(),
        });
    }

    let mut row_scale = Vec::with_capacity(filtered.kept.len());
    let mut a = Vec::with_capacity(filtered.kept.len());
    let mut b = DVector::zeros(filtered.kept.len());
    for (k, &i) in filtered.kept.iter().enumerate() {
        let mut row = rows[i].clone();
        let s = 1.0 / row.norm();
        row.scale(s);
        a.push(row);
        b[k] = rhs[i] * s;
        row_scale.push(s);
    }
    let work = Workspace {
        dims: dims.clone(),
        a,
        b,
        c: c_blocks,
    };
    let m = work.a.len();

    // Starting point X = xi I, Z = eta I, y = 0.
    let nmax = *dims.iter().max().unwrap() as f64;
    let c_norm = frob_norm(&work.c);
    let xi = (0..m)
        .map(|k| nmax * (1.0 + work.b[k].abs()))
        .fold(10.0_f64.max(nmax.sqrt()), f64::max);
    let eta = 10.0_f64.max(nmax.sqrt()).max(c_norm).max(1.0);
    let mut x: Vec<DMatrix<f64>> = dims.iter().map(|&n| DMatrix::identity(n, n) * xi).collect();
    let mut z: Vec<DMatrix<f64>> = dims.iter().map(|&n| DMatrix::identity(n, n) * eta).collect();
    let mut y = DVector::zeros(m);

    let b_norm = work.b.norm();
    let mut history = Vec::new();
    let mut status = Status::MaxIter;
    let mut best_merit = f64::INFINITY;
    let mut stall = 0usize;
    let mut iterations = 0usize;
    // Best iterate seen so far, returned if the run ends without converging.
    let mut best: Option<Snapshot> = None;

    let (mut pinf, mut dinf, mut gap, mut pobj, mut dobj);
    loop {
        let rp = &work.b - work.apply_a(&x);
        let aty = work.apply_at(&y);
        let rd: Vec<DMatrix<f64>> = work
            .c
            .iter()
            .zip(&aty)
            .zip(&z)
            .map(|((c, a), zk)| c - a - zk)
            .collect();
        pobj = frob_inner(&work.c, &x);
        dobj = work.b.dot(&y);
        let xz = frob_inner(&x, &z);
        let mu = xz / total_dim as f64;
        let denom = 1.0 + pobj.abs() + dobj.abs();
        pinf = rp.norm() / (1.0 + b_norm);
        dinf = frob_norm(&rd) / (1.0 + c_norm);
        gap = (pobj - dobj).abs() / denom;
        let compl = xz / denom;
        history.push(IterationRecord {
            primal_objective: sign * pobj,
            dual_objective: sign * dobj,
            primal_residual: pinf,
            dual_residual: dinf,
            mu,
            infeasibility_slack: frob_inner(&rd, &x).abs() + y.dot(&rp).abs(),
        });

        if pinf <= options.tol && dinf <= options.tol && gap.max(compl) <= options.tol {
            status = Status::Optimal;
            break;
        }
        if iterations >= options.max_iter {
            break;
        }

        let merit = pinf.max(dinf).max(gap).max(compl);
        if best.as_ref().map_or(true, |b| merit < b.merit) {
            best = Some(Snapshot {
                merit,
                x: x.clone(),
                y: y.clone(),
                z: z.clone(),
                pobj,
                dobj,
                pinf,
                dinf,
                gap,
            });
        }
        if merit < 0.9 * best_merit {
            best_merit = merit;
            stall = 0;
        } else {
            stall += 1;
        }
        let blown_up = frob_norm(&x) > DIVERGENCE_NORM || frob_norm(&z) > DIVERGENCE_NORM;
        if blown_up || stall >= STALL_WINDOW {
            if pinf.max(dinf) > options.tol.sqrt() || blown_up {
                status = Status::Infeasible;
            }
            break;
        }

        let Some(scalings) = x
            .iter()
            .zip(&z)
            .map(|(xk, zk)| nt_scaling(xk, zk))
            .collect::<Option<Vec<_>>>()
        else {
            break;
        };
        let schur = work.schur(&scalings);
        let chol = match schur.clone().cholesky() {
            Some(c) => c,
            None => {
                let reg = 1e-13 * schur.diagonal().amax().max(1.0);
                match (schur + DMatrix::identity(m, m) * reg).cholesky() {
                    Some(c) => c,
                    None => break,
                }
            }
        };

        // Predictor.
        let rc_aff: Vec<DMatrix<f64>> = scalings
            .iter()
            .map(|sc| DMatrix::from_diagonal(&sc.d.map(|v| -v * v)))
            .collect();
        let (dxa, _dya, dza) = work.direction(&scalings, &chol, &rp, &rd, &rc_aff);
        let ap_aff = x
            .iter()
            .zip(&dxa)
            .map(|(xk, d)| max_step(xk, d))
            .fold(1.0_f64, f64::min);
        let ad_aff = z
            .iter()
            .zip(&dza)
            .map(|(zk, d)| max_step(zk, d))
            .fold(1.0_f64, f64::min);
        let mut mu_aff = 0.0;
        for k in 0..dims.len() {
            let xa = &x[k] + &dxa[k] * ap_aff;
            let za = &z[k] + &dza[k] * ad_aff;
            mu_aff += xa.dot(&za);
        }
        mu_aff /= total_dim as f64;
        let sigma = if mu > 0.0 {
            (mu_aff / mu).max(0.0).powi(3).min(1.0)
        } else {
            0.0
        };

        // Corrector.
        let rc: Vec<DMatrix<f64>> = scalings
            .iter()
            .enumerate()
            .map(|(k, sc)| {
                let n = sc.d.len();
                let dxs = &sc.g_inv * &dxa[k] * sc.g_inv.transpose();
                let dzs = sc.g.transpose() * &dza[k] * &sc.g;
                let prod = &dxs * &dzs;
                DMatrix::from_fn(n, n, |i, j| {
                    let diag = if i == j {
                        sigma * mu - sc.d[i] * sc.d[i]
                    } else {
                        0.0
                    };
                    diag - 0.5 * (prod[(i, j)] + prod[(j, i)])
                })
            })
            .collect();
        let (dx, dy, dz) = work.direction(&scalings, &chol, &rp, &rd, &rc);
        let gamma = 0.9 + 0.09 * ap_aff.min(ad_aff);
        let ap = x
            .iter()
            .zip(&dx)
            .map(|(xk, d)| gamma * max_step(xk, d))
            .fold(1.0_f64, f64::min);
        let ad = z
            .iter()
            .zip(&dz)
            .map(|(zk, d)| gamma * max_step(zk, d))
            .fold(1.0_f64, f64::min);
        for k in 0..dims.len() {
            x[k] += &dx[k] * ap;
            z[k] += &dz[k] * ad;
            symmetrize(&mut x[k]);
            symmetrize(&mut z[k]);
        }
        y += dy * ad;
        iterations += 1;
    }

    if status != Status::Optimal {
        if let Some(b) = best {
            (x, y, z) = (b.x, b.y, b.z);
            (pobj, dobj, pinf, dinf, gap) = (b.pobj, b.dobj, b.pinf, b.dinf, b.gap);
        }
    }
    let mut dual = vec![0.0; rows.len()];
    for (k, &i) in filtered.kept.iter().enumerate() {
        dual[i] = sign * y[k] * row_scale[k];
    }
    Ok(SdpSolution {
        status,
        objective: sign * pobj,
        dual_objective: sign * dobj,
        gap,
        primal_residual: pinf,
        dual_residual: dinf,
        iterations,
        primal: x,
        dual_slack: z,
        dual,
        dropped_constraints: filtered.dropped,
        history,
    })
}
