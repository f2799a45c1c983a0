//! Conic back-end: lowers an [`SdpProblem`] to Clarabel's primal form
//! `min cᵀx  s.t.  Ax + s = b,  s ∈ K` with `K` a product of a nonnegative
//! orthant and scaled-triangle PSD cones.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT, SolverStatus, SupportedConeT,
};

use super::SdpProblem;
use crate::error::{Error, Result};

// Linking the system OpenBLAS that backs Clarabel's dense PSD-cone kernels.
extern crate openblas_src as _;

/// Environment variable overriding the solver's feasibility and gap tolerances.
pub const TOLERANCE_ENV: &str = "LPVP_SOLVER_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
}

#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iter: u32,
    pub verbose: bool,
    /// Post-solve bound on the largest eigenvalue of every `G(x) + εI`.
    pub check_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let tolerance =
            std::env::var(TOLERANCE_ENV).ok().and_then(|v| v.parse::<f64>().ok()).filter(|t| *t > 0.0).unwrap_or(1e-10);
        Self { tolerance, max_iter: 300, verbose: false, check_tolerance: 1e-6 }
    }
}

pub fn solve(problem: &SdpProblem) -> Result<SolveOutcome> {
    solve_with(problem, &SolverSettings::default())
}

pub fn solve_with(problem: &SdpProblem, settings: &SolverSettings) -> Result<SolveOutcome> {
    let n = problem.n_vars;
    let eps = problem.strictness_epsilon;
    // (row, col, value) triplets of A; b and the cone list built alongside.
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut b = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

    for &k in &problem.nonneg_indices {
        triplets.push((b.len(), k, -1.0));
        b.push(-eps);
    }
    for (row, bound) in &problem.linear_constraints {
        let r = b.len();
        triplets.extend(row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, v)| (r, k, *v)));
        b.push(*bound);
    }
    let orthant = b.len();
    if orthant > 0 {
        cones.push(NonnegativeConeT(orthant));
    }
    for block in &problem.psd_blocks {
        // s = svec(−εI − G₀ − Σ xₖGₖ) ⪰ 0
        let base = b.len();
        let mut rhs = -block.constant.clone();
        for i in 0..block.size {
            rhs[(i, i)] -= eps;
        }
        b.extend(svec(&rhs));
        for (k, g) in &block.slopes {
            for (r, v) in svec(g).into_iter().enumerate() {
                if v != 0.0 {
                    triplets.push((base + r, *k, v));
                }
            }
        }
        cones.push(PSDTriangleConeT(block.size));
    }

    let m = b.len();
    let a = csc_from_triplets(m, n, triplets);
    let p = CscMatrix::zeros((n, n));
    let clarabel_settings = DefaultSettings {
        verbose: settings.verbose,
        max_iter: settings.max_iter,
        tol_feas: settings.tolerance,
        tol_gap_abs: settings.tolerance,
        tol_gap_rel: settings.tolerance,
        // Decomposing the vertex blocks stalls the H∞ solves short of the
        // requested accuracy; the blocks are small enough to keep whole.
        chordal_decomposition_enable: false,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &problem.objective, &a, &b, &cones, clarabel_settings)
        .map_err(|e| Error::Solver(format!("{e:?}")))?;
    // Clarabel aborts with a panic when an iterate's eigendecomposition fails,
    // which happens on nearly infeasible problems; report it as a numerical
    // failure rather than tearing down the caller.
    let solved = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| solver.solve()));
    if solved.is_err() {
        let x = vec![0.0; n];
        return Ok(SolveOutcome { status: SolveStatus::NumericalFailure, objective: f64::NAN, x, iterations: 0 });
    }

    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => return Err(Error::IterationLimit),
        _ => SolveStatus::NumericalFailure,
    };
    let x = sol.x.clone();
    let status = if status == SolveStatus::Optimal && !satisfies(problem, &x, settings.check_tolerance) {
        SolveStatus::NumericalFailure
    } else {
        status
    };
    Ok(SolveOutcome { status, objective: problem.objective_value(&x), x, iterations: sol.iterations })
}

/// Checks every constraint of `problem` at `x` to tolerance `tol`.
fn satisfies(problem: &SdpProblem, x: &[f64], tol: f64) -> bool {
    let eps = problem.strictness_epsilon;
    let blocks_ok = problem.psd_blocks.iter().all(|blk| blk.max_eigenvalue(x) + eps <= tol);
    let nonneg_ok = problem.nonneg_indices.iter().all(|&k| x[k] >= eps - tol);
    let linear_ok = problem
        .linear_constraints
        .iter()
        .all(|(row, bound)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() <= bound + tol);
    blocks_ok && nonneg_ok && linear_ok
}

/// Upper triangle in column-major order, off-diagonals scaled by √2.
fn svec(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for col in 0..n {
        for row in 0..=col {
            out.push(if row == col { m[(row, col)] } else { m[(row, col)] * std::f64::consts::SQRT_2 });
        }
    }
    out
}

fn csc_from_triplets(m: usize, n: usize, mut triplets: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    triplets.sort_by_key(|&(r, c, _)| (c, r));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(triplets.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(triplets.len());
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in triplets {
        if last == Some((r, c)) {
            *nzval.last_mut().expect("previous entry") += v;
            continue;
        }
        colptr[c + 1] += 1;
        rowval.push(r);
        nzval.push(v);
        last = Some((r, c));
    }
    for j in 0..n {
        colptr[j + 1] += colptr[j];
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::{BlockBuilder, LinExpr, LmiProgram, Objective, Sense, VarKind};
    use nalgebra::{dmatrix, DMatrix};

    #[test]
    fn scalar_lower_bound() {
        // minimize x  s.t. x ≥ 1  (as the 1×1 block 1 − x ⪯ −ε)
        let mut p = LmiProgram::new();
        let x = p.declare_var("x", VarKind::Scalar);
        let blk = BlockBuilder::new(&[1])
            .set(0, 0, LinExpr::constant(dmatrix![1.0]).sub(&LinExpr::var(&x)).unwrap())
            .build("x ≥ 1", Sense::NegativeDefinite)
            .unwrap();
        p.add_block(blk).unwrap();
        let sdp = p.vectorize(Objective::Linear(LmiProgram::entry(&x, 0)), 1e-8).unwrap();
        let out = solve(&sdp).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.x[0] - 1.0).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn trace_minimization_hits_identity() {
        let mut p = LmiProgram::new();
        let q = p.declare_var("Q", VarKind::Symmetric(2));
        let blk = BlockBuilder::new(&[2])
            .set(0, 0, LinExpr::var(&q).sub(&LinExpr::identity(2)).unwrap())
            .build("Q ⪰ I", Sense::PositiveDefinite)
            .unwrap();
        p.add_block(blk).unwrap();
        let sdp = p.vectorize(Objective::Linear(LmiProgram::trace(&q)), 1e-8).unwrap();
        let out = solve(&sdp).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.objective - 2.0).abs() < 1e-6);
        let qm = sdp.var("Q").unwrap().extract(&out.x).unwrap();
        assert!((qm - DMatrix::<f64>::identity(2, 2)).amax() < 1e-6);
    }

    #[test]
    fn off_diagonal_packing_matches_cone_convention() {
        // minimize q₁₂ s.t. [[1, q₁₂, 0], [q₁₂, 1, 0.5], [0, 0.5, 1]] ⪰ 0: off-diagonal
        // terms must land in the right svec slots for the optimum to be right.
        let mut p = LmiProgram::new();
        let t = p.declare_var("t", VarKind::Scalar);
        let mut e = DMatrix::zeros(3, 3);
        e[(0, 1)] = 1.0;
        e[(1, 0)] = 1.0;
        let base = dmatrix![1.0, 0.0, 0.0; 0.0, 1.0, 0.5; 0.0, 0.5, 1.0];
        let blk = BlockBuilder::new(&[3])
            .set(0, 0, LinExpr::constant(base).add(&LinExpr::var(&t).times_matrix(&e).unwrap()).unwrap())
            .build("m", Sense::PositiveDefinite)
            .unwrap();
        p.add_block(blk).unwrap();
        let sdp = p.vectorize(Objective::Linear(LmiProgram::entry(&t, 0)), 1e-9).unwrap();
        let out = solve(&sdp).unwrap();
        // det = 1 − 0.25 − t² ≥ 0  ⇒  t ≥ −√0.75
        assert!((out.x[0] + 0.75f64.sqrt()).abs() < 1e-5, "{:?}", out.x);
    }

    #[test]
    fn infeasible_problem_is_reported() {
        // x ≥ 1 and x ≤ 0
        let mut p = LmiProgram::new();
        let x = p.declare_var("x", VarKind::Scalar);
        let blk = BlockBuilder::new(&[1])
            .set(0, 0, LinExpr::constant(dmatrix![1.0]).sub(&LinExpr::var(&x)).unwrap())
            .build("x ≥ 1", Sense::NegativeDefinite)
            .unwrap();
        p.add_block(blk).unwrap();
        p.add_linear_le(LmiProgram::entry(&x, 0), 0.0).unwrap();
        let sdp = p.vectorize(Objective::Linear(LmiProgram::entry(&x, 0)), 1e-8).unwrap();
        assert_eq!(solve(&sdp).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn trivially_feasible_constant_block() {
        let mut p = LmiProgram::new();
        let x = p.declare_var("x", VarKind::Scalar);
        let blk = BlockBuilder::new(&[2])
            .set(0, 0, LinExpr::identity(2).scale(-1.0))
            .build("−I", Sense::NegativeDefinite)
            .unwrap();
        p.add_block(blk).unwrap();
        p.add_nonneg(&x).unwrap();
        let sdp = p.vectorize(Objective::Linear(LmiProgram::entry(&x, 0)), 1e-8).unwrap();
        assert_eq!(solve(&sdp).unwrap().status, SolveStatus::Optimal);
    }
}
