//! Inner solvers for the shifted systems of one ADI step.
//!
//! Every right-hand side column `ℓ` is solved on its own from a zero initial
//! guess until `‖b_ℓ - Op x_ℓ‖ ≤ δ/r`, where `r` is the block width. Both
//! iterative methods are short-recurrence: the working set per column is a
//! fixed number of vectors. Reported residual norms are always recomputed
//! from the unpreconditioned system after termination.

mod bicgstab;
mod direct;
mod minres;

pub use bicgstab::bicgstab;
pub use direct::{direct_solve, direct_solve_with};
pub use minres::minres;

use rayon::prelude::*;

use crate::block::Block;
use crate::error::{Error, Result};
use crate::precond::IncompleteFactorization;
use crate::scalar::{c64, norm2};
use crate::sparse::ShiftedOperator;

pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

/// One block solve `Op X = rhs` to absolute tolerance `δ`.
#[derive(Debug, Clone, Copy)]
pub struct InnerSolveRequest<'a> {
    pub operator: &'a ShiftedOperator<'a>,
    pub rhs: &'a Block,
    pub abs_tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: &'a IncompleteFactorization,
}

impl<'a> InnerSolveRequest<'a> {
    pub fn new(
        operator: &'a ShiftedOperator<'a>,
        rhs: &'a Block,
        abs_tolerance: f64,
        preconditioner: &'a IncompleteFactorization,
    ) -> Self {
        Self {
            operator,
            rhs,
            abs_tolerance,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            preconditioner,
        }
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    /// Per-column threshold `δ/r`.
    pub fn column_tolerance(&self) -> f64 {
        self.abs_tolerance / self.rhs.ncols() as f64
    }

    fn validate(&self) -> Result<()> {
        let n = self.operator.dim();
        if self.rhs.nrows() != n {
            return Err(Error::dims("inner solve rhs", n, self.rhs.nrows()));
        }
        if self.preconditioner.dim() != n {
            return Err(Error::dims("inner solve preconditioner", n, self.preconditioner.dim()));
        }
        if !(self.abs_tolerance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "inner tolerance must be positive, got {}",
                self.abs_tolerance
            )));
        }
        crate::block::check_block(self.rhs, "inner solve rhs")
    }
}

#[derive(Debug, Clone)]
pub struct InnerSolveResult {
    pub solution: Block,
    /// Explicit residual `rhs - Op·solution`.
    pub residual: Block,
    pub achieved_residual_norms: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
}

impl InnerSolveResult {
    /// Frobenius norm of the residual block; bounded by `δ` on convergence.
    pub fn residual_norm(&self) -> f64 {
        self.achieved_residual_norms.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn total_iterations(&self) -> usize {
        self.iterations.iter().sum()
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }
}

/// Which iterative method to run for a given system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    BiCgStab,
    Minres,
}

/// MINRES for real symmetric operators with an SPD-capable preconditioner,
/// BiCGstab otherwise.
pub fn select_method(real_symmetric: bool, preconditioner: &IncompleteFactorization) -> Method {
    if real_symmetric && preconditioner.has_spd_form() {
        Method::Minres
    } else {
        Method::BiCgStab
    }
}

pub fn solve_iterative(method: Method, req: &InnerSolveRequest<'_>) -> Result<InnerSolveResult> {
    match method {
        Method::BiCgStab => bicgstab(req),
        Method::Minres => minres(req),
    }
}

pub(crate) struct ColumnOutcome {
    pub x: Vec<c64>,
    pub iterations: usize,
}

/// Runs `solve_column` over all columns in parallel and assembles the result
/// with explicitly recomputed residuals.
pub(crate) fn solve_columns<F>(req: &InnerSolveRequest<'_>, solve_column: F) -> Result<InnerSolveResult>
where
    F: Fn(&[c64], f64) -> ColumnOutcome + Sync,
{
    req.validate()?;
    let tol = req.column_tolerance();
    let n = req.rhs.nrows();
    let outcomes: Vec<(ColumnOutcome, Vec<c64>)> = (0..req.rhs.ncols())
        .into_par_iter()
        .map(|c| {
            let b = req.rhs.column(c);
            let out = solve_column(b.as_slice(), tol);
            let res = req.operator.residual(b.as_slice(), &out.x);
            (out, res)
        })
        .collect();
    let ncols = outcomes.len();
    let mut solution = Block::zeros(n, ncols);
    let mut residual = Block::zeros(n, ncols);
    let mut norms = Vec::with_capacity(ncols);
    let mut iterations = Vec::with_capacity(ncols);
    let mut converged = Vec::with_capacity(ncols);
    for (c, (out, res)) in outcomes.into_iter().enumerate() {
        let nrm = norm2(&res);
        solution.column_mut(c).copy_from_slice(&out.x);
        residual.column_mut(c).copy_from_slice(&res);
        norms.push(nrm);
        iterations.push(out.iterations);
        converged.push(nrm <= tol);
    }
    Ok(InnerSolveResult {
        solution,
        residual,
        achieved_residual_norms: norms,
        iterations,
        converged,
    })
}
