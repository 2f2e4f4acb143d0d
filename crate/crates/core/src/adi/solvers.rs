use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{Error, Result};
use crate::krylov::{self, InnerSolveRequest, InnerSolveResult};
use crate::precond::{FactorKind, IncompleteFactorization, SparseLu};
use crate::scalar::c64;
use crate::sparse::{Mass, ShiftedOperator, SparseMatrix};

/// How preconditioners follow the shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerPolicy {
    /// Factor every distinct shifted matrix once and reuse it when the shift
    /// comes back.
    PerShift,
    /// Factor the unshifted matrix once.
    Fixed,
}

/// Inner solver settings for both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerSolvers {
    pub preconditioner_a: FactorKind,
    pub preconditioner_b: FactorKind,
    pub policy: PreconditionerPolicy,
    pub max_iterations: usize,
    /// Solve this side directly regardless of the strategy.
    pub force_direct_a: bool,
    pub force_direct_b: bool,
    /// Run the A-side and B-side solves of a step concurrently.
    pub concurrent_sides: bool,
}

impl Default for InnerSolvers {
    fn default() -> Self {
        Self {
            preconditioner_a: FactorKind::Ilut { droptol: 0.1 },
            preconditioner_b: FactorKind::Ilut { droptol: 0.1 },
            policy: PreconditionerPolicy::PerShift,
            max_iterations: krylov::DEFAULT_MAX_ITERATIONS,
            force_direct_a: false,
            force_direct_b: false,
            concurrent_sides: true,
        }
    }
}

impl InnerSolvers {
    pub fn with_preconditioners(mut self, a: FactorKind, b: FactorKind) -> Self {
        self.preconditioner_a = a;
        self.preconditioner_b = b;
        self
    }
}

// total number of stored LU entries kept across shifts
const LU_CACHE_ENTRIES: usize = 16_000_000;

fn shift_key(s: c64) -> (u64, u64) {
    (s.re.to_bits(), s.im.to_bits())
}

/// Solver for one side: `base + s·mass` (A side) or its adjoint (B side).
pub(crate) struct SideSolver<'p> {
    base: &'p SparseMatrix,
    mass: Mass<'p>,
    adjoint: bool,
    symmetric: bool,
    kind: FactorKind,
    policy: PreconditionerPolicy,
    max_iterations: usize,
    fixed: Option<Arc<IncompleteFactorization>>,
    preconds: HashMap<(u64, u64), Arc<IncompleteFactorization>>,
    lus: HashMap<(u64, u64), Arc<SparseLu<c64>>>,
    lu_entries: usize,
    pub factor_ms: f64,
    pub solve_ms: f64,
}

impl<'p> SideSolver<'p> {
    pub fn new(
        base: &'p SparseMatrix,
        mass: Option<&'p SparseMatrix>,
        adjoint: bool,
        kind: FactorKind,
        policy: PreconditionerPolicy,
        max_iterations: usize,
    ) -> Self {
        let mass = Mass::from_option(mass);
        let symmetric = base.is_symmetric(1e-14) && mass.is_symmetric(1e-14);
        Self {
            base,
            mass,
            adjoint,
            symmetric,
            kind,
            policy,
            max_iterations,
            fixed: None,
            preconds: HashMap::new(),
            lus: HashMap::new(),
            lu_entries: 0,
            factor_ms: 0.0,
            solve_ms: 0.0,
        }
    }

    fn operator(&self, shift: c64) -> Result<ShiftedOperator<'p>> {
        if self.adjoint {
            ShiftedOperator::adjoint(self.base, self.mass, shift)
        } else {
            ShiftedOperator::new(self.base, self.mass, shift)
        }
    }

    fn singular(shift: c64, e: Error) -> Error {
        match e {
            Error::ZeroPivot { row, value } => Error::SingularShift {
                re: shift.re,
                im: shift.im,
                reason: format!("zero pivot {value:e} in row {row}"),
            },
            Error::Breakdown(msg) => Error::SingularShift {
                re: shift.re,
                im: shift.im,
                reason: msg,
            },
            other => other,
        }
    }

    fn kind_for(&self, shift: c64) -> FactorKind {
        if self.kind.is_cholesky() && !(self.symmetric && shift.im == 0.0) {
            self.kind.lu_counterpart()
        } else {
            self.kind
        }
    }

    fn preconditioner(&mut self, shift: c64) -> Result<Arc<IncompleteFactorization>> {
        let start = Instant::now();
        let p = match self.policy {
            PreconditionerPolicy::Fixed => {
                if self.fixed.is_none() {
                    let zero = c64::new(0.0, 0.0);
                    let op = self.operator(zero)?;
                    let f = IncompleteFactorization::for_operator(&op, self.kind_for(zero))
                        .map_err(|e| Self::singular(zero, e))?;
                    self.fixed = Some(Arc::new(f));
                }
                self.fixed.clone().unwrap()
            }
            PreconditionerPolicy::PerShift => {
                let key = shift_key(shift);
                if let Some(p) = self.preconds.get(&key) {
                    p.clone()
                } else {
                    let op = self.operator(shift)?;
                    let f = IncompleteFactorization::for_operator(&op, self.kind_for(shift))
                        .map_err(|e| Self::singular(shift, e))?;
                    let f = Arc::new(f);
                    self.preconds.insert(key, f.clone());
                    f
                }
            }
        };
        self.factor_ms += start.elapsed().as_secs_f64() * 1e3;
        Ok(p)
    }

    fn lu(&mut self, shift: c64) -> Result<Arc<SparseLu<c64>>> {
        let key = shift_key(shift);
        if let Some(lu) = self.lus.get(&key) {
            return Ok(lu.clone());
        }
        let start = Instant::now();
        let op = self.operator(shift)?;
        let lu = SparseLu::factorize(&op.assemble()?).map_err(|e| Self::singular(shift, e))?;
        let lu = Arc::new(lu);
        if self.lu_entries + lu.fill() > LU_CACHE_ENTRIES {
            self.lus.clear();
            self.lu_entries = 0;
        }
        self.lu_entries += lu.fill();
        self.lus.insert(key, lu.clone());
        self.factor_ms += start.elapsed().as_secs_f64() * 1e3;
        Ok(lu)
    }

    /// Solves with the shifted operator; `tolerance = None` means direct.
    pub fn solve(&mut self, shift: c64, rhs: &Block, tolerance: Option<f64>) -> Result<InnerSolveResult> {
        let result = match tolerance {
            None => {
                let lu = self.lu(shift)?;
                let start = Instant::now();
                let op = self.operator(shift)?;
                let r = krylov::direct_solve_with(&lu, &op, rhs)?;
                self.solve_ms += start.elapsed().as_secs_f64() * 1e3;
                r
            }
            Some(tol) => {
                let prec = self.preconditioner(shift)?;
                let start = Instant::now();
                let op = self.operator(shift)?;
                let method = krylov::select_method(self.symmetric && shift.im == 0.0, &prec);
                let req = InnerSolveRequest::new(&op, rhs, tol, &prec).with_max_iterations(self.max_iterations);
                let r = krylov::solve_iterative(method, &req)?;
                if r.achieved_residual_norms.iter().any(|v| !v.is_finite()) {
                    return Err(Self::singular(
                        shift,
                        Error::Breakdown("non-finite inner iterate".into()),
                    ));
                }
                self.solve_ms += start.elapsed().as_secs_f64() * 1e3;
                r
            }
        };
        Ok(result)
    }
}
