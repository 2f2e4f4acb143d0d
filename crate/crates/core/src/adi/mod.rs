//! Low-rank ADI for `A X C + M X B = -f g^*` with inexact inner solves.
//!
//! One step with shift pair `(α_k, β_k)` and `γ_k = -(α_k + β_k)`:
//!
//! ```text
//!     z_k ≈ (A + β_k M)^{-1} w_{k-1}      w_k = w_{k-1} + γ_k M z_k
//!     y_k ≈ (B + α_k C)^{-*} t_{k-1}      t_k = t_{k-1} + conj(γ_k) C^T y_k
//! ```
//!
//! starting from `w_0 = f`, `t_0 = g`. The approximation is
//! `X_k = Z_k Γ_k Y_k^*` with `Γ_k = diag(γ_1, …, γ_k) ⊗ I_r`, and with exact
//! solves its residual is `w_k t_k^*`. Inexact solves open a gap between
//! that computed residual and the true one; the dynamic strategies size the
//! inner tolerances so the accumulated gap stays below a budget `ε`.

mod diagnostics;
mod iteration;
mod report;
mod solvers;
pub mod tolerance;

pub use diagnostics::{
    residual_gap, sigma_matrix, small_sylvester_defect, true_residual_norm, verify_factor_identity, TrueResidual,
};
pub use iteration::{run, AdiRun, AdiSolver, AdiState, LowRankSolution, StepStatus};
pub use report::{PhaseTimings, SolveReport, StepRecord, CSV_HEADER};
pub use solvers::{InnerSolvers, PreconditionerPolicy};
pub use tolerance::{choose_tolerances, gamma, ToleranceBounds, ToleranceDecision, C_BOUND};

use serde::{Deserialize, Serialize};

use crate::block::{self, Block};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Inner tolerance strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Same tolerance on both sides at every step.
    Fixed { delta: f64 },
    /// Split the per-step budget between both sides.
    DynamicMid,
    /// [`DynamicMid`](Self::DynamicMid) with back-looking budget.
    #[serde(rename = "dynamic_mid_bl")]
    DynamicMidBl,
    /// Hold the B side at its minimum tolerance, relax the A side.
    DynamicB,
    #[serde(rename = "dynamic_b_bl")]
    DynamicBBl,
    /// Sparse direct solves on both sides.
    ExactDirect,
    /// Direct A side, B side relaxed against `‖w_{k-1}‖`.
    #[serde(rename = "direct_a_iter_b")]
    DirectAIterB,
    /// Direct B side, A side relaxed against `‖t_{k-1}‖`.
    #[serde(rename = "iter_a_direct_b")]
    IterADirectB,
}

impl Strategy {
    pub fn is_back_looking(self) -> bool {
        matches!(
            self,
            Strategy::DynamicMidBl | Strategy::DynamicBBl | Strategy::DirectAIterB | Strategy::IterADirectB
        )
    }

    pub fn is_dynamic(self) -> bool {
        !matches!(self, Strategy::Fixed { .. } | Strategy::ExactDirect)
    }

    pub fn direct_a(self) -> bool {
        matches!(self, Strategy::ExactDirect | Strategy::DirectAIterB)
    }

    pub fn direct_b(self) -> bool {
        matches!(self, Strategy::ExactDirect | Strategy::IterADirectB)
    }

    pub fn label(self) -> String {
        match self {
            Strategy::Fixed { delta } => format!("Fixed({delta:e})"),
            Strategy::DynamicMid => "DynamicMid".into(),
            Strategy::DynamicMidBl => "DynamicMidBL".into(),
            Strategy::DynamicB => "DynamicB".into(),
            Strategy::DynamicBBl => "DynamicBBL".into(),
            Strategy::ExactDirect => "ExactDirect".into(),
            Strategy::DirectAIterB => "DirectA_IterB".into(),
            Strategy::IterADirectB => "IterA_DirectB".into(),
        }
    }

    /// File-name friendly label.
    pub fn slug(self) -> String {
        match self {
            Strategy::Fixed { delta } => format!("fixed_{delta:e}"),
            _ => self.label().to_lowercase(),
        }
    }
}

/// Outer iteration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdiConfig {
    /// Stop once `‖w t^*‖ < outer_tolerance · ‖f g^*‖`.
    pub outer_tolerance: f64,
    pub max_steps: usize,
    /// Safety factor in `(0, 1]` on the gap budget.
    pub xi: f64,
    pub bounds: ToleranceBounds,
    pub strategy: Strategy,
    /// Absolute gap budget `ε`; `None` means `outer_tolerance · ‖f g^*‖`.
    pub gap_budget: Option<f64>,
    /// Keep the inner residual blocks for the factor identities.
    pub keep_diagnostics: bool,
}

impl Default for AdiConfig {
    fn default() -> Self {
        let tol = 1e-8;
        Self {
            outer_tolerance: tol,
            max_steps: 50,
            xi: 1.0,
            bounds: ToleranceBounds::uniform(tol / 20.0, 0.1),
            strategy: Strategy::DynamicMidBl,
            gap_budget: None,
            keep_diagnostics: false,
        }
    }
}

impl AdiConfig {
    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    /// The fixed-tolerance reference `δ = τ̃/20`.
    pub fn reference_fixed(&self) -> Strategy {
        Strategy::Fixed {
            delta: self.outer_tolerance / 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.outer_tolerance > 0.0 && self.outer_tolerance < 1.0) {
            return bad(format!(
                "outer tolerance must lie in (0, 1), got {}",
                self.outer_tolerance
            ));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return bad(format!("xi must lie in (0, 1], got {}", self.xi));
        }
        let b = &self.bounds;
        if !(b.min_a > 0.0 && b.min_a <= b.max_a && b.min_b > 0.0 && b.min_b <= b.max_b) {
            return bad(format!("inconsistent tolerance bounds {b:?}"));
        }
        if let Strategy::Fixed { delta } = self.strategy {
            if !(delta > 0.0) {
                return bad(format!("fixed inner tolerance must be positive, got {delta}"));
            }
        }
        if let Some(g) = self.gap_budget {
            if !(g > 0.0) {
                return bad(format!("gap budget must be positive, got {g}"));
            }
        }
        Ok(())
    }
}

/// Coefficients and right-hand side factors of `A X C + M X B = -f g^*`.
/// `M` and `C` default to identities.
#[derive(Debug, Clone)]
pub struct SylvesterProblem {
    a: SparseMatrix,
    b: SparseMatrix,
    m: Option<SparseMatrix>,
    c: Option<SparseMatrix>,
    f: Block,
    g: Block,
}

impl SylvesterProblem {
    /// Checks shapes and that `f` and `g` have full column rank. All-zero
    /// factors are accepted and describe the trivial equation.
    pub fn new(
        a: SparseMatrix,
        b: SparseMatrix,
        m: Option<SparseMatrix>,
        c: Option<SparseMatrix>,
        f: Block,
        g: Block,
    ) -> Result<Self> {
        let n = a.nrows();
        let mdim = b.nrows();
        if !a.is_square() {
            return Err(Error::dims("A must be square", n, a.ncols()));
        }
        if !b.is_square() {
            return Err(Error::dims("B must be square", mdim, b.ncols()));
        }
        for (mat, dim, what) in [(&m, n, "M"), (&c, mdim, "C")] {
            if let Some(x) = mat {
                if x.nrows() != dim || x.ncols() != dim {
                    return Err(Error::InvalidStructure(format!(
                        "{what} is {}×{}, expected {dim}×{dim}",
                        x.nrows(),
                        x.ncols()
                    )));
                }
            }
        }
        if f.nrows() != n {
            return Err(Error::dims("rows of f", n, f.nrows()));
        }
        if g.nrows() != mdim {
            return Err(Error::dims("rows of g", mdim, g.nrows()));
        }
        if f.ncols() != g.ncols() {
            return Err(Error::dims("columns of g", f.ncols(), g.ncols()));
        }
        if f.ncols() == 0 {
            return Err(Error::InvalidInput("right-hand side rank must be at least 1".into()));
        }
        block::check_block(&f, "f")?;
        block::check_block(&g, "g")?;
        let trivial = f.iter().all(|v| v.norm() == 0.0) || g.iter().all(|v| v.norm() == 0.0);
        if !trivial {
            for (x, what) in [(&f, "f"), (&g, "g")] {
                let rank = block::column_rank(x, 1e-12);
                if rank < x.ncols() {
                    return Err(Error::InvalidInput(format!(
                        "{what} has numerical rank {rank} < {} columns",
                        x.ncols()
                    )));
                }
            }
        }
        Ok(Self { a, b, m, c, f, g })
    }

    /// Standard equation `A X + X B = -f g^*` from real factors.
    pub fn standard(
        a: SparseMatrix,
        b: SparseMatrix,
        f: &nalgebra::DMatrix<f64>,
        g: &nalgebra::DMatrix<f64>,
    ) -> Result<Self> {
        Self::new(a, b, None, None, block::from_real(f), block::from_real(g))
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn b(&self) -> &SparseMatrix {
        &self.b
    }

    pub fn m(&self) -> Option<&SparseMatrix> {
        self.m.as_ref()
    }

    pub fn c(&self) -> Option<&SparseMatrix> {
        self.c.as_ref()
    }

    pub fn f(&self) -> &Block {
        &self.f
    }

    pub fn g(&self) -> &Block {
        &self.g
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m_dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn rank(&self) -> usize {
        self.f.ncols()
    }

    /// `‖f g^*‖₂`
    pub fn rhs_norm(&self) -> f64 {
        block::lowrank_spectral_norm(&self.f, &self.g)
    }

    /// `M x` (identity when `M` is absent).
    pub fn apply_m(&self, x: &Block) -> Result<Block> {
        match &self.m {
            Some(m) => m.spmv(x),
            None => Ok(x.clone()),
        }
    }

    /// `C^T x` (identity when `C` is absent).
    pub fn apply_ct(&self, x: &Block) -> Result<Block> {
        match &self.c {
            Some(c) => c.spmv_transpose(x),
            None => Ok(x.clone()),
        }
    }
}


#[cfg(test)]
pub(crate) mod testkit;
