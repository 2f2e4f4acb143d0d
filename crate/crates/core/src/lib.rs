//! Inexact low-rank ADI for large sparse generalized Sylvester equations
//!
//! ```text
//!     A X C + M X B = -f g^T
//! ```
//!
//! The solution is returned in factored form `X ≈ Z Γ Y^*`. Each ADI step
//! solves one shifted system per side with a short-recurrence Krylov method,
//! and the inner residual thresholds are chosen per step so the computed
//! residual stays within a prescribed distance of the exact-solve iteration.
//!
//! Module map:
//!
//! - [`sparse`]: CSR storage, products, shifted operators, Matrix Market I/O
//! - [`precond`]: incomplete factorizations and the full-fill sparse LU
//! - [`krylov`]: BiCGstab, MINRES and the direct reference solve
//! - [`shifts`]: Arnoldi Ritz values and heuristic shift selection
//! - [`adi`]: the outer iteration, tolerance strategies, diagnostics
//! - [`problems`]: convection-diffusion generators and random right-hand sides

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adi;
pub mod block;
pub mod error;
pub mod krylov;
pub mod precond;
pub mod problems;
pub mod scalar;
pub mod shifts;
pub mod sparse;

pub use block::Block;
pub use error::{Error, Result};
pub use scalar::{c64, Scalar};
pub use sparse::{CsrMatrix, SparseMatrix};
