//! Dense complex blocks of vectors (`n × r`, column-major).
//!
//! Residual factors, right-hand sides and solution factors all live in
//! [`Block`]s. Only small dense kernels are needed on top of nalgebra: thin
//! QR based spectral norms of low-rank products and column bookkeeping.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::c64;

pub type Block = DMatrix<c64>;

pub fn zeros(nrows: usize, ncols: usize) -> Block {
    Block::zeros(nrows, ncols)
}

pub fn from_real(m: &DMatrix<f64>) -> Block {
    m.map(|v| c64::new(v, 0.0))
}

/// Real part of a block; the imaginary part is dropped.
pub fn real_part(b: &Block) -> DMatrix<f64> {
    b.map(|v| v.re)
}

pub fn column_norms(b: &Block) -> Vec<f64> {
    b.column_iter().map(|c| c.norm()).collect()
}

/// All entries finite and at least one column.
pub fn check_block(b: &Block, context: &'static str) -> Result<()> {
    if b.ncols() == 0 {
        return Err(Error::InvalidInput(format!("{context}: block has no columns")));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{context}: non-finite entry")));
    }
    Ok(())
}

/// Horizontal concatenation. All blocks must share the row count.
pub fn hcat(blocks: &[Block], nrows: usize) -> Block {
    let ncols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Block::zeros(nrows, ncols);
    let mut off = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), nrows);
        out.columns_mut(off, b.ncols()).copy_from(b);
        off += b.ncols();
    }
    out
}

/// Triangular factor of a thin QR, `min(n, r) × r`.
fn thin_r(b: &Block) -> Block {
    b.clone().qr().r()
}

/// Spectral norm of `P Q^H` without forming it: thin QRs of both factors,
/// then the largest singular value of the small product `R_P R_Q^H`.
pub fn lowrank_spectral_norm(p: &Block, q: &Block) -> f64 {
    assert_eq!(p.ncols(), q.ncols(), "low-rank factors must have equal width");
    if p.ncols() == 0 || p.nrows() == 0 || q.nrows() == 0 {
        return 0.0;
    }
    let core = thin_r(p) * thin_r(q).adjoint();
    core.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Largest singular value of a (small) dense block.
pub fn spectral_norm(b: &Block) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    b.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Numerical column rank from the diagonal of a thin QR.
pub fn column_rank(b: &Block, rel_tol: f64) -> usize {
    if b.is_empty() {
        return 0;
    }
    let r = thin_r(b);
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].norm()).collect();
    let top = diag.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    diag.iter().filter(|d| **d > rel_tol * top).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> c64 {
        c64::new(re, 0.0)
    }

    #[test]
    fn rank_one_norm_is_product_of_norms() {
        let mut w = zeros(3, 1);
        w[(0, 0)] = c(1.0);
        let mut t = zeros(3, 1);
        t[(0, 0)] = c(2.0);
        assert!((lowrank_spectral_norm(&w, &t) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn orthonormal_times_diagonal() {
        let mut w = zeros(4, 2);
        w[(0, 0)] = c(1.0);
        w[(1, 1)] = c(1.0);
        let mut d = zeros(2, 2);
        d[(0, 0)] = c(3.0);
        d[(1, 1)] = c(4.0);
        let t = &w * d;
        assert!((lowrank_spectral_norm(&w, &t) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn hcat_preserves_columns() {
        let a = Block::from_element(2, 1, c(1.0));
        let b = Block::from_element(2, 2, c(2.0));
        let ab = hcat(&[a, b], 2);
        assert_eq!(ab.ncols(), 3);
        assert_eq!(ab[(1, 0)], c(1.0));
        assert_eq!(ab[(1, 2)], c(2.0));
    }

    #[test]
    fn rank_detects_dependent_columns() {
        let mut b = zeros(5, 2);
        for i in 0..5 {
            b[(i, 0)] = c(i as f64 + 1.0);
            b[(i, 1)] = c(2.0 * (i as f64 + 1.0));
        }
        assert_eq!(column_rank(&b, 1e-12), 1);
        b[(0, 1)] = c(7.0);
        assert_eq!(column_rank(&b, 1e-12), 2);
    }
}
