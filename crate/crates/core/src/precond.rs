//! Incomplete factorizations of assembled shifted matrices, applied as right
//! preconditioners, and the full-fill sparse LU used for direct solves.
//!
//! All factorizations run in natural order without pivoting. Threshold
//! dropping is row-scaled: with `τ_i = droptol·‖a_i‖₂`, an LU multiplier
//! `l_ik` is dropped when `|l_ik·u_kk| < τ_i` and an entry `u_ij` when
//! `|u_ij| < τ_i`. Cholesky entries scale like `√a`, so IC variants compare
//! `|l_ij|` against `τ_i / √|a_ii|`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{Error, Result};
use crate::scalar::{c64, Scalar};
use crate::sparse::{ComplexCsr, CsrMatrix, ShiftedOperator};

/// Which incomplete factorization to build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorKind {
    Ilu0,
    Ilut { droptol: f64 },
    Ic0,
    Ict { droptol: f64 },
    Jacobi,
    None,
}

impl FactorKind {
    pub fn is_cholesky(&self) -> bool {
        matches!(self, FactorKind::Ic0 | FactorKind::Ict { .. })
    }

    /// The LU counterpart of a Cholesky kind, for non-Hermitian operators.
    pub fn lu_counterpart(&self) -> FactorKind {
        match *self {
            FactorKind::Ic0 => FactorKind::Ilu0,
            FactorKind::Ict { droptol } => FactorKind::Ilut { droptol },
            k => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fill {
    Pattern,
    Threshold(f64),
    Full,
}

/// Lower factor with unit diagonal (strict part stored) and upper factor
/// with the diagonal as the first entry of every row.
#[derive(Debug, Clone)]
struct LuFactors<T> {
    l: CsrMatrix<T>,
    u: CsrMatrix<T>,
}

fn factor_lu<T: Scalar>(a: &CsrMatrix<T>, fill: Fill) -> Result<LuFactors<T>> {
    if !a.is_square() {
        return Err(Error::dims(
            "incomplete LU: matrix must be square",
            a.nrows(),
            a.ncols(),
        ));
    }
    let n = a.nrows();
    let row_norms = a.row_norms();

    let mut l_ptr = vec![0usize];
    let mut l_idx = Vec::new();
    let mut l_val: Vec<T> = Vec::new();
    let mut u_ptr = vec![0usize];
    let mut u_idx = Vec::new();
    let mut u_val: Vec<T> = Vec::new();

    let mut work = vec![T::zero(); n];
    let mut stamp = vec![usize::MAX; n];
    let mut pattern: Vec<usize> = Vec::new();
    let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();
    let mut upper: Vec<(usize, T)> = Vec::new();

    for i in 0..n {
        pattern.clear();
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            work[j] = v;
            stamp[j] = i;
            pattern.push(j);
            if j < i {
                heap.push(Reverse(j));
            }
        }
        let tau = match fill {
            Fill::Threshold(d) => d * row_norms[i],
            _ => 0.0,
        };

        while let Some(Reverse(k)) = heap.pop() {
            let wk = work[k];
            let ukk = u_val[u_ptr[k]];
            if let Fill::Threshold(_) = fill {
                if wk.abs() < tau {
                    work[k] = T::zero();
                    continue;
                }
            }
            if wk == T::zero() {
                continue;
            }
            let lik = wk / ukk;
            work[k] = lik;
            l_idx.push(k);
            l_val.push(lik);
            // skip the diagonal, the first entry of U's row k
            for p in u_ptr[k] + 1..u_ptr[k + 1] {
                let j = u_idx[p];
                let upd = lik * u_val[p];
                if stamp[j] == i {
                    work[j] -= upd;
                } else if fill != Fill::Pattern {
                    stamp[j] = i;
                    work[j] = -upd;
                    pattern.push(j);
                    if j < i {
                        heap.push(Reverse(j));
                    }
                }
            }
        }
        l_ptr.push(l_idx.len());

        upper.clear();
        let mut diag = None;
        for &j in &pattern {
            if j == i {
                diag = Some(work[j]);
            } else if j > i {
                let v = work[j];
                if !matches!(fill, Fill::Threshold(_)) || v.abs() >= tau {
                    upper.push((j, v));
                }
            }
        }
        let d = diag.unwrap_or_else(T::zero);
        if !(d.abs() > 1e-14 * row_norms[i]) || !d.is_finite() {
            return Err(Error::ZeroPivot { row: i, value: d.abs() });
        }
        upper.sort_unstable_by_key(|e| e.0);
        u_idx.push(i);
        u_val.push(d);
        for &(j, v) in &upper {
            u_idx.push(j);
            u_val.push(v);
        }
        u_ptr.push(u_idx.len());
    }
    Ok(LuFactors {
        l: CsrMatrix::from_parts_unchecked(n, n, l_ptr, l_idx, l_val),
        u: CsrMatrix::from_parts_unchecked(n, n, u_ptr, u_idx, u_val),
    })
}

/// `x ← L^{-1} x` for unit lower `L` stored without its diagonal.
fn solve_unit_lower<T: Scalar>(l: &CsrMatrix<T>, x: &mut [c64]) {
    for i in 0..l.nrows() {
        let (cols, vals) = l.row(i);
        let mut acc = x[i];
        for (&j, &v) in cols.iter().zip(vals) {
            acc -= v.mul_c(x[j]);
        }
        x[i] = acc;
    }
}

/// `x ← L^{-1} x` for lower `L` with the diagonal as last entry of each row.
fn solve_lower_diag_last<T: Scalar>(l: &CsrMatrix<T>, x: &mut [c64]) {
    for i in 0..l.nrows() {
        let (cols, vals) = l.row(i);
        let last = cols.len() - 1;
        let mut acc = x[i];
        for (&j, &v) in cols[..last].iter().zip(&vals[..last]) {
            acc -= v.mul_c(x[j]);
        }
        x[i] = acc / vals[last].to_c64();
    }
}

/// `x ← U^{-1} x` for upper `U` with the diagonal first in each row.
fn solve_upper_diag_first<T: Scalar>(u: &CsrMatrix<T>, x: &mut [c64]) {
    for i in (0..u.nrows()).rev() {
        let (cols, vals) = u.row(i);
        let mut acc = x[i];
        for (&j, &v) in cols[1..].iter().zip(&vals[1..]) {
            acc -= v.mul_c(x[j]);
        }
        x[i] = acc / vals[0].to_c64();
    }
}

/// Incomplete Cholesky `L L^H ≈ a` of a Hermitian positive definite matrix.
/// Rows of the returned factor end with the (real, positive) diagonal.
fn factor_cholesky(a: &ComplexCsr, fill: Fill) -> Result<ComplexCsr> {
    let n = a.nrows();
    let row_norms = a.row_norms();
    let diag = a.diagonal();

    let mut l_ptr = vec![0usize];
    let mut l_idx = Vec::new();
    let mut l_val: Vec<c64> = Vec::new();
    // column view of the finished rows: cols[j] = [(row, l_row_j)]
    let mut columns: Vec<Vec<(usize, c64)>> = vec![Vec::new(); n];
    let mut ldiag = vec![0.0f64; n];

    let zero = c64::new(0.0, 0.0);
    let mut work = vec![zero; n];
    let mut stamp = vec![usize::MAX; n];
    let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();
    let mut row: Vec<(usize, c64)> = Vec::new();

    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j < i {
                work[j] = v;
                stamp[j] = i;
                heap.push(Reverse(j));
            }
        }
        let tau = match fill {
            Fill::Threshold(d) => d * row_norms[i] / diag[i].abs().sqrt(),
            _ => 0.0,
        };
        let mut d = diag[i].re;
        row.clear();
        while let Some(Reverse(j)) = heap.pop() {
            let lij = work[j] / ldiag[j];
            if lij.norm() < tau || lij == zero {
                continue;
            }
            d -= lij.norm_sqr();
            row.push((j, lij));
            for &(k, lkj) in &columns[j] {
                // entries of column j below the diagonal, all rows < i
                let upd = lij * lkj.conj();
                if stamp[k] == i {
                    work[k] -= upd;
                } else if fill != Fill::Pattern {
                    stamp[k] = i;
                    work[k] = -upd;
                    heap.push(Reverse(k));
                }
            }
        }
        if !(d > 1e-14 * row_norms[i]) || !d.is_finite() {
            return Err(Error::Breakdown(format!(
                "incomplete Cholesky: non-positive pivot {d:e} at row {i}"
            )));
        }
        let lii = d.sqrt();
        ldiag[i] = lii;
        for &(j, v) in &row {
            l_idx.push(j);
            l_val.push(v);
            columns[j].push((i, v));
        }
        l_idx.push(i);
        l_val.push(c64::new(lii, 0.0));
        l_ptr.push(l_idx.len());
    }
    Ok(ComplexCsr::from_parts_unchecked(n, n, l_ptr, l_idx, l_val))
}

#[derive(Debug, Clone)]
enum Repr {
    Identity,
    Jacobi {
        inv_diag: Vec<c64>,
    },
    Lu(LuFactors<c64>),
    Cholesky {
        l: ComplexCsr,
        lh: ComplexCsr,
        negated: bool,
    },
}

/// An incomplete factorization of one assembled shifted matrix.
#[derive(Debug, Clone)]
pub struct IncompleteFactorization {
    kind: FactorKind,
    shift: c64,
    dim: usize,
    repr: Repr,
}

fn is_hermitian(a: &ComplexCsr) -> bool {
    let scale = a.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let h = a.conj_transpose();
    (0..a.nrows()).all(|i| {
        let (cols, vals) = a.row(i);
        cols.iter()
            .zip(vals)
            .all(|(&j, &v)| (v - h.get(i, j)).norm() <= 1e-12 * scale)
    }) && (0..h.nrows()).all(|i| {
        let (cols, vals) = h.row(i);
        cols.iter()
            .zip(vals)
            .all(|(&j, &v)| (v - a.get(i, j)).norm() <= 1e-12 * scale)
    })
}

impl IncompleteFactorization {
    /// Factors `matrix` (square, assembled).
    ///
    /// Cholesky kinds require a Hermitian matrix with a definite diagonal;
    /// a negative definite matrix is negated before factoring.
    pub fn factorize(matrix: &ComplexCsr, kind: FactorKind) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::dims(
                "factorize: matrix must be square",
                matrix.nrows(),
                matrix.ncols(),
            ));
        }
        let dim = matrix.nrows();
        let repr = match kind {
            FactorKind::None => Repr::Identity,
            FactorKind::Jacobi => {
                let diag = matrix.diagonal();
                let norms = matrix.row_norms();
                let mut inv_diag = Vec::with_capacity(dim);
                for (i, d) in diag.into_iter().enumerate() {
                    if !(d.norm() > 1e-14 * norms[i]) {
                        return Err(Error::ZeroPivot {
                            row: i,
                            value: d.norm(),
                        });
                    }
                    inv_diag.push(d.inv());
                }
                Repr::Jacobi { inv_diag }
            }
            FactorKind::Ilu0 => Repr::Lu(factor_lu(matrix, Fill::Pattern)?),
            FactorKind::Ilut { droptol } => Repr::Lu(factor_lu(matrix, fill_for(droptol))?),
            FactorKind::Ic0 | FactorKind::Ict { .. } => {
                if !is_hermitian(matrix) {
                    return Err(Error::InvalidInput(
                        "incomplete Cholesky needs a Hermitian matrix".into(),
                    ));
                }
                let diag = matrix.diagonal();
                let negated = diag.iter().all(|d| d.re < 0.0);
                let owned;
                let target = if negated {
                    owned = matrix.scale(c64::new(-1.0, 0.0));
                    &owned
                } else {
                    matrix
                };
                let fill = match kind {
                    FactorKind::Ict { droptol } => fill_for(droptol),
                    _ => Fill::Pattern,
                };
                let l = factor_cholesky(target, fill)?;
                let lh = l.conj_transpose();
                Repr::Cholesky { l, lh, negated }
            }
        };
        Ok(Self {
            kind,
            shift: c64::new(0.0, 0.0),
            dim,
            repr,
        })
    }

    /// Assembles and factors a shifted operator, remembering its shift.
    pub fn for_operator(op: &ShiftedOperator<'_>, kind: FactorKind) -> Result<Self> {
        let mut f = Self::factorize(&op.assemble()?, kind)?;
        f.shift = op.shift();
        Ok(f)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            kind: FactorKind::None,
            shift: c64::new(0.0, 0.0),
            dim,
            repr: Repr::Identity,
        }
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn shift(&self) -> c64 {
        self.shift
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether a symmetric positive definite form exists (see
    /// [`apply_spd`](Self::apply_spd)).
    pub fn has_spd_form(&self) -> bool {
        match &self.repr {
            Repr::Identity | Repr::Cholesky { .. } => true,
            Repr::Jacobi { inv_diag } => inv_diag.iter().all(|d| d.im == 0.0),
            Repr::Lu(_) => false,
        }
    }

    /// `x ← P x` with `P ≈ matrix^{-1}`.
    pub fn apply_in_place(&self, x: &mut [c64]) {
        match &self.repr {
            Repr::Identity => {}
            Repr::Jacobi { inv_diag } => {
                for (xi, d) in x.iter_mut().zip(inv_diag) {
                    *xi *= d;
                }
            }
            Repr::Lu(f) => {
                solve_unit_lower(&f.l, x);
                solve_upper_diag_first(&f.u, x);
            }
            Repr::Cholesky { l, lh, negated } => {
                solve_lower_diag_last(l, x);
                solve_upper_diag_first(lh, x);
                if *negated {
                    for xi in x.iter_mut() {
                        *xi = -*xi;
                    }
                }
            }
        }
    }

    /// `x ← P₊ x` with `P₊` Hermitian positive definite, approximating
    /// `|matrix|^{-1}`. Used by MINRES on definite or indefinite operators.
    pub fn apply_spd_in_place(&self, x: &mut [c64]) {
        match &self.repr {
            Repr::Identity => {}
            Repr::Jacobi { inv_diag } => {
                for (xi, d) in x.iter_mut().zip(inv_diag) {
                    *xi *= d.re.abs();
                }
            }
            Repr::Cholesky { l, lh, .. } => {
                solve_lower_diag_last(l, x);
                solve_upper_diag_first(lh, x);
            }
            Repr::Lu(_) => panic!("LU preconditioner has no SPD form"),
        }
    }

    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        let mut y = x.to_vec();
        self.apply_in_place(&mut y);
        y
    }

    /// Applies the preconditioner to every column of a block.
    pub fn apply_right_preconditioner(&self, x: &Block) -> Result<Block> {
        if x.nrows() != self.dim {
            return Err(Error::dims("apply_right_preconditioner", self.dim, x.nrows()));
        }
        let mut y = x.clone();
        for mut col in y.column_iter_mut() {
            self.apply_in_place(col.as_mut_slice());
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Breakdown("singular triangular factor".into()));
        }
        Ok(y)
    }

    /// Lower and upper factors as dense matrices (small-case inspection).
    pub fn dense_factors(&self) -> Option<(nalgebra::DMatrix<c64>, nalgebra::DMatrix<c64>)> {
        match &self.repr {
            Repr::Lu(f) => {
                let mut l = f.l.to_dense();
                for i in 0..self.dim {
                    l[(i, i)] = c64::new(1.0, 0.0);
                }
                Some((l, f.u.to_dense()))
            }
            Repr::Cholesky { l, lh, .. } => Some((l.to_dense(), lh.to_dense())),
            _ => None,
        }
    }
}

fn fill_for(droptol: f64) -> Fill {
    if droptol > 0.0 {
        Fill::Threshold(droptol)
    } else {
        Fill::Full
    }
}

/// Complete sparse LU (natural order, no pivoting) for direct solves.
#[derive(Debug, Clone)]
pub struct SparseLu<T> {
    factors: LuFactors<T>,
}

impl<T: Scalar> SparseLu<T> {
    pub fn factorize(matrix: &CsrMatrix<T>) -> Result<Self> {
        Ok(Self {
            factors: factor_lu(matrix, Fill::Full)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.factors.l.nrows()
    }

    /// Number of stored factor entries.
    pub fn fill(&self) -> usize {
        self.factors.l.nnz() + self.factors.u.nnz()
    }

    pub fn solve_in_place(&self, x: &mut [c64]) {
        solve_unit_lower(&self.factors.l, x);
        solve_upper_diag_first(&self.factors.u, x);
    }

    pub fn solve(&self, b: &[c64]) -> Vec<c64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
