//! Compressed sparse row storage and the kernels everything else is built on.
//!
//! Coefficient matrices are real ([`SparseMatrix`]); shifted matrices
//! `base + σ·mass` and their factors are complex ([`ComplexCsr`]). Vectors
//! are always complex, a real matrix acts on real and imaginary parts
//! separately.

mod market;
mod shifted;

pub use market::{read_block, read_matrix_market, write_block, write_matrix_market};
pub use shifted::{assemble_shifted, Mass, ShiftedOperator};

use nalgebra::DMatrix;

use crate::block::Block;
use crate::error::{Error, Result};
use crate::scalar::{c64, Scalar};

/// CSR matrix. Column indices are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

pub type SparseMatrix = CsrMatrix<f64>;
pub type ComplexCsr = CsrMatrix<c64>;

impl<T: Scalar> CsrMatrix<T> {
    /// Builds a matrix from raw CSR arrays, checking every structural invariant.
    pub fn try_new(nrows: usize, ncols: usize, indptr: Vec<usize>, indices: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if indptr.len() != nrows + 1 {
            return Err(Error::InvalidStructure(format!(
                "row offsets have length {}, expected {}",
                indptr.len(),
                nrows + 1
            )));
        }
        if indptr[0] != 0 || indptr[nrows] != indices.len() || indices.len() != data.len() {
            return Err(Error::InvalidStructure(
                "row offsets inconsistent with index/value arrays".into(),
            ));
        }
        for i in 0..nrows {
            if indptr[i] > indptr[i + 1] {
                return Err(Error::InvalidStructure(format!("row offsets decrease at row {i}")));
            }
            let cols = &indices[indptr[i]..indptr[i + 1]];
            for (k, &j) in cols.iter().enumerate() {
                if j >= ncols {
                    return Err(Error::InvalidStructure(format!("column {j} out of range in row {i}")));
                }
                if k > 0 && cols[k - 1] >= j {
                    return Err(Error::InvalidStructure(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    /// Trusted constructor for kernels that produce sorted rows.
    pub(crate) fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<T>,
    ) -> Self {
        debug_assert_eq!(indptr.len(), nrows + 1);
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Duplicate coordinates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidStructure(format!(
                    "entry ({i}, {j}) outside {nrows}×{ncols}"
                )));
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, T)> = Vec::new();
        for i in 0..nrows {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|e| e.0);
            for &(j, v) in &row {
                if indices.len() > indptr[i] && *indices.last().unwrap() == j {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self::from_parts_unchecked(nrows, ncols, indptr, indices, data))
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_parts_unchecked(nrows, ncols, vec![0; nrows + 1], Vec::new(), Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self::from_parts_unchecked(n, n, (0..=n).collect(), (0..n).collect(), diag.to_vec())
    }

    /// Sparse matrix from an entry function; exact zeros are skipped.
    pub fn from_dense_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for i in 0..nrows {
            for j in 0..ncols {
                let v = f(i, j);
                if v != T::zero() {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self::from_parts_unchecked(nrows, ncols, indptr, indices, data)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix::from_parts_unchecked(
            self.nrows,
            self.ncols,
            self.indptr.clone(),
            self.indices.clone(),
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn to_complex(&self) -> ComplexCsr {
        self.map(|v| v.to_c64())
    }

    pub fn scale(&self, a: T) -> Self {
        self.map(|v| v * a)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![T::zero(); self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                indices[next[j]] = i;
                data[next[j]] = v;
                next[j] += 1;
            }
        }
        Self::from_parts_unchecked(self.ncols, self.nrows, counts, indices, data)
    }

    pub fn conj_transpose(&self) -> Self {
        let mut t = self.transpose();
        for v in &mut t.data {
            *v = v.conj();
        }
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs().powi(2)).sum::<f64>().sqrt()
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs().powi(2)).sum::<f64>().sqrt())
            .collect()
    }

    /// `A == A^T` up to `rel_tol · max|a_ij|`, pattern included.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.data.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let t = self.transpose();
        if t.indptr != self.indptr || t.indices != self.indices {
            // pattern may still agree up to explicit zeros
            return (0..self.nrows).all(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .all(|(&j, &v)| (v - self.get(j, i)).abs() <= rel_tol * scale)
            }) && (0..t.nrows).all(|i| {
                let (cols, vals) = t.row(i);
                cols.iter()
                    .zip(vals)
                    .all(|(&j, &v)| (v - self.get(i, j)).abs() <= rel_tol * scale)
            });
        }
        self.data
            .iter()
            .zip(&t.data)
            .all(|(a, b)| (*a - *b).abs() <= rel_tol * scale)
    }

    /// `y = A x` for a single complex vector.
    pub fn apply(&self, x: &[c64], y: &mut [c64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut acc = c64::new(0.0, 0.0);
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v.mul_c(x[j]);
            }
            *yi = acc;
        }
    }

    /// `y += a · A x`.
    pub fn apply_add(&self, a: c64, x: &[c64], y: &mut [c64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut acc = c64::new(0.0, 0.0);
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v.mul_c(x[j]);
            }
            *yi += a * acc;
        }
    }

    /// `y = A^T x` by scattering rows; no transpose is stored.
    pub fn apply_transpose(&self, x: &[c64], y: &mut [c64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.fill(c64::new(0.0, 0.0));
        self.apply_transpose_add(c64::new(1.0, 0.0), x, y);
    }

    /// `y += a · A^T x`.
    pub fn apply_transpose_add(&self, a: c64, x: &[c64], y: &mut [c64]) {
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            let s = a * xi;
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v.mul_c(s);
            }
        }
    }

    /// Matrix times block.
    pub fn spmv(&self, x: &Block) -> Result<Block> {
        if x.nrows() != self.ncols {
            return Err(Error::dims("spmv", self.ncols, x.nrows()));
        }
        let mut y = Block::zeros(self.nrows, x.ncols());
        for (xc, mut yc) in x.column_iter().zip(y.column_iter_mut()) {
            self.apply(xc.as_slice(), yc.as_mut_slice());
        }
        Ok(y)
    }

    /// Transposed matrix times block.
    pub fn spmv_transpose(&self, x: &Block) -> Result<Block> {
        if x.nrows() != self.nrows {
            return Err(Error::dims("spmv_transpose", self.nrows, x.nrows()));
        }
        let mut y = Block::zeros(self.ncols, x.ncols());
        for (xc, mut yc) in x.column_iter().zip(y.column_iter_mut()) {
            self.apply_transpose(xc.as_slice(), yc.as_mut_slice());
        }
        Ok(y)
    }

    /// Dense complex copy; intended for small matrices and test oracles.
    pub fn to_dense(&self) -> DMatrix<c64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v.to_c64();
            }
        }
        d
    }
}

impl SparseMatrix {
    pub fn from_dense(d: &DMatrix<f64>) -> Self {
        Self::from_dense_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)])
    }

    pub fn to_dense_real(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }
}
