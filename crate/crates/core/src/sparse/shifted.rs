use crate::error::{Error, Result};
use crate::scalar::c64;

use super::{ComplexCsr, SparseMatrix};

/// Mass matrix of one side of the equation: `M`, `C`, or the identity.
#[derive(Debug, Clone, Copy)]
pub enum Mass<'a> {
    Identity,
    Matrix(&'a SparseMatrix),
}

impl<'a> Mass<'a> {
    pub fn from_option(m: Option<&'a SparseMatrix>) -> Self {
        m.map_or(Mass::Identity, Mass::Matrix)
    }

    fn check(&self, n: usize) -> Result<()> {
        if let Mass::Matrix(m) = self {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::dims("mass matrix", n, m.nrows().max(m.ncols())));
            }
        }
        Ok(())
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        match self {
            Mass::Identity => true,
            Mass::Matrix(m) => m.is_symmetric(rel_tol),
        }
    }

    /// `y = M x`
    pub fn apply(&self, x: &[c64], y: &mut [c64]) {
        match self {
            Mass::Identity => y.copy_from_slice(x),
            Mass::Matrix(m) => m.apply(x, y),
        }
    }

    /// `y = M^T x`
    pub fn apply_transpose(&self, x: &[c64], y: &mut [c64]) {
        match self {
            Mass::Identity => y.copy_from_slice(x),
            Mass::Matrix(m) => m.apply_transpose(x, y),
        }
    }
}

/// Explicit sparse sum `base + shift·mass` on the merged pattern.
pub fn assemble_shifted(base: &SparseMatrix, mass: Mass<'_>, shift: c64) -> Result<ComplexCsr> {
    if !base.is_square() {
        return Err(Error::dims(
            "assemble_shifted: base must be square",
            base.nrows(),
            base.ncols(),
        ));
    }
    let n = base.nrows();
    mass.check(n)?;

    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(base.nnz() + n);
    let mut data = Vec::with_capacity(base.nnz() + n);
    indptr.push(0);
    for i in 0..n {
        let (bc, bv) = base.row(i);
        let identity_row = [i];
        let one = [1.0];
        let (mc, mv): (&[usize], &[f64]) = match mass {
            Mass::Identity => (&identity_row, &one),
            Mass::Matrix(m) => m.row(i),
        };
        let (mut p, mut q) = (0, 0);
        while p < bc.len() || q < mc.len() {
            let take_b = q >= mc.len() || (p < bc.len() && bc[p] <= mc[q]);
            let take_m = p >= bc.len() || (q < mc.len() && mc[q] <= bc[p]);
            let col = if take_b { bc[p] } else { mc[q] };
            let mut v = c64::new(0.0, 0.0);
            if take_b {
                v += bv[p];
                p += 1;
            }
            if take_m {
                v += shift * mv[q];
                q += 1;
            }
            indices.push(col);
            data.push(v);
        }
        indptr.push(indices.len());
    }
    Ok(ComplexCsr::from_parts_unchecked(n, n, indptr, indices, data))
}

/// The operator `op(base) + shift·op(mass)`, applied without assembly.
///
/// `op` is the identity for A-side systems `A + βM` and the transpose for
/// B-side systems `(B + αC)^* = B^T + ᾱ C^T`; in the latter case the stored
/// shift is already conjugated.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedOperator<'a> {
    base: &'a SparseMatrix,
    mass: Mass<'a>,
    shift: c64,
    transposed: bool,
}

impl<'a> ShiftedOperator<'a> {
    /// `base + shift·mass`
    pub fn new(base: &'a SparseMatrix, mass: Mass<'a>, shift: c64) -> Result<Self> {
        if !base.is_square() {
            return Err(Error::dims(
                "shifted operator: base must be square",
                base.nrows(),
                base.ncols(),
            ));
        }
        mass.check(base.nrows())?;
        Ok(Self {
            base,
            mass,
            shift,
            transposed: false,
        })
    }

    /// `(base + shift·mass)^*`
    pub fn adjoint(base: &'a SparseMatrix, mass: Mass<'a>, shift: c64) -> Result<Self> {
        let mut op = Self::new(base, mass, shift.conj())?;
        op.transposed = true;
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    /// Coefficient multiplying `op(mass)`.
    pub fn shift(&self) -> c64 {
        self.shift
    }

    pub fn is_transposed(&self) -> bool {
        self.transposed
    }

    pub fn base(&self) -> &'a SparseMatrix {
        self.base
    }

    pub fn mass(&self) -> Mass<'a> {
        self.mass
    }

    /// Real shift on symmetric base and mass: the operator is real symmetric.
    pub fn is_real_symmetric(&self) -> bool {
        self.shift.im == 0.0 && self.base.is_symmetric(1e-14) && self.mass.is_symmetric(1e-14)
    }

    /// `y = Op x`
    pub fn apply(&self, x: &[c64], y: &mut [c64]) {
        if self.transposed {
            self.base.apply_transpose(x, y);
            match self.mass {
                Mass::Identity => crate::scalar::axpy(self.shift, x, y),
                Mass::Matrix(m) => m.apply_transpose_add(self.shift, x, y),
            }
        } else {
            self.base.apply(x, y);
            match self.mass {
                Mass::Identity => crate::scalar::axpy(self.shift, x, y),
                Mass::Matrix(m) => m.apply_add(self.shift, x, y),
            }
        }
    }

    /// `b - Op x`
    pub fn residual(&self, b: &[c64], x: &[c64]) -> Vec<c64> {
        let mut r = vec![c64::new(0.0, 0.0); b.len()];
        self.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        r
    }

    /// Explicit matrix of the operator.
    pub fn assemble(&self) -> Result<ComplexCsr> {
        let a = assemble_shifted(self.base, self.mass, self.shift)?;
        Ok(if self.transposed { a.transpose() } else { a })
    }
}
