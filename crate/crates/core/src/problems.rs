//! Finite-difference convection–diffusion test matrices and random
//! right-hand sides.
//!
//! The operator `-Δu + ωᵀ∇u` on the unit square or cube is discretized on a
//! uniform grid of `n0` interior points per axis with `h = 1/(n0+1)`,
//! central differences and homogeneous Dirichlet boundaries. The returned
//! matrix is the negated discretization, so its spectrum lies in the open
//! left half plane. Grid point `(i, j, k)` has index `i + n0·(j + n0·k)` and
//! coordinates `((i+1)h, (j+1)h, (k+1)h)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "2d", alias = "2D")]
    Two,
    #[serde(rename = "3d", alias = "3D")]
    Three,
}

impl Dimension {
    pub fn axes(self) -> usize {
        match self {
            Dimension::Two => 2,
            Dimension::Three => 3,
        }
    }
}

/// Named coefficient fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaPreset {
    /// `[x sin x, y cos y, exp(z² - 1)]`
    FieldA,
    /// `[z y (x² - 1), 1/(y² + 1), exp z]`
    FieldB,
}

impl OmegaPreset {
    pub fn eval(self, x: f64, y: f64, z: f64) -> [f64; 3] {
        match self {
            OmegaPreset::FieldA => [x * x.sin(), y * y.cos(), (z * z - 1.0).exp()],
            OmegaPreset::FieldB => [z * y * (x * x - 1.0), 1.0 / (y * y + 1.0), z.exp()],
        }
    }
}

/// Convection coefficient: a constant vector or a named field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Omega {
    Constant([f64; 3]),
    Preset(OmegaPreset),
}

impl Default for Omega {
    fn default() -> Self {
        Omega::Constant([0.0; 3])
    }
}

impl Omega {
    pub fn eval(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        match self {
            Omega::Constant(w) => *w,
            Omega::Preset(p) => p.eval(x, y, z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvDiffSpec {
    pub dimension: Dimension,
    pub n0: usize,
    #[serde(default)]
    pub omega: Omega,
}

impl ConvDiffSpec {
    pub fn laplacian(dimension: Dimension, n0: usize) -> Self {
        Self {
            dimension,
            n0,
            omega: Omega::default(),
        }
    }

    pub fn size(&self) -> usize {
        self.n0.pow(self.dimension.axes() as u32)
    }
}

pub fn convdiff_matrix(spec: &ConvDiffSpec) -> Result<SparseMatrix> {
    let omega = spec.omega;
    convdiff_matrix_with(spec.dimension, spec.n0, |x, y, z| omega.eval(x, y, z))
}

/// Like [`convdiff_matrix`] with an arbitrary coefficient field.
pub fn convdiff_matrix_with<F>(dimension: Dimension, n0: usize, omega: F) -> Result<SparseMatrix>
where
    F: Fn(f64, f64, f64) -> [f64; 3],
{
    if n0 == 0 {
        return Err(Error::InvalidInput("n0 must be positive".into()));
    }
    let axes = dimension.axes();
    let n = n0.pow(axes as u32);
    let h = 1.0 / (n0 + 1) as f64;
    let diff = 1.0 / (h * h);
    let strides = [1, n0, n0 * n0];

    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(n * (2 * axes + 1));
    let mut data = Vec::with_capacity(n * (2 * axes + 1));
    indptr.push(0);
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * axes + 1);
    for idx in 0..n {
        let coord = [idx % n0, (idx / n0) % n0, idx / (n0 * n0)];
        let pos = |a: usize| if a < axes { (coord[a] + 1) as f64 * h } else { 0.0 };
        let w = omega(pos(0), pos(1), pos(2));
        row.clear();
        row.push((idx, -2.0 * axes as f64 * diff));
        for a in 0..axes {
            let conv = w[a] / (2.0 * h);
            if coord[a] > 0 {
                row.push((idx - strides[a], diff + conv));
            }
            if coord[a] + 1 < n0 {
                row.push((idx + strides[a], diff - conv));
            }
        }
        row.sort_unstable_by_key(|e| e.0);
        for &(j, v) in &row {
            if v != 0.0 {
                indices.push(j);
                data.push(v);
            }
        }
        indptr.push(indices.len());
    }
    SparseMatrix::try_new(n, n, indptr, indices, data)
}

/// Seeded standard-normal factors `f` (n×r) and `g` (m×r) with `g` rescaled
/// so that `‖f‖_F = ‖g‖_F`.
pub fn random_rhs(n: usize, m: usize, r: usize, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if r == 0 {
        return Err(Error::InvalidInput("right-hand side rank must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = DMatrix::from_fn(n, r, |_, _| StandardNormal.sample(&mut rng));
    let mut g = DMatrix::from_fn(m, r, |_, _| StandardNormal.sample(&mut rng));
    let (nf, ng) = (f.norm(), g.norm());
    if ng > 0.0 {
        g *= nf / ng;
    }
    Ok((f, g))
}

/// Problem description file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub dimension: Dimension,
    #[serde(rename = "n0_A")]
    pub n0_a: usize,
    #[serde(rename = "n0_B")]
    pub n0_b: usize,
    #[serde(rename = "omega_A", default)]
    pub omega_a: Omega,
    #[serde(rename = "omega_B", default)]
    pub omega_b: Omega,
    pub r: usize,
    pub seed: u64,
    /// Per-side overrides of `dimension`.
    #[serde(rename = "dimension_A", default, skip_serializing_if = "Option::is_none")]
    pub dimension_a: Option<Dimension>,
    #[serde(rename = "dimension_B", default, skip_serializing_if = "Option::is_none")]
    pub dimension_b: Option<Dimension>,
}

/// Matrices and right-hand side factors; both mass matrices are identities.
#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl ProblemSpec {
    pub fn side_a(&self) -> ConvDiffSpec {
        ConvDiffSpec {
            dimension: self.dimension_a.unwrap_or(self.dimension),
            n0: self.n0_a,
            omega: self.omega_a,
        }
    }

    pub fn side_b(&self) -> ConvDiffSpec {
        ConvDiffSpec {
            dimension: self.dimension_b.unwrap_or(self.dimension),
            n0: self.n0_b,
            omega: self.omega_b,
        }
    }

    pub fn generate(&self) -> Result<GeneratedProblem> {
        let a = convdiff_matrix(&self.side_a())?;
        let b = convdiff_matrix(&self.side_b())?;
        let (f, g) = random_rhs(a.nrows(), b.nrows(), self.r, self.seed)?;
        Ok(GeneratedProblem { a, b, f, g })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
