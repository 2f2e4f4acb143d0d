//! ADI shift pairs from Ritz-value surrogates of both spectra.
//!
//! The rational objective for a set of pairs `(α_i, β_i)` is
//!
//! ```text
//!     max_{λ, μ} Π_i |(λ - α_i)(μ - β_i)| / |(λ + β_i)(μ + α_i)|
//! ```
//!
//! with `λ` ranging over eigenvalue estimates of the pencil `(A, M)` and `μ`
//! over those of `(B, C)`. [`heuristic_shifts`] picks pairs greedily from the
//! Ritz values themselves.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precond::SparseLu;
use crate::scalar::{c64, dotc, norm2};
use crate::sparse::SparseMatrix;

pub const DEFAULT_DIRECT_RITZ: usize = 10;
pub const DEFAULT_INVERSE_RITZ: usize = 20;
pub const DEFAULT_PAIRS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RitzKind {
    Direct,
    /// Reciprocals of Ritz values of the inverse operator.
    Inverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RitzSet {
    pub values: Vec<c64>,
    pub side: Side,
    pub kind: RitzKind,
}

impl RitzSet {
    pub fn new(values: Vec<c64>, side: Side, kind: RitzKind) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("Ritz values must be finite".into()));
        }
        Ok(Self { values, side, kind })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Union of several Ritz sets with near-duplicates removed.
pub fn merge_ritz(sets: &[&RitzSet]) -> Vec<c64> {
    let mut out: Vec<c64> = Vec::new();
    for v in sets.iter().flat_map(|s| s.values.iter()) {
        let dup = out
            .iter()
            .any(|w| (w - v).norm() <= 1e-12 * v.norm().max(w.norm()).max(f64::MIN_POSITIVE));
        if !dup {
            out.push(*v);
        }
    }
    out
}

/// Arnoldi with modified Gram–Schmidt and one reorthogonalization pass.
///
/// Returns the eigenvalues of the square Hessenberg projection. When the
/// Krylov space becomes invariant before `steps`, the values found so far are
/// returned.
pub fn arnoldi_ritz<F>(mut apply: F, start: &[c64], steps: usize) -> Result<Vec<c64>>
where
    F: FnMut(&[c64], &mut [c64]) -> Result<()>,
{
    if steps == 0 {
        return Err(Error::InvalidInput("Arnoldi needs at least one step".into()));
    }
    let n = start.len();
    let nrm = norm2(start);
    if nrm == 0.0 || !nrm.is_finite() {
        return Err(Error::InvalidInput("Arnoldi start vector must be nonzero".into()));
    }
    let steps = steps.min(n);
    let mut basis: Vec<Vec<c64>> = vec![start.iter().map(|v| v / nrm).collect()];
    let mut h = DMatrix::<c64>::zeros(steps + 1, steps);
    let mut w = vec![c64::new(0.0, 0.0); n];
    let mut size = steps;
    for j in 0..steps {
        apply(&basis[j], &mut w)?;
        let wnorm0 = norm2(&w);
        for _pass in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = dotc(q, &w);
                h[(i, j)] += c;
                for (wk, qk) in w.iter_mut().zip(q) {
                    *wk -= c * qk;
                }
            }
        }
        let beta = norm2(&w);
        h[(j + 1, j)] = c64::new(beta, 0.0);
        if beta <= 1e-12 * wnorm0.max(f64::MIN_POSITIVE) || j + 1 == n {
            size = j + 1;
            break;
        }
        if j + 1 < steps {
            basis.push(w.iter().map(|v| v / beta).collect());
        }
    }
    let square = h.view((0, 0), (size, size)).into_owned();
    Ok(square
        .schur()
        .eigenvalues()
        .map(|e| e.iter().copied().collect())
        .unwrap_or_default())
}

/// Direct and inverse Ritz values of the pencil `(base, mass)`.
///
/// The direct values come from Arnoldi on `mass⁻¹·base`, the inverse ones
/// from Arnoldi on `base⁻¹·mass` followed by reciprocals. Mass and base
/// solves use sparse LU. The start vector is all ones.
pub fn pencil_ritz(
    base: &SparseMatrix,
    mass: Option<&SparseMatrix>,
    side: Side,
    direct_steps: usize,
    inverse_steps: usize,
) -> Result<(RitzSet, RitzSet)> {
    let n = base.nrows();
    if !base.is_square() {
        return Err(Error::dims("pencil_ritz: square base", n, base.ncols()));
    }
    if let Some(m) = mass {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::dims("pencil_ritz: mass", n, m.nrows()));
        }
    }
    let start = vec![c64::new(1.0, 0.0); n];
    let mass_lu = mass.map(SparseLu::factorize).transpose()?;

    let direct = if direct_steps > 0 {
        arnoldi_ritz(
            |x, y| {
                base.apply(x, y);
                if let Some(lu) = &mass_lu {
                    lu.solve_in_place(y);
                }
                finite_or_singular(y, "mass")
            },
            &start,
            direct_steps,
        )?
    } else {
        Vec::new()
    };

    let inverse = if inverse_steps > 0 {
        let base_lu = SparseLu::factorize(base)?;
        let theta = arnoldi_ritz(
            |x, y| {
                match mass {
                    Some(m) => m.apply(x, y),
                    None => y.copy_from_slice(x),
                }
                base_lu.solve_in_place(y);
                finite_or_singular(y, "base")
            },
            &start,
            inverse_steps,
        )?;
        let scale = theta.iter().map(|t| t.norm()).fold(0.0, f64::max);
        theta
            .into_iter()
            .filter(|t| t.norm() > 1e-14 * scale)
            .map(|t| c64::new(1.0, 0.0) / t)
            .collect()
    } else {
        Vec::new()
    };

    Ok((
        RitzSet::new(direct, side, RitzKind::Direct)?,
        RitzSet::new(inverse, side, RitzKind::Inverse)?,
    ))
}

fn finite_or_singular(y: &[c64], what: &str) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Breakdown(format!("singular {what} matrix in Ritz computation")))
    }
}

/// Modulus of one rational factor, or `None` when a denominator vanishes.
#[inline]
fn factor(lambda: c64, mu: c64, alpha: c64, beta: c64) -> Option<f64> {
    let d1 = lambda + beta;
    let d2 = mu + alpha;
    let g1 = 1e-14 * (lambda.norm() + beta.norm()).max(f64::MIN_POSITIVE);
    let g2 = 1e-14 * (mu.norm() + alpha.norm()).max(f64::MIN_POSITIVE);
    if d1.norm() < g1 || d2.norm() < g2 {
        return None;
    }
    Some(((lambda - alpha) * (mu - beta)).norm() / (d1.norm() * d2.norm()))
}

/// Objective value of the pairs `(alphas[i], betas[i])` over the Ritz grid.
/// Returns `f64::INFINITY` when a shift coincides with a negated Ritz value.
pub fn shift_objective(alphas: &[c64], betas: &[c64], ritz_a: &[c64], ritz_b: &[c64]) -> f64 {
    assert_eq!(alphas.len(), betas.len(), "shift_objective: unequal α and β counts");
    let mut worst: f64 = 0.0;
    for &lambda in ritz_a {
        for &mu in ritz_b {
            let mut prod = 1.0;
            for (&a, &b) in alphas.iter().zip(betas) {
                match factor(lambda, mu, a, b) {
                    Some(f) => prod *= f,
                    None => return f64::INFINITY,
                }
            }
            worst = worst.max(prod);
        }
    }
    worst
}

/// Ordered list of shift pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShiftFile", into = "ShiftFile")]
pub struct ShiftSequence {
    pairs: Vec<(c64, c64)>,
    cyclic: bool,
}

#[derive(Serialize, Deserialize)]
struct ShiftFile {
    alpha: Vec<c64>,
    beta: Vec<c64>,
    #[serde(default = "default_cyclic")]
    cyclic: bool,
}

fn default_cyclic() -> bool {
    true
}

impl TryFrom<ShiftFile> for ShiftSequence {
    type Error = Error;

    fn try_from(f: ShiftFile) -> Result<Self> {
        if f.alpha.len() != f.beta.len() {
            return Err(Error::dims("shift file: beta count", f.alpha.len(), f.beta.len()));
        }
        Self::new(f.alpha.into_iter().zip(f.beta).collect(), f.cyclic)
    }
}

impl From<ShiftSequence> for ShiftFile {
    fn from(s: ShiftSequence) -> Self {
        Self {
            alpha: s.alphas(),
            beta: s.betas(),
            cyclic: s.cyclic,
        }
    }
}

impl ShiftSequence {
    pub fn new(pairs: Vec<(c64, c64)>, cyclic: bool) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("shift sequence is empty".into()));
        }
        if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidInput("shift values must be finite".into()));
        }
        Ok(Self { pairs, cyclic })
    }

    /// Same shift pair at every step.
    pub fn constant(alpha: c64, beta: c64) -> Result<Self> {
        Self::new(vec![(alpha, beta)], true)
    }

    pub fn pairs(&self) -> &[(c64, c64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    pub fn alphas(&self) -> Vec<c64> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn betas(&self) -> Vec<c64> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    /// Pair for the zero-based step `k`; `None` past the end of a
    /// non-cyclic sequence.
    pub fn pair(&self, k: usize) -> Option<(c64, c64)> {
        if self.cyclic {
            Some(self.pairs[k % self.pairs.len()])
        } else {
            self.pairs.get(k).copied()
        }
    }

    pub fn all_stable(&self) -> bool {
        self.pairs.iter().all(|(a, b)| a.re < 0.0 && b.re < 0.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Greedy shift selection.
///
/// Candidates for `α` are the A-side Ritz values, for `β` the B-side ones.
/// The first pair minimizes the objective over all candidate pairs. Every
/// further pair is the Ritz pair `(λ, μ)` where the cumulative rational
/// function is currently largest, which zeroes it there. Ties go to the
/// smaller total `|Im|`, then the smaller total modulus. Selection stops
/// early once the function vanishes on the whole grid. The result is marked
/// cyclic.
pub fn heuristic_shifts(ritz_a: &[c64], ritz_b: &[c64], npairs: usize) -> Result<ShiftSequence> {
    if ritz_a.is_empty() || ritz_b.is_empty() {
        return Err(Error::InvalidInput("heuristic shifts need nonempty Ritz sets".into()));
    }
    if npairs == 0 {
        return Err(Error::InvalidInput("requested zero shift pairs".into()));
    }
    let candidates: Vec<(c64, c64)> = ritz_a
        .iter()
        .flat_map(|&a| ritz_b.iter().map(move |&b| (a, b)))
        .collect();

    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|&(alpha, beta)| shift_objective(&[alpha], &[beta], ritz_a, ritz_b))
        .collect();
    let first = pick(&scores, &candidates, |s, b| s < b)
        .ok_or_else(|| Error::InvalidInput("every candidate shift pair hits a negated Ritz value".into()))?;

    // cumulative rational function on the grid, λ-major like `candidates`
    let mut product = vec![1.0f64; candidates.len()];
    let mut chosen = Vec::with_capacity(npairs);
    let mut next = candidates[first];
    loop {
        let (alpha, beta) = next;
        for (p, &(lambda, mu)) in product.iter_mut().zip(&candidates) {
            *p *= factor(lambda, mu, alpha, beta).unwrap_or(f64::INFINITY);
        }
        chosen.push(next);
        if chosen.len() == npairs {
            break;
        }
        // a grid point is usable as a shift pair only if it is nonsingular
        let masked: Vec<f64> = product
            .iter()
            .zip(&candidates)
            .map(|(&p, &(a, b))| {
                let usable = ritz_a.iter().all(|&l| factor(l, ritz_b[0], a, b).is_some())
                    && ritz_b.iter().all(|&m| factor(ritz_a[0], m, a, b).is_some());
                if usable {
                    p
                } else {
                    f64::NAN
                }
            })
            .collect();
        match pick(&masked, &candidates, |s, b| s > b) {
            Some(k) if masked[k] > 0.0 => next = candidates[k],
            _ => break,
        }
    }
    ShiftSequence::new(chosen, true)
}

/// Index of the best finite score under `better`, with tie-breaking.
fn pick(scores: &[f64], candidates: &[(c64, c64)], better: impl Fn(f64, f64) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (c, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            continue;
        }
        best = match best {
            None => Some(c),
            Some(b) if prefer(s, candidates[c], scores[b], candidates[b], &better) => Some(c),
            keep => keep,
        };
    }
    best
}

fn prefer(score: f64, cand: (c64, c64), best_score: f64, best: (c64, c64), better: impl Fn(f64, f64) -> bool) -> bool {
    let tol = 1e-12 * score.max(best_score);
    if (score - best_score).abs() > tol {
        return better(score, best_score);
    }
    let im = cand.0.im.abs() + cand.1.im.abs();
    let best_im = best.0.im.abs() + best.1.im.abs();
    if im != best_im {
        return im < best_im;
    }
    cand.0.norm() + cand.1.norm() < best.0.norm() + best.1.norm()
}

/// Full heuristic pipeline for the pencils `(A, M)` and `(B, C)`.
pub fn generate_shifts(
    a: &SparseMatrix,
    m: Option<&SparseMatrix>,
    b: &SparseMatrix,
    c: Option<&SparseMatrix>,
    direct_steps: usize,
    inverse_steps: usize,
    npairs: usize,
) -> Result<ShiftSequence> {
    let (da, ia) = pencil_ritz(a, m, Side::A, direct_steps, inverse_steps)?;
    let (db, ib) = pencil_ritz(b, c, Side::B, direct_steps, inverse_steps)?;
    let ra = merge_ritz(&[&da, &ia]);
    let rb = merge_ritz(&[&db, &ib]);
    log::debug!("shift candidates: {} A-side, {} B-side", ra.len(), rb.len());
    heuristic_shifts(&ra, &rb, npairs)
}
