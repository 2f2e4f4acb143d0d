use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::block::{self, Block};
use crate::error::{Error, Result};
use crate::scalar::c64;

use super::{AdiState, LowRankSolution, SylvesterProblem};

/// Dense `kr × kr` matrix with `diag[j]` on the diagonal blocks and
/// `-γ_i` in every block `(i, j)`, `i > j`; entries conjugated on request.
pub fn sigma_matrix(diag: &[c64], gammas: &[c64], rank: usize, conjugate: bool) -> Block {
    let k = diag.len();
    let cj = |z: c64| if conjugate { z.conj() } else { z };
    let mut s = Block::zeros(k * rank, k * rank);
    for j in 0..k {
        for l in 0..rank {
            s[(j * rank + l, j * rank + l)] = cj(diag[j]);
            for i in j + 1..k {
                s[(i * rank + l, j * rank + l)] = -cj(gammas[i]);
            }
        }
    }
    s
}

/// `Σ` applied blockwise from the right: block `j` of the result is
/// `d_j X_j - Σ_{i>j} γ_i X_i`.
fn apply_sigma(blocks: &[Block], diag: &[c64], gammas: &[c64]) -> Vec<Block> {
    let k = blocks.len();
    let mut out = vec![Block::zeros(0, 0); k];
    let mut tail: Option<Block> = None;
    for j in (0..k).rev() {
        let mut b = &blocks[j] * diag[j];
        if let Some(t) = &tail {
            b -= t;
        }
        let scaled = &blocks[j] * gammas[j];
        tail = Some(match tail {
            Some(t) => t + scaled,
            None => scaled,
        });
        out[j] = b;
    }
    out
}

fn diagnostics_missing(state: &AdiState) -> Result<(&[Block], &[Block])> {
    match (state.inner_residuals_a(), state.inner_residuals_b()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::DiagnosticsMissing),
    }
}

/// Largest normalized defect of the factor identities
///
/// ```text
///     A Z   = M Z σ^α + w E^T - S^A
///     B^T Y = C^T Y conj(σ^β) + t E^T - S^B
/// ```
///
/// with `E = 1_k ⊗ I_r`. The A-side defect is divided by `‖A‖_F ‖Z‖_F`, the
/// B-side one by `‖B‖_F ‖Y‖_F`. Needs retained inner residuals.
pub fn verify_factor_identity(problem: &SylvesterProblem, state: &AdiState) -> Result<f64> {
    let (s_a, s_b) = diagnostics_missing(state)?;
    let k = state.step();
    if k == 0 {
        return Ok(0.0);
    }
    let alphas: Vec<c64> = state.shifts().iter().map(|p| p.0).collect();
    let betas_conj: Vec<c64> = state.shifts().iter().map(|p| p.1.conj()).collect();
    let gammas = state.gammas();
    let gammas_conj: Vec<c64> = gammas.iter().map(|g| g.conj()).collect();

    let side = |blocks: &[Block],
                s: &[Block],
                diag: &[c64],
                gam: &[c64],
                lhs: &dyn Fn(&Block) -> Result<Block>,
                mass: &dyn Fn(&Block) -> Result<Block>,
                last: &Block,
                scale: f64|
     -> Result<f64> {
        let sig = apply_sigma(blocks, diag, gam);
        let mut defect = 0.0;
        let mut znorm = 0.0;
        for j in 0..blocks.len() {
            let d = lhs(&blocks[j])? - mass(&sig[j])? - last + &s[j];
            defect += d.norm_squared();
            znorm += blocks[j].norm_squared();
        }
        let denom = scale * znorm.sqrt();
        Ok(if denom > 0.0 {
            defect.sqrt() / denom
        } else {
            defect.sqrt()
        })
    };

    let a = problem.a();
    let b = problem.b();
    let da = side(
        state.z_blocks(),
        s_a,
        &alphas,
        gammas,
        &|x| a.spmv(x),
        &|x| problem.apply_m(x),
        state.w(),
        a.frobenius_norm(),
    )?;
    let db = side(
        state.y_blocks(),
        s_b,
        &betas_conj,
        &gammas_conj,
        &|x| b.spmv_transpose(x),
        &|x| problem.apply_ct(x),
        state.t(),
        b.frobenius_norm(),
    )?;
    Ok(da.max(db))
}

/// Spectral norm of the residual gap `S^A Γ Y^* C + M Z Γ (S^B)^*` from a
/// thin QR of its rank-`2kr` factorization. Needs retained inner residuals.
pub fn residual_gap(problem: &SylvesterProblem, state: &AdiState) -> Result<f64> {
    let (s_a, s_b) = diagnostics_missing(state)?;
    if state.step() == 0 {
        return Ok(0.0);
    }
    let sol = state.solution();
    let gdiag = sol.gamma_diagonal();
    let mut sa_gamma = block::hcat(s_a, problem.n());
    for (j, g) in gdiag.iter().enumerate() {
        sa_gamma.column_mut(j).iter_mut().for_each(|v| *v *= *g);
    }
    let mz_gamma = problem.apply_m(&sol.z_gamma())?;
    let cy = problem.apply_ct(&sol.y)?;
    let sb = block::hcat(s_b, problem.m_dim());
    let left = block::hcat(&[sa_gamma, mz_gamma], problem.n());
    let right = block::hcat(&[cy, sb], problem.m_dim());
    Ok(block::lowrank_spectral_norm(&left, &right))
}

/// Defect of `σ^α Γ + Γ conj(σ^β)^* + γ γ^T = 0` for the small
/// coefficient matrices of a state, relative to `‖γ γ^T‖_F`. Here `σ^β`
/// holds the unconjugated `β_j` and `γ_i`.
pub fn small_sylvester_defect(state: &AdiState) -> f64 {
    let k = state.step();
    if k == 0 {
        return 0.0;
    }
    let r = state.w().ncols();
    let gammas = state.gammas();
    let alphas: Vec<c64> = state.shifts().iter().map(|p| p.0).collect();
    let betas: Vec<c64> = state.shifts().iter().map(|p| p.1).collect();
    let sa = sigma_matrix(&alphas, gammas, r, false);
    let sb = sigma_matrix(&betas, gammas, r, true);
    let gdiag = Block::from_diagonal(&DVector::from_iterator(
        k * r,
        gammas.iter().flat_map(|g| std::iter::repeat_n(*g, r)),
    ));
    let gvec = Block::from_fn(
        k * r,
        r,
        |i, j| if i % r == j { gammas[i / r] } else { c64::new(0.0, 0.0) },
    );
    let ggt = &gvec * gvec.transpose();
    let d = &sa * &gdiag + &gdiag * sb.adjoint() + &ggt;
    d.norm() / ggt.norm()
}

/// Outcome of the power iteration for `‖R‖₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueResidual {
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const POWER_TOLERANCE: f64 = 1e-6;
pub const POWER_MAX_ITERATIONS: usize = 200;

/// `‖A X C + M X B + f g^*‖₂` for `X = Z Γ Y^*`, by power iteration on
/// `R^* R` with the residual applied through its factors.
pub fn true_residual_norm(problem: &SylvesterProblem, solution: &LowRankSolution) -> Result<TrueResidual> {
    let n = problem.n();
    let m = problem.m_dim();
    if solution.z.nrows() != n || solution.y.nrows() != m || solution.z.ncols() != solution.y.ncols() {
        return Err(Error::InvalidStructure(format!(
            "factors {}×{} and {}×{} do not fit a {n}×{m} problem",
            solution.z.nrows(),
            solution.z.ncols(),
            solution.y.nrows(),
            solution.y.ncols()
        )));
    }
    let gdiag = DVector::from_vec(solution.gamma_diagonal());
    let zero = c64::new(0.0, 0.0);
    let apply = |mat: Option<&crate::SparseMatrix>, x: &DVector<c64>, transpose: bool| -> DVector<c64> {
        match mat {
            None => x.clone(),
            Some(a) => {
                let mut y = DVector::from_element(if transpose { a.ncols() } else { a.nrows() }, zero);
                if transpose {
                    a.apply_transpose(x.as_slice(), y.as_mut_slice());
                } else {
                    a.apply(x.as_slice(), y.as_mut_slice());
                }
                y
            }
        }
    };
    let forward = |x: &DVector<c64>| -> DVector<c64> {
        let cx = apply(problem.c(), x, false);
        let bx = apply(Some(problem.b()), x, false);
        let p = solution.z.clone() * solution.y.ad_mul(&cx).component_mul(&gdiag);
        let q = solution.z.clone() * solution.y.ad_mul(&bx).component_mul(&gdiag);
        apply(Some(problem.a()), &p, false) + apply(problem.m(), &q, false) + problem.f() * problem.g().ad_mul(x)
    };
    let gconj = gdiag.map(|g| g.conj());
    let backward = |y: &DVector<c64>| -> DVector<c64> {
        let ay = apply(Some(problem.a()), y, true);
        let my = apply(problem.m(), y, true);
        let p = &solution.y * solution.z.ad_mul(&ay).component_mul(&gconj);
        let q = &solution.y * solution.z.ad_mul(&my).component_mul(&gconj);
        apply(problem.c(), &p, true) + apply(Some(problem.b()), &q, true) + problem.g() * problem.f().ad_mul(y)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DVector::from_fn(m, |_, _| {
        c64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    });
    x /= c64::new(x.norm(), 0.0);
    let mut lambda = 0.0f64;
    for it in 1..=POWER_MAX_ITERATIONS {
        let rx = forward(&x);
        let next = rx.norm_squared();
        if next == 0.0 {
            return Ok(TrueResidual {
                norm: 0.0,
                iterations: it,
                converged: true,
            });
        }
        let done = it > 1 && (next - lambda).abs() <= POWER_TOLERANCE * next;
        lambda = lambda.max(next);
        if done {
            return Ok(TrueResidual {
                norm: lambda.sqrt(),
                iterations: it,
                converged: true,
            });
        }
        let mut z = backward(&rx);
        let zn = z.norm();
        if zn == 0.0 {
            break;
        }
        z /= c64::new(zn, 0.0);
        x = z;
    }
    log::warn!("true residual power iteration did not settle in {POWER_MAX_ITERATIONS} steps");
    Ok(TrueResidual {
        norm: lambda.sqrt(),
        iterations: POWER_MAX_ITERATIONS,
        converged: false,
    })
}
