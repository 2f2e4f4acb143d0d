use crate::error::{Error, Result};
use crate::precond::IncompleteFactorization;
use crate::scalar::{c64, dotc, norm2};
use crate::sparse::ShiftedOperator;

use super::{solve_columns, ColumnOutcome, InnerSolveRequest, InnerSolveResult};

/// Preconditioned MINRES for Hermitian operators.
///
/// The preconditioner is used in its positive definite form. Besides the
/// Lanczos recurrences, the image `Op w` of every search direction is carried
/// along so that the unpreconditioned residual `b - Op x` is available at
/// each step without an extra operator application.
pub fn minres(req: &InnerSolveRequest<'_>) -> Result<InnerSolveResult> {
    if !req.preconditioner.has_spd_form() {
        return Err(Error::InvalidInput(format!(
            "MINRES needs a preconditioner with a positive definite form, got {:?}",
            req.preconditioner.kind()
        )));
    }
    let op = req.operator;
    let prec = req.preconditioner;
    let maxit = req.max_iterations;
    solve_columns(req, |b, tol| minres_column(op, prec, b, tol, maxit))
}

fn minres_column(
    op: &ShiftedOperator<'_>,
    prec: &IncompleteFactorization,
    b: &[c64],
    tol: f64,
    maxit: usize,
) -> ColumnOutcome {
    let n = b.len();
    let zero = c64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    let mut res = b.to_vec();
    if norm2(&res) <= tol {
        return ColumnOutcome { x, iterations: 0 };
    }

    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    prec.apply_spd_in_place(&mut y);
    let beta1 = dotc(&r1, &y).re;
    if !(beta1 > 0.0) {
        log::debug!("minres: preconditioner not positive definite on rhs");
        return ColumnOutcome { x, iterations: 0 };
    }
    let mut beta = beta1.sqrt();
    let mut oldb = 0.0;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta;
    let mut cs = -1.0;
    let mut sn = 0.0;

    let mut v = vec![zero; n];
    let mut av = vec![zero; n];
    let mut w = vec![zero; n];
    let mut w1 = vec![zero; n];
    let mut w2 = vec![zero; n];
    let mut aw = vec![zero; n];
    let mut aw1 = vec![zero; n];
    let mut aw2 = vec![zero; n];

    let mut its = 0;
    while its < maxit {
        its += 1;
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = y[i] * s;
        }
        op.apply(&v, &mut av);
        y.copy_from_slice(&av);
        if its >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                y[i] -= r1[i] * f;
            }
        }
        let alfa = dotc(&v, &y).re;
        let f = alfa / beta;
        for i in 0..n {
            y[i] -= r2[i] * f;
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        prec.apply_spd_in_place(&mut y);
        oldb = beta;
        let beta_sq = dotc(&r2, &y).re;
        beta = if beta_sq > 0.0 { beta_sq.sqrt() } else { 0.0 };

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta);
        if gamma == 0.0 {
            log::debug!("minres: singular tridiagonal after {its} iterations");
            break;
        }
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        std::mem::swap(&mut aw1, &mut aw2);
        std::mem::swap(&mut aw2, &mut aw);
        let g = 1.0 / gamma;
        for i in 0..n {
            w[i] = (v[i] - w1[i] * oldeps - w2[i] * delta) * g;
            aw[i] = (av[i] - aw1[i] * oldeps - aw2[i] * delta) * g;
            x[i] += w[i] * phi;
            res[i] -= aw[i] * phi;
        }

        if norm2(&res) <= tol {
            let rt = op.residual(b, &x);
            if norm2(&rt) <= tol {
                break;
            }
            res = rt;
        }
        if beta == 0.0 {
            break;
        }
    }
    ColumnOutcome { x, iterations: its }
}
