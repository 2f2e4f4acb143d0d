use crate::error::Result;
use crate::precond::IncompleteFactorization;
use crate::scalar::{c64, dotc, norm2};
use crate::sparse::ShiftedOperator;

use super::{solve_columns, ColumnOutcome, InnerSolveRequest, InnerSolveResult};

/// Right-preconditioned BiCGstab, column by column.
///
/// The recursively updated residual is the true residual of the original
/// system, so it is tested directly against `δ/r`. On a scalar breakdown the
/// iteration restarts once from the current iterate with a fresh shadow
/// vector; a second breakdown ends the column unconverged.
pub fn bicgstab(req: &InnerSolveRequest<'_>) -> Result<InnerSolveResult> {
    let op = req.operator;
    let prec = req.preconditioner;
    let maxit = req.max_iterations;
    solve_columns(req, |b, tol| bicgstab_column(op, prec, b, tol, maxit))
}

fn bicgstab_column(
    op: &ShiftedOperator<'_>,
    prec: &IncompleteFactorization,
    b: &[c64],
    tol: f64,
    maxit: usize,
) -> ColumnOutcome {
    let n = b.len();
    let zero = c64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    let mut r = b.to_vec();
    if norm2(&r) <= tol {
        return ColumnOutcome { x, iterations: 0 };
    }

    let mut r_hat = r.clone();
    let mut p = vec![zero; n];
    let mut v = vec![zero; n];
    let mut s = vec![zero; n];
    let mut t = vec![zero; n];
    let mut p_hat = vec![zero; n];
    let mut s_hat = vec![zero; n];
    let (mut rho_old, mut alpha, mut omega) = (c64::new(1.0, 0.0), c64::new(1.0, 0.0), c64::new(1.0, 0.0));
    let mut fresh = true;
    let mut restarts_left = 1;
    let mut its = 0;

    // relative size below which a scalar counts as breakdown
    const TINY: f64 = 1e-30;

    while its < maxit {
        let mut broke = false;
        let rho = dotc(&r_hat, &r);
        if rho.norm() <= TINY * norm2(&r_hat) * norm2(&r) {
            broke = true;
        } else {
            if fresh {
                p.copy_from_slice(&r);
                fresh = false;
            } else {
                let beta = (rho / rho_old) * (alpha / omega);
                for i in 0..n {
                    p[i] = r[i] + beta * (p[i] - omega * v[i]);
                }
            }
            p_hat.copy_from_slice(&p);
            prec.apply_in_place(&mut p_hat);
            op.apply(&p_hat, &mut v);
            let denom = dotc(&r_hat, &v);
            if denom.norm() <= TINY * norm2(&r_hat) * norm2(&v) || denom.norm() == 0.0 {
                broke = true;
            } else {
                alpha = rho / denom;
                for i in 0..n {
                    s[i] = r[i] - alpha * v[i];
                }
                its += 1;
                if norm2(&s) <= tol {
                    for i in 0..n {
                        x[i] += alpha * p_hat[i];
                    }
                    if let Some(rt) = confirm(op, b, &x, tol) {
                        r = rt;
                        r_hat.copy_from_slice(&r);
                        fresh = true;
                        continue;
                    }
                    return ColumnOutcome { x, iterations: its };
                }
                s_hat.copy_from_slice(&s);
                prec.apply_in_place(&mut s_hat);
                op.apply(&s_hat, &mut t);
                let tt = dotc(&t, &t).re;
                if tt == 0.0 {
                    for i in 0..n {
                        x[i] += alpha * p_hat[i];
                    }
                    r.copy_from_slice(&s);
                    broke = true;
                } else {
                    omega = dotc(&t, &s) / tt;
                    for i in 0..n {
                        x[i] += alpha * p_hat[i] + omega * s_hat[i];
                        r[i] = s[i] - omega * t[i];
                    }
                    if norm2(&r) <= tol {
                        if let Some(rt) = confirm(op, b, &x, tol) {
                            r = rt;
                            r_hat.copy_from_slice(&r);
                            fresh = true;
                            continue;
                        }
                        return ColumnOutcome { x, iterations: its };
                    }
                    if omega.norm() <= TINY {
                        broke = true;
                    }
                    rho_old = rho;
                }
            }
        }
        if broke {
            if restarts_left == 0 {
                log::debug!("bicgstab: repeated breakdown after {its} iterations");
                break;
            }
            restarts_left -= 1;
            r = op.residual(b, &x);
            r_hat.copy_from_slice(&r);
            fresh = true;
            if norm2(&r) <= tol {
                break;
            }
        }
    }
    ColumnOutcome { x, iterations: its }
}

/// `None` when the explicit residual meets the tolerance, otherwise the
/// explicit residual to continue from.
fn confirm(op: &ShiftedOperator<'_>, b: &[c64], x: &[c64], tol: f64) -> Option<Vec<c64>> {
    let rt = op.residual(b, x);
    if norm2(&rt) <= tol {
        None
    } else {
        Some(rt)
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use crate::block::Block;
    use crate::precond::FactorKind;
    use crate::sparse::{Mass, SparseMatrix};

    #[test]
    fn identity_converges_in_one_iteration() {
        let id = SparseMatrix::identity(6);
        let op = ShiftedOperator::new(&id, Mass::Identity, c64::new(0.0, 0.0)).unwrap();
        let b = random_block(6, 1, 1);
        let p = IncompleteFactorization::identity(6);
        let res = bicgstab(&InnerSolveRequest::new(&op, &b, 1e-12, &p)).unwrap();
        assert_eq!(res.iterations, vec![1]);
        assert!((&res.solution - &b).norm() < 1e-15);
        assert!(res.all_converged());
    }

    #[test]
    fn diagonal_matches_dense_solve() {
        let d: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let a = SparseMatrix::from_diagonal(&d);
        let op = ShiftedOperator::new(&a, Mass::Identity, c64::new(0.0, 0.0)).unwrap();
        let b = random_block(10, 2, 3);
        let p = IncompleteFactorization::identity(10);
        let res = bicgstab(&InnerSolveRequest::new(&op, &b, 1e-10, &p)).unwrap();
        let oracle = Block::from_fn(10, 2, |i, j| b[(i, j)] / d[i]);
        assert!((&res.solution - oracle).norm() < 1e-9);
        assert!(res.all_converged());
    }

    #[test]
    fn loose_tolerance_needs_no_iterations() {
        let a = sym_dominant(20, 5);
        let op = ShiftedOperator::new(&a, Mass::Identity, c64::new(-1.0, 0.5)).unwrap();
        let b = random_block(20, 1, 8);
        let p = IncompleteFactorization::identity(20);
        let res = bicgstab(&InnerSolveRequest::new(&op, &b, 2.0 * b.norm(), &p)).unwrap();
        assert_eq!(res.iterations, vec![0]);
        assert!(res.solution.iter().all(|v| *v == c64::new(0.0, 0.0)));
        assert!(res.all_converged());
    }

    #[test]
    fn complex_shift_with_ilu() {
        let a = sym_dominant(60, 9);
        let op = ShiftedOperator::new(&a, Mass::Identity, c64::new(-0.5, 2.0)).unwrap();
        let p = IncompleteFactorization::for_operator(&op, FactorKind::Ilut { droptol: 0.1 }).unwrap();
        let b = random_block(60, 3, 10);
        let res = bicgstab(&InnerSolveRequest::new(&op, &b, 1e-10, &p)).unwrap();
        assert!(res.all_converged());
        for (c, nrm) in res.achieved_residual_norms.iter().enumerate() {
            assert!(*nrm <= 1e-10 / 3.0);
            let r = op.residual(b.column(c).as_slice(), res.solution.column(c).as_slice());
            assert!((norm2(&r) - nrm).abs() <= 1e-13 * nrm.max(1e-300));
        }
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let a = sym_dominant(80, 11);
        let op = ShiftedOperator::new(&a, Mass::Identity, c64::new(0.0, 0.0)).unwrap();
        let p = IncompleteFactorization::identity(80);
        let b = random_block(80, 1, 12);
        let res = bicgstab(&InnerSolveRequest::new(&op, &b, 1e-14, &p).with_max_iterations(2)).unwrap();
        assert_eq!(res.iterations, vec![2]);
        assert!(!res.all_converged());
    }
}
