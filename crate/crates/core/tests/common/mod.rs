#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sylvadi::adi::{AdiConfig, AdiRun, AdiSolver, InnerSolvers, LowRankSolution, SylvesterProblem};
use sylvadi::shifts::{generate_shifts, ShiftSequence};
use sylvadi::{c64, Block, SparseMatrix};

/// Dense nonsymmetric matrix with Gershgorin discs in the left half plane.
pub fn random_stable(n: usize, rng: &mut ChaCha8Rng) -> SparseMatrix {
    let shift = 0.5 * n as f64 + 1.0;
    SparseMatrix::from_dense_fn(n, n, |i, j| {
        let v = rng.random::<f64>() - 0.5;
        if i == j {
            v - shift
        } else {
            v
        }
    })
}

pub fn random_mass(n: usize, rng: &mut ChaCha8Rng) -> SparseMatrix {
    let mut d = DMatrix::<f64>::from_fn(n, n, |_, _| 0.1 * (rng.random::<f64>() - 0.5));
    d = &d + d.transpose();
    for i in 0..n {
        d[(i, i)] = 1.0 + n as f64 * 0.1;
    }
    SparseMatrix::from_dense(&d)
}

pub fn random_problem(n: usize, m: usize, r: usize, seed: u64, with_mass: bool) -> SylvesterProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_stable(n, &mut rng);
    let b = random_stable(m, &mut rng);
    let (mm, cc) = if with_mass {
        (Some(random_mass(n, &mut rng)), Some(random_mass(m, &mut rng)))
    } else {
        (None, None)
    };
    let f = Block::from_fn(n, r, |_, _| c64::new(rng.random::<f64>() - 0.5, 0.0));
    let g = Block::from_fn(m, r, |_, _| c64::new(rng.random::<f64>() - 0.5, 0.0));
    SylvesterProblem::new(a, b, mm, cc, f, g).unwrap()
}

pub fn shifts_for(p: &SylvesterProblem, npairs: usize) -> ShiftSequence {
    generate_shifts(p.a(), p.m(), p.b(), p.c(), 10, 20, npairs).unwrap()
}

fn dense_or_identity(x: Option<&SparseMatrix>, n: usize) -> Block {
    x.map_or_else(|| Block::identity(n, n), |x| x.to_dense())
}

/// `A X C + M X B + f g^*` assembled densely.
pub fn dense_residual(p: &SylvesterProblem, sol: &LowRankSolution) -> Block {
    let x = sol.to_dense();
    let a = p.a().to_dense();
    let b = p.b().to_dense();
    let m = dense_or_identity(p.m(), p.n());
    let c = dense_or_identity(p.c(), p.m_dim());
    &a * &x * &c + &m * &x * &b + p.f() * p.g().adjoint()
}

/// Solution of `(C^T ⊗ A + B^T ⊗ M) vec X = -vec(f g^*)`.
pub fn kronecker_solution(p: &SylvesterProblem) -> Block {
    let (n, m) = (p.n(), p.m_dim());
    let a = p.a().to_dense();
    let b = p.b().to_dense();
    let mm = dense_or_identity(p.m(), n);
    let c = dense_or_identity(p.c(), m);
    let big = c.transpose().kronecker(&a) + b.transpose().kronecker(&mm);
    let rhs = -(p.f() * p.g().adjoint());
    let vec = DVector::from_column_slice(rhs.as_slice());
    let sol = big.lu().solve(&vec).expect("Kronecker system is singular");
    Block::from_column_slice(n, m, sol.as_slice())
}

pub fn spectral_norm(b: &Block) -> f64 {
    b.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Runs to completion, calling `inspect` after every step.
pub fn drive(
    p: &SylvesterProblem,
    config: AdiConfig,
    shifts: &ShiftSequence,
    solvers: InnerSolvers,
    mut inspect: impl FnMut(&AdiSolver<'_>),
) -> AdiRun {
    let mut solver = AdiSolver::new(p, config, shifts.clone(), solvers).unwrap();
    while !solver.step().unwrap().is_done() {
        inspect(&solver);
    }
    if solver.state().step() > 0 {
        inspect(&solver);
    }
    solver.finish()
}

/// Written to the stderr handle directly so the line survives output capture.
pub fn verdict(id: usize, pass: bool, detail: impl std::fmt::Display) {
    use std::io::Write;
    let line = format!("criterion {id}: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}
