use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::block::{self, Block};
use crate::error::{Error, Result};
use crate::krylov::InnerSolveResult;
use crate::scalar::c64;
use crate::shifts::ShiftSequence;
use crate::sparse::{read_block, write_block};

use super::solvers::SideSolver;
use super::tolerance::{budget_back_looking, budget_plain, choose_tolerances, gamma};
use super::{AdiConfig, InnerSolvers, SolveReport, StepRecord, SylvesterProblem};

/// `X ≈ Z Γ Y^*` with `Γ = diag(γ_1, …, γ_k) ⊗ I_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankSolution {
    pub z: Block,
    pub y: Block,
    /// One entry per step.
    pub gammas: Vec<c64>,
    pub rank: usize,
}

impl LowRankSolution {
    pub fn empty(n: usize, m: usize, rank: usize) -> Self {
        Self {
            z: Block::zeros(n, 0),
            y: Block::zeros(m, 0),
            gammas: Vec::new(),
            rank,
        }
    }

    pub fn steps(&self) -> usize {
        self.gammas.len()
    }

    /// Diagonal of `Γ`, length `k·r`.
    pub fn gamma_diagonal(&self) -> Vec<c64> {
        self.gammas
            .iter()
            .flat_map(|g| std::iter::repeat_n(*g, self.rank))
            .collect()
    }

    /// `Z Γ` (columns of `Z` scaled).
    pub fn z_gamma(&self) -> Block {
        let mut zg = self.z.clone();
        for (j, g) in self.gamma_diagonal().into_iter().enumerate() {
            zg.column_mut(j).iter_mut().for_each(|v| *v *= g);
        }
        zg
    }

    /// Dense `X` (small problems only).
    pub fn to_dense(&self) -> Block {
        self.z_gamma() * self.y.adjoint()
    }

    /// Writes `Z.mtx`, `gamma.mtx` and `Y.mtx` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_block(&self.z, dir.join("Z.mtx"))?;
        write_block(
            &Block::from_column_slice(self.gammas.len() * self.rank, 1, &self.gamma_diagonal()),
            dir.join("gamma.mtx"),
        )?;
        write_block(&self.y, dir.join("Y.mtx"))
    }

    pub fn import(dir: &Path) -> Result<Self> {
        let z = read_block(dir.join("Z.mtx"))?;
        let y = read_block(dir.join("Y.mtx"))?;
        let diag = read_block(dir.join("gamma.mtx"))?;
        let kr = z.ncols();
        if y.ncols() != kr || diag.len() != kr {
            return Err(Error::InvalidStructure(format!(
                "factor widths disagree: Z {kr}, Y {}, gamma {}",
                y.ncols(),
                diag.len()
            )));
        }
        if kr == 0 {
            return Ok(Self::empty(z.nrows(), y.nrows(), 1));
        }
        // the rank is the length of the first run of equal diagonal entries
        let first = diag[0];
        let run = diag.iter().take_while(|g| **g == first).count();
        let rank = (1..=run)
            .rev()
            .find(|r| kr % r == 0 && is_blocked(diag.as_slice(), *r))
            .unwrap_or(1);
        let gammas = diag.iter().step_by(rank).copied().collect();
        Ok(Self { z, y, gammas, rank })
    }
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    step: usize,
    alpha: Vec<[f64; 2]>,
    beta: Vec<[f64; 2]>,
    gamma: Vec<[f64; 2]>,
    u: f64,
    v: f64,
    residual_norm: f64,
}

fn is_blocked(diag: &[c64], r: usize) -> bool {
    diag.chunks(r).all(|c| c.iter().all(|g| *g == c[0]))
}

/// Iteration state after `k` steps.
#[derive(Debug, Clone)]
pub struct AdiState {
    step: usize,
    z_blocks: Vec<Block>,
    y_blocks: Vec<Block>,
    gammas: Vec<c64>,
    shifts: Vec<(c64, c64)>,
    w: Block,
    t: Block,
    u: f64,
    v: f64,
    residual_norm: f64,
    inner_a: Option<Vec<Block>>,
    inner_b: Option<Vec<Block>>,
}

impl AdiState {
    fn new(problem: &SylvesterProblem, keep_diagnostics: bool) -> Self {
        Self {
            step: 0,
            z_blocks: Vec::new(),
            y_blocks: Vec::new(),
            gammas: Vec::new(),
            shifts: Vec::new(),
            w: problem.f().clone(),
            t: problem.g().clone(),
            u: 0.0,
            v: 0.0,
            residual_norm: problem.rhs_norm(),
            inner_a: keep_diagnostics.then(Vec::new),
            inner_b: keep_diagnostics.then(Vec::new),
        }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn w(&self) -> &Block {
        &self.w
    }

    pub fn t(&self) -> &Block {
        &self.t
    }

    /// Accumulated gap estimate from the A-side products `‖M z‖ ‖r^B‖`.
    pub fn u(&self) -> f64 {
        self.u
    }

    /// Accumulated gap estimate from the B-side products `‖C^T y‖ ‖r^A‖`.
    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn gammas(&self) -> &[c64] {
        &self.gammas
    }

    pub fn shifts(&self) -> &[(c64, c64)] {
        &self.shifts
    }

    /// `‖w_k t_k^*‖₂`
    pub fn computed_residual_norm(&self) -> f64 {
        self.residual_norm
    }

    pub fn z_blocks(&self) -> &[Block] {
        &self.z_blocks
    }

    pub fn y_blocks(&self) -> &[Block] {
        &self.y_blocks
    }

    /// Inner residual blocks `w_{k-1} - (A + β_k M) z_k`, if retained.
    pub fn inner_residuals_a(&self) -> Option<&[Block]> {
        self.inner_a.as_deref()
    }

    /// Inner residual blocks `t_{k-1} - (B + α_k C)^* y_k`, if retained.
    pub fn inner_residuals_b(&self) -> Option<&[Block]> {
        self.inner_b.as_deref()
    }

    /// Writes the factors, `W.mtx`, `T.mtx`, `state.json` and, if retained,
    /// the inner residual blocks `RA.mtx` and `RB.mtx` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        self.solution().export(dir)?;
        write_block(&self.w, dir.join("W.mtx"))?;
        write_block(&self.t, dir.join("T.mtx"))?;
        if let (Some(ra), Some(rb)) = (&self.inner_a, &self.inner_b) {
            write_block(&block::hcat(ra, self.w.nrows()), dir.join("RA.mtx"))?;
            write_block(&block::hcat(rb, self.t.nrows()), dir.join("RB.mtx"))?;
        }
        let file = StateFile {
            step: self.step,
            alpha: self.shifts.iter().map(|p| [p.0.re, p.0.im]).collect(),
            beta: self.shifts.iter().map(|p| [p.1.re, p.1.im]).collect(),
            gamma: self.gammas.iter().map(|g| [g.re, g.im]).collect(),
            u: self.u,
            v: self.v,
            residual_norm: self.residual_norm,
        };
        let path = dir.join("state.json");
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Reads a directory written by [`export`](Self::export).
    pub fn import(dir: &Path) -> Result<Self> {
        let path = dir.join("state.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let file: StateFile = serde_json::from_str(&text)?;
        let w = read_block(dir.join("W.mtx"))?;
        let t = read_block(dir.join("T.mtx"))?;
        let z = read_block(dir.join("Z.mtx"))?;
        let y = read_block(dir.join("Y.mtx"))?;
        let r = w.ncols();
        let k = file.step;
        let cplx = |v: &[f64; 2]| c64::new(v[0], v[1]);
        if file.alpha.len() != k || file.beta.len() != k || file.gamma.len() != k {
            return Err(Error::InvalidStructure(format!(
                "state.json lists {} shifts for {k} steps",
                file.alpha.len()
            )));
        }
        if t.ncols() != r || z.ncols() != k * r || y.ncols() != k * r {
            return Err(Error::InvalidStructure(format!(
                "factor widths Z {}, Y {}, T {} do not fit {k} steps of rank {r}",
                z.ncols(),
                y.ncols(),
                t.ncols()
            )));
        }
        let split = |b: &Block| -> Vec<Block> { (0..k).map(|j| b.columns(j * r, r).into_owned()).collect() };
        let optional = |name: &str, rows: usize| -> Result<Option<Vec<Block>>> {
            let p = dir.join(name);
            if !p.exists() {
                return Ok(None);
            }
            let b = read_block(&p)?;
            if b.nrows() != rows || b.ncols() != k * r {
                return Err(Error::InvalidStructure(format!(
                    "{name} is {}×{}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            Ok(Some(split(&b)))
        };
        let inner_a = optional("RA.mtx", w.nrows())?;
        let inner_b = optional("RB.mtx", t.nrows())?;
        Ok(Self {
            step: k,
            z_blocks: split(&z),
            y_blocks: split(&y),
            gammas: file.gamma.iter().map(cplx).collect(),
            shifts: file
                .alpha
                .iter()
                .zip(&file.beta)
                .map(|(a, b)| (cplx(a), cplx(b)))
                .collect(),
            w,
            t,
            u: file.u,
            v: file.v,
            residual_norm: file.residual_norm,
            inner_a,
            inner_b,
        })
    }

    pub fn solution(&self) -> LowRankSolution {
        let rank = self.w.ncols();
        LowRankSolution {
            z: block::hcat(&self.z_blocks, self.w.nrows()),
            y: block::hcat(&self.y_blocks, self.t.nrows()),
            gammas: self.gammas.clone(),
            rank,
        }
    }
}

/// Result of [`AdiSolver::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    /// A step was taken and the iteration continues.
    Running,
    Converged,
    MaxSteps,
    /// A non-cyclic shift sequence ran out.
    ShiftsExhausted,
}

impl StepStatus {
    pub fn is_done(self) -> bool {
        self != StepStatus::Running
    }
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct AdiRun {
    pub solution: LowRankSolution,
    pub report: SolveReport,
    pub state: AdiState,
}

/// Step-by-step driver of the outer iteration.
pub struct AdiSolver<'p> {
    problem: &'p SylvesterProblem,
    config: AdiConfig,
    shifts: ShiftSequence,
    force_direct_a: bool,
    force_direct_b: bool,
    concurrent: bool,
    side_a: SideSolver<'p>,
    side_b: SideSolver<'p>,
    state: AdiState,
    report: SolveReport,
    threshold: f64,
    gap: f64,
    started: Instant,
    status: StepStatus,
}

impl<'p> AdiSolver<'p> {
    pub fn new(
        problem: &'p SylvesterProblem,
        config: AdiConfig,
        shifts: ShiftSequence,
        solvers: InnerSolvers,
    ) -> Result<Self> {
        config.validate()?;
        let rhs_norm = problem.rhs_norm();
        let gap = config.gap_budget.unwrap_or(config.outer_tolerance * rhs_norm);
        let side_a = SideSolver::new(
            problem.a(),
            problem.m(),
            false,
            solvers.preconditioner_a,
            solvers.policy,
            solvers.max_iterations,
        );
        let side_b = SideSolver::new(
            problem.b(),
            problem.c(),
            true,
            solvers.preconditioner_b,
            solvers.policy,
            solvers.max_iterations,
        );
        let mut solver = Self {
            problem,
            config,
            shifts,
            force_direct_a: solvers.force_direct_a,
            force_direct_b: solvers.force_direct_b,
            concurrent: solvers.concurrent_sides,
            side_a,
            side_b,
            state: AdiState::new(problem, config.keep_diagnostics),
            report: SolveReport::new(config.strategy, rhs_norm, gap),
            threshold: config.outer_tolerance * rhs_norm,
            gap,
            started: Instant::now(),
            status: StepStatus::Running,
        };
        solver.status = solver.check_stop();
        solver.report.converged = solver.status == StepStatus::Converged;
        Ok(solver)
    }

    pub fn state(&self) -> &AdiState {
        &self.state
    }

    pub fn report(&self) -> &SolveReport {
        &self.report
    }

    pub fn problem(&self) -> &SylvesterProblem {
        self.problem
    }

    pub fn status(&self) -> StepStatus {
        self.status
    }

    /// Absolute gap budget `ε` in use.
    pub fn gap_budget(&self) -> f64 {
        self.gap
    }

    fn check_stop(&self) -> StepStatus {
        if self.state.residual_norm < self.threshold || self.problem.rhs_norm() == 0.0 {
            StepStatus::Converged
        } else if self.state.step >= self.config.max_steps {
            StepStatus::MaxSteps
        } else if self.shifts.pair(self.state.step).is_none() {
            StepStatus::ShiftsExhausted
        } else {
            StepStatus::Running
        }
    }

    /// Performs one outer step unless the iteration has already stopped.
    pub fn step(&mut self) -> Result<StepStatus> {
        if self.status.is_done() {
            return Ok(self.status);
        }
        let outer_start = Instant::now();
        let k = self.state.step + 1;
        let (alpha, beta) = self.shifts.pair(k - 1).expect("checked by check_stop");
        let g = gamma(alpha, beta);
        let cfg = &self.config;
        let budget = if cfg.strategy.is_back_looking() {
            budget_back_looking(self.gap, cfg.xi, cfg.max_steps, k, self.state.u, self.state.v)
        } else {
            budget_plain(self.gap, cfg.xi, cfg.max_steps)
        };
        let norm_w = self.state.w.norm();
        let norm_t = self.state.t.norm();
        let decision = choose_tolerances(cfg.strategy, &cfg.bounds, budget, norm_w, norm_t);
        let tol_a = (!(cfg.strategy.direct_a() || self.force_direct_a)).then_some(decision.delta_a);
        let tol_b = (!(cfg.strategy.direct_b() || self.force_direct_b)).then_some(decision.delta_b);
        let mut outer_ms = outer_start.elapsed().as_secs_f64() * 1e3;

        let (fa0, fb0) = (self.side_a.factor_ms, self.side_b.factor_ms);
        let (sa0, sb0) = (self.side_a.solve_ms, self.side_b.solve_ms);
        let (w_prev, t_prev) = (&self.state.w, &self.state.t);
        let (side_a, side_b) = (&mut self.side_a, &mut self.side_b);
        let (res_a, res_b): (Result<InnerSolveResult>, Result<InnerSolveResult>) = if self.concurrent {
            rayon::join(
                || side_a.solve(beta, w_prev, tol_a),
                || side_b.solve(alpha, t_prev, tol_b),
            )
        } else {
            (side_a.solve(beta, w_prev, tol_a), side_b.solve(alpha, t_prev, tol_b))
        };
        let (res_a, res_b) = (res_a?, res_b?);

        let update_start = Instant::now();
        let mz = self.problem.apply_m(&res_a.solution)?;
        let cty = self.problem.apply_ct(&res_b.solution)?;
        let norm_ra = res_a.residual_norm();
        let norm_rb = res_b.residual_norm();
        let (it_a, it_b) = (res_a.total_iterations(), res_b.total_iterations());
        let (conv_a, conv_b) = (res_a.all_converged(), res_b.all_converged());
        let st = &mut self.state;
        st.w += &mz * g;
        st.t += &cty * g.conj();
        st.u += g.norm() * mz.norm() * norm_rb;
        st.v += g.norm() * cty.norm() * norm_ra;
        st.z_blocks.push(res_a.solution);
        st.y_blocks.push(res_b.solution);
        if let Some(s) = st.inner_a.as_mut() {
            s.push(res_a.residual);
        }
        if let Some(s) = st.inner_b.as_mut() {
            s.push(res_b.residual);
        }
        st.gammas.push(g);
        st.shifts.push((alpha, beta));
        st.step = k;
        st.residual_norm = block::lowrank_spectral_norm(&st.w, &st.t);
        outer_ms += update_start.elapsed().as_secs_f64() * 1e3;

        let rhs_norm = self.report.rhs_norm;
        let record = StepRecord {
            step: k,
            alpha,
            beta,
            scaled_res: st.residual_norm / rhs_norm,
            budget,
            delta_a: tol_a.unwrap_or(0.0),
            delta_b: tol_b.unwrap_or(0.0),
            achieved_ra: norm_ra,
            achieved_rb: norm_rb,
            inner_it_a: it_a,
            inner_it_b: it_b,
            u: st.u,
            v: st.v,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
            converged_a: conv_a,
            converged_b: conv_b,
            clamped_min: decision.clamped_at_min(),
            admissible: decision.admissible,
        };
        if !(record.converged_a && record.converged_b) {
            log::warn!(
                "step {k}: inner solve missed its tolerance (A {:.3e}/{:.3e}, B {:.3e}/{:.3e})",
                norm_ra,
                record.delta_a,
                norm_rb,
                record.delta_b
            );
        }
        log::debug!(
            "step {k}: scaled residual {:.3e}, inner its {}/{}",
            record.scaled_res,
            record.inner_it_a,
            record.inner_it_b
        );
        self.report.records.push(record);

        let t = &mut self.report.timings;
        t.factorization_ms += (self.side_a.factor_ms - fa0) + (self.side_b.factor_ms - fb0);
        t.inner_a_ms += self.side_a.solve_ms - sa0;
        t.inner_b_ms += self.side_b.solve_ms - sb0;
        t.outer_ms += outer_ms;
        t.total_ms = self.started.elapsed().as_secs_f64() * 1e3;

        self.status = self.check_stop();
        self.report.converged = self.status == StepStatus::Converged;
        Ok(self.status)
    }

    pub fn finish(mut self) -> AdiRun {
        self.report.timings.total_ms = self.started.elapsed().as_secs_f64() * 1e3;
        AdiRun {
            solution: self.state.solution(),
            report: self.report,
            state: self.state,
        }
    }
}

/// Runs the iteration to convergence, `max_steps`, or the end of a
/// non-cyclic shift sequence. Non-convergence is reported through
/// `report.converged`, not as an error.
pub fn run(
    problem: &SylvesterProblem,
    config: AdiConfig,
    shifts: &ShiftSequence,
    solvers: InnerSolvers,
) -> Result<AdiRun> {
    let mut solver = AdiSolver::new(problem, config, shifts.clone(), solvers)?;
    while !solver.step()?.is_done() {}
    Ok(solver.finish())
}
