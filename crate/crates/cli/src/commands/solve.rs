use std::path::Path;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sylvadi::adi::{run, true_residual_norm, AdiRun, PhaseTimings, Strategy, SylvesterProblem};
use sylvadi::shifts::{generate_shifts, ShiftSequence};

use super::{create_dir, write_json};
use crate::failure::{Classify, CmdResult, Failure};
use crate::manifest::{RunManifest, ShiftSource};

pub const SHIFT_FILE: &str = "shifts.json";
pub const PROBLEM_FILE: &str = "problem.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.csv";

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: Strategy,
    pub label: String,
    pub directory: String,
    pub converged: bool,
    pub outer_iters: usize,
    /// Columns of the solution factor `Z`.
    pub dim: usize,
    pub scaled_computed_residual: f64,
    pub scaled_true_residual: f64,
    #[serde(rename = "sum_inner_A")]
    pub sum_inner_a: usize,
    #[serde(rename = "sum_inner_B")]
    pub sum_inner_b: usize,
    pub inner_failures: usize,
    pub min_clamp_events: usize,
    pub wall_ms: f64,
    /// `1 - wall_ms / wall_ms(fixed)` against the first fixed strategy.
    pub savings_vs_fixed: Option<f64>,
    pub inner_savings_vs_fixed: Option<f64>,
    pub timings: PhaseTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub m: usize,
    pub rank: usize,
    pub rhs_norm: f64,
    pub outer_tolerance: f64,
    pub shift_pairs: usize,
    pub shift_ms: f64,
    pub parallel: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_note: Option<String>,
    pub runs: Vec<RunSummary>,
}

pub fn run_manifest(path: &Path) -> CmdResult<Summary> {
    let manifest = RunManifest::load(path).invalid()?;
    let problem = manifest.problem.load().invalid()?;
    create_dir(&manifest.out)?;
    write_json(&manifest.problem, &manifest.out.join(PROBLEM_FILE))?;

    let started = Instant::now();
    let generated = match &manifest.shifts {
        ShiftSource::File(p) => ShiftSequence::read(p).invalid()?,
        ShiftSource::Generate(params) => generate_shifts(
            problem.a(),
            problem.m(),
            problem.b(),
            problem.c(),
            params.direct,
            params.inverse,
            params.pairs,
        )
        .runtime()?,
    };
    let shift_ms = started.elapsed().as_secs_f64() * 1e3;
    // every strategy reads back the same serialized sequence
    let shift_path = manifest.out.join(SHIFT_FILE);
    generated.write(&shift_path).runtime()?;
    let shifts = ShiftSequence::read(&shift_path).runtime()?;
    info!("{} shift pairs in {shift_ms:.1} ms", shifts.len());

    let slugs = manifest.slugs();
    let jobs: Vec<(Strategy, &String)> = manifest.strategies.iter().copied().zip(&slugs).collect();
    let solve_one = |(strategy, slug): &(Strategy, &String)| -> CmdResult<RunSummary> {
        info!("running {}", strategy.label());
        let out = run(&problem, manifest.config_for(*strategy), &shifts, manifest.solvers).runtime()?;
        write_run(&manifest, &problem, &out, slug)
    };
    let mut runs: Vec<RunSummary> = if manifest.parallel {
        jobs.par_iter().map(solve_one).collect::<CmdResult<_>>()?
    } else {
        jobs.iter().map(solve_one).collect::<CmdResult<_>>()?
    };
    apply_savings(&mut runs);

    let summary = Summary {
        n: problem.n(),
        m: problem.m_dim(),
        rank: problem.rank(),
        rhs_norm: problem.rhs_norm(),
        outer_tolerance: manifest.config.outer_tolerance,
        shift_pairs: shifts.len(),
        shift_ms,
        parallel: manifest.parallel,
        timing_note: manifest
            .parallel
            .then(|| "strategies ran concurrently; wall times include contention".to_string()),
        runs,
    };
    write_json(&summary, &manifest.out.join(SUMMARY_FILE))?;
    Ok(summary)
}

fn write_run(manifest: &RunManifest, problem: &SylvesterProblem, out: &AdiRun, slug: &str) -> CmdResult<RunSummary> {
    let dir = manifest.out.join(slug);
    create_dir(&dir)?;
    out.report.write_csv_file(&dir.join(REPORT_FILE)).runtime()?;
    if manifest.save_factors {
        out.state.export(&dir).runtime()?;
    }
    let scale = problem.rhs_norm();
    let true_res = true_residual_norm(problem, &out.solution).runtime()?;
    let rep = &out.report;
    Ok(RunSummary {
        strategy: rep.strategy,
        label: rep.strategy.label(),
        directory: slug.to_string(),
        converged: rep.converged,
        outer_iters: rep.outer_iterations(),
        dim: out.solution.z.ncols(),
        scaled_computed_residual: if scale > 0.0 {
            out.state.computed_residual_norm() / scale
        } else {
            0.0
        },
        scaled_true_residual: if scale > 0.0 { true_res.norm / scale } else { 0.0 },
        sum_inner_a: rep.total_inner_a(),
        sum_inner_b: rep.total_inner_b(),
        inner_failures: rep.inner_failures(),
        min_clamp_events: rep.min_clamp_events(),
        wall_ms: rep.timings.total_ms,
        savings_vs_fixed: None,
        inner_savings_vs_fixed: None,
        timings: rep.timings,
    })
}

fn apply_savings(runs: &mut [RunSummary]) {
    let Some(reference) = runs
        .iter()
        .find(|r| matches!(r.strategy, Strategy::Fixed { .. }))
        .cloned()
    else {
        return;
    };
    let inner_ref = (reference.sum_inner_a + reference.sum_inner_b) as f64;
    for r in runs.iter_mut() {
        if reference.wall_ms > 0.0 {
            r.savings_vs_fixed = Some(1.0 - r.wall_ms / reference.wall_ms);
        }
        if inner_ref > 0.0 {
            r.inner_savings_vs_fixed = Some(1.0 - (r.sum_inner_a + r.sum_inner_b) as f64 / inner_ref);
        }
    }
}

pub fn print_table(summary: &Summary) {
    println!(
        "n = {}, m = {}, r = {}, {} shift pairs ({:.0} ms)",
        summary.n, summary.m, summary.rank, summary.shift_pairs, summary.shift_ms
    );
    println!(
        "{:<18} {:>6} {:>5} {:>10} {:>9} {:>9} {:>10} {:>7}",
        "strategy", "it_out", "dim", "true_res", "inner_A", "inner_B", "time_ms", "save"
    );
    for r in &summary.runs {
        let save = r
            .savings_vs_fixed
            .map_or("-".to_string(), |s| format!("{:.0}%", 100.0 * s));
        let flag = if r.converged { "" } else { " (not converged)" };
        println!(
            "{:<18} {:>6} {:>5} {:>10.2e} {:>9} {:>9} {:>10.0} {:>7}{flag}",
            r.label, r.outer_iters, r.dim, r.scaled_true_residual, r.sum_inner_a, r.sum_inner_b, r.wall_ms, save
        );
    }
    if let Some(note) = &summary.timing_note {
        println!("note: {note}");
    }
}

/// Labels of the runs that did not converge.
pub fn check_converged(summary: &Summary) -> CmdResult {
    let failed: Vec<String> = summary
        .runs
        .iter()
        .filter(|r| !r.converged)
        .map(|r| r.label.clone())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::NotConverged(failed))
    }
}
