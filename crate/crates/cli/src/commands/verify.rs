use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde::{Deserialize, Serialize};
use sylvadi::adi::{
    residual_gap, small_sylvester_defect, true_residual_norm, verify_factor_identity, AdiState, SylvesterProblem,
};

use super::solve::PROBLEM_FILE;
use super::write_json;
use crate::failure::{Classify, CmdResult};
use crate::manifest::ProblemSource;

pub const VERIFY_FILE: &str = "verify.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub directory: String,
    pub steps: usize,
    pub dim: usize,
    pub scaled_computed_residual: f64,
    pub scaled_true_residual: f64,
    pub power_iterations: usize,
    pub power_converged: bool,
    /// `u + v`
    pub gap_estimate: f64,
    /// Spectral norm of true minus computed residual; needs retained inner residuals.
    pub gap: Option<f64>,
    pub scaled_gap: Option<f64>,
    pub identity_defect: Option<f64>,
    pub small_sylvester_defect: f64,
}

/// Run directories below `dir`, or `dir` itself if it holds a state.
fn run_dirs(dir: &Path) -> CmdResult<Vec<PathBuf>> {
    if dir.join("state.json").exists() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| anyhow!("reading {}: {e}", dir.display()))
        .invalid()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("state.json").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(anyhow!(
            "no saved runs under {}; solve with save_factors",
            dir.display()
        ))
        .invalid();
    }
    Ok(dirs)
}

fn find_problem(dir: &Path) -> CmdResult<SylvesterProblem> {
    let path = [dir.join(PROBLEM_FILE), dir.join("..").join(PROBLEM_FILE)]
        .into_iter()
        .find(|p| p.exists())
        .ok_or_else(|| anyhow!("no {PROBLEM_FILE} in {} or its parent", dir.display()))
        .invalid()?;
    let text = std::fs::read_to_string(&path).invalid()?;
    let source: ProblemSource = serde_json::from_str(&text).invalid()?;
    source.load().invalid()
}

pub fn verify(dir: &Path) -> CmdResult<Vec<Diagnostics>> {
    let dirs = run_dirs(dir)?;
    let problem = find_problem(dir)?;
    let scale = problem.rhs_norm();
    let scaled = |x: f64| if scale > 0.0 { x / scale } else { 0.0 };
    let mut all = Vec::new();
    for d in dirs {
        let state = AdiState::import(&d).invalid()?;
        let solution = state.solution();
        let true_res = true_residual_norm(&problem, &solution).invalid()?;
        let retained = state.inner_residuals_a().is_some();
        let gap = retained.then(|| residual_gap(&problem, &state)).transpose().invalid()?;
        let identity_defect = retained
            .then(|| verify_factor_identity(&problem, &state))
            .transpose()
            .invalid()?;
        let diag = Diagnostics {
            directory: d
                .file_name()
                .map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
            steps: state.step(),
            dim: solution.z.ncols(),
            scaled_computed_residual: scaled(state.computed_residual_norm()),
            scaled_true_residual: scaled(true_res.norm),
            power_iterations: true_res.iterations,
            power_converged: true_res.converged,
            gap_estimate: state.u() + state.v(),
            gap,
            scaled_gap: gap.map(scaled),
            identity_defect,
            small_sylvester_defect: small_sylvester_defect(&state),
        };
        println!(
            "{:<18} steps {:>3} true {:.3e} computed {:.3e} gap {} defect {}",
            diag.directory,
            diag.steps,
            diag.scaled_true_residual,
            diag.scaled_computed_residual,
            diag.gap.map_or("-".into(), |g| format!("{g:.3e}")),
            diag.identity_defect.map_or("-".into(), |g| format!("{g:.3e}")),
        );
        all.push(diag);
    }
    write_json(&all, &dir.join(VERIFY_FILE))?;
    Ok(all)
}
