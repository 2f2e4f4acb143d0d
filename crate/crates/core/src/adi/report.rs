use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::c64;

use super::Strategy;

/// Column order of the per-step CSV report.
pub const CSV_HEADER: [&str; 11] = [
    "step",
    "scaled_res",
    "delta_A",
    "delta_B",
    "achieved_rA",
    "achieved_rB",
    "inner_it_A",
    "inner_it_B",
    "u",
    "v",
    "wall_ms",
];

/// Everything recorded about one outer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub alpha: c64,
    pub beta: c64,
    /// `‖w_k t_k^*‖ / ‖f g^*‖`
    pub scaled_res: f64,
    pub budget: f64,
    pub delta_a: f64,
    pub delta_b: f64,
    pub achieved_ra: f64,
    pub achieved_rb: f64,
    pub inner_it_a: usize,
    pub inner_it_b: usize,
    pub u: f64,
    pub v: f64,
    /// Elapsed time since the start of the run.
    pub wall_ms: f64,
    pub converged_a: bool,
    pub converged_b: bool,
    pub clamped_min: bool,
    pub admissible: bool,
}

#[derive(Serialize)]
struct CsvRow {
    step: usize,
    scaled_res: f64,
    #[serde(rename = "delta_A")]
    delta_a: f64,
    #[serde(rename = "delta_B")]
    delta_b: f64,
    #[serde(rename = "achieved_rA")]
    achieved_ra: f64,
    #[serde(rename = "achieved_rB")]
    achieved_rb: f64,
    #[serde(rename = "inner_it_A")]
    inner_it_a: usize,
    #[serde(rename = "inner_it_B")]
    inner_it_b: usize,
    u: f64,
    v: f64,
    wall_ms: f64,
}

impl From<&StepRecord> for CsvRow {
    fn from(r: &StepRecord) -> Self {
        Self {
            step: r.step,
            scaled_res: r.scaled_res,
            delta_a: r.delta_a,
            delta_b: r.delta_b,
            achieved_ra: r.achieved_ra,
            achieved_rb: r.achieved_rb,
            inner_it_a: r.inner_it_a,
            inner_it_b: r.inner_it_b,
            u: r.u,
            v: r.v,
            wall_ms: r.wall_ms,
        }
    }
}

/// Wall-clock split of a run in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub factorization_ms: f64,
    pub inner_a_ms: f64,
    pub inner_b_ms: f64,
    /// Residual factor updates, norms and tolerance decisions.
    pub outer_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub strategy: Strategy,
    pub records: Vec<StepRecord>,
    pub converged: bool,
    pub rhs_norm: f64,
    pub gap_budget: f64,
    pub timings: PhaseTimings,
}

impl SolveReport {
    pub fn new(strategy: Strategy, rhs_norm: f64, gap_budget: f64) -> Self {
        Self {
            strategy,
            records: Vec::new(),
            converged: false,
            rhs_norm,
            gap_budget,
            timings: PhaseTimings::default(),
        }
    }

    pub fn outer_iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_scaled_residual(&self) -> f64 {
        self.records
            .last()
            .map_or(if self.rhs_norm == 0.0 { 0.0 } else { 1.0 }, |r| r.scaled_res)
    }

    pub fn total_inner_a(&self) -> usize {
        self.records.iter().map(|r| r.inner_it_a).sum()
    }

    pub fn total_inner_b(&self) -> usize {
        self.records.iter().map(|r| r.inner_it_b).sum()
    }

    pub fn total_inner(&self) -> usize {
        self.total_inner_a() + self.total_inner_b()
    }

    /// Steps where an inner solve missed its tolerance.
    pub fn inner_failures(&self) -> usize {
        self.records
            .iter()
            .filter(|r| !(r.converged_a && r.converged_b))
            .count()
    }

    /// Steps where a tolerance was raised to its lower limit.
    pub fn min_clamp_events(&self) -> usize {
        self.records.iter().filter(|r| r.clamped_min).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.records.is_empty() {
            w.write_record(CSV_HEADER).map_err(csv_err)?;
        }
        for r in &self.records {
            w.serialize(CsvRow::from(r)).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}
