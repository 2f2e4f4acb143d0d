use std::path::{Path, PathBuf};

use sylvadi::shifts::generate_shifts;
use sylvadi::sparse::read_matrix_market;
use sylvadi::SparseMatrix;

use crate::failure::{Classify, CmdResult};

pub struct ShiftRequest {
    pub a: PathBuf,
    pub m: Option<PathBuf>,
    pub b: PathBuf,
    pub c: Option<PathBuf>,
    pub pairs: usize,
    pub direct: usize,
    pub inverse: usize,
    pub out: PathBuf,
}

fn read(p: &Path) -> CmdResult<SparseMatrix> {
    read_matrix_market(p).invalid()
}

pub fn compute(req: &ShiftRequest) -> CmdResult {
    if req.pairs == 0 {
        return Err(anyhow::anyhow!("--pairs must be positive")).invalid();
    }
    let a = read(&req.a)?;
    let b = read(&req.b)?;
    let m = req.m.as_deref().map(read).transpose()?;
    let c = req.c.as_deref().map(read).transpose()?;
    let seq = generate_shifts(&a, m.as_ref(), &b, c.as_ref(), req.direct, req.inverse, req.pairs).runtime()?;
    seq.write(&req.out).runtime()?;
    println!("{} shift pairs written to {}", seq.len(), req.out.display());
    Ok(())
}
