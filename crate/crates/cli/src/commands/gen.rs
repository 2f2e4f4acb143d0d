use std::path::Path;

use sylvadi::block::from_real;
use sylvadi::problems::ProblemSpec;
use sylvadi::sparse::{write_block, write_matrix_market};

use super::create_dir;
use crate::failure::{Classify, CmdResult};

/// Writes `A.mtx`, `B.mtx`, `f.mtx` and `g.mtx` for a generator spec.
pub fn generate(spec_path: &Path, out: &Path) -> CmdResult {
    let spec = ProblemSpec::read(spec_path).invalid()?;
    let problem = spec.generate().invalid()?;
    create_dir(out)?;
    write_matrix_market(&problem.a, out.join("A.mtx")).runtime()?;
    write_matrix_market(&problem.b, out.join("B.mtx")).runtime()?;
    write_block(&from_real(&problem.f), out.join("f.mtx")).runtime()?;
    write_block(&from_real(&problem.g), out.join("g.mtx")).runtime()?;
    println!(
        "wrote A ({0}×{0}), B ({1}×{1}), f, g (rank {2}) to {3}",
        problem.a.nrows(),
        problem.b.nrows(),
        spec.r,
        out.display()
    );
    Ok(())
}
