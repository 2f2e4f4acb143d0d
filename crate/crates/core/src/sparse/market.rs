//! Matrix Market I/O.
//!
//! Sparse coefficient matrices use the `coordinate real` format with
//! `general` or `symmetric` storage (1-based on disk). Dense blocks such as
//! right-hand sides and solution factors use the `array` format, real or
//! complex.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::block::Block;
use crate::error::{Error, Result};
use crate::scalar::c64;

use super::SparseMatrix;

#[derive(Debug, PartialEq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, PartialEq)]
enum Field {
    Real,
    Integer,
    Complex,
}

#[derive(Debug, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
}

struct Header {
    layout: Layout,
    field: Field,
    symmetry: Symmetry,
}

fn mm_err(line: usize, reason: impl Into<String>) -> Error {
    Error::MatrixMarket {
        line,
        reason: reason.into(),
    }
}

fn parse_header(line: &str) -> Result<Header> {
    let tok: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tok.len() != 5 || tok[0] != "%%matrixmarket" || tok[1] != "matrix" {
        return Err(mm_err(
            1,
            "expected '%%MatrixMarket matrix <layout> <field> <symmetry>'",
        ));
    }
    let layout = match tok[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(mm_err(1, format!("unsupported layout '{other}'"))),
    };
    let field = match tok[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "complex" => Field::Complex,
        other => return Err(mm_err(1, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tok[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(mm_err(1, format!("unsupported symmetry '{other}'"))),
    };
    Ok(Header {
        layout,
        field,
        symmetry,
    })
}

/// Data lines with their 1-based line numbers, comments and blanks removed.
fn data_lines(lines: impl Iterator<Item = std::io::Result<String>>, path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        out.push((k + 2, t.to_string()));
    }
    Ok(out)
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let t = tok.ok_or_else(|| mm_err(line, "missing value"))?;
    t.parse::<f64>()
        .map_err(|_| mm_err(line, format!("invalid number '{t}'")))
}

fn parse_usize(tok: Option<&str>, line: usize) -> Result<usize> {
    let t = tok.ok_or_else(|| mm_err(line, "missing integer"))?;
    t.parse::<usize>()
        .map_err(|_| mm_err(line, format!("invalid integer '{t}'")))
}

fn open_lines(path: &Path) -> Result<(String, Vec<(usize, String)>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| mm_err(1, "empty file"))?
        .map_err(|e| Error::io(path, e))?;
    let body = data_lines(lines, path)?;
    Ok((first, body))
}

/// Reads a real sparse matrix. Symmetric storage is expanded to the full
/// pattern.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let (first, body) = open_lines(path)?;
    let header = parse_header(&first)?;
    if header.layout != Layout::Coordinate {
        return Err(mm_err(1, "sparse matrices must use the coordinate layout"));
    }
    if header.field == Field::Complex {
        return Err(mm_err(1, "complex coefficient matrices are not supported"));
    }
    let mut it = body.into_iter();
    let (sline, size) = it.next().ok_or_else(|| mm_err(2, "missing size line"))?;
    let mut st = size.split_whitespace();
    let nrows = parse_usize(st.next(), sline)?;
    let ncols = parse_usize(st.next(), sline)?;
    let nnz = parse_usize(st.next(), sline)?;
    if header.symmetry == Symmetry::Symmetric && nrows != ncols {
        return Err(mm_err(sline, "symmetric matrix must be square"));
    }

    let mut triplets = Vec::with_capacity(if header.symmetry == Symmetry::Symmetric {
        2 * nnz
    } else {
        nnz
    });
    let mut count = 0;
    for (line, text) in it {
        let mut t = text.split_whitespace();
        let i = parse_usize(t.next(), line)?;
        let j = parse_usize(t.next(), line)?;
        let v = parse_f64(t.next(), line)?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(mm_err(line, format!("index ({i}, {j}) outside {nrows}×{ncols}")));
        }
        let (i, j) = (i - 1, j - 1);
        if header.symmetry == Symmetry::Symmetric && j > i {
            return Err(mm_err(line, "symmetric storage must list the lower triangle"));
        }
        triplets.push((i, j, v));
        if header.symmetry == Symmetry::Symmetric && i != j {
            triplets.push((j, i, v));
        }
        count += 1;
    }
    if count != nnz {
        return Err(mm_err(sline, format!("header announces {nnz} entries, found {count}")));
    }
    SparseMatrix::from_triplets(nrows, ncols, &triplets)
}

/// Writes `coordinate real general`, 1-based, shortest round-trip decimals.
pub fn write_matrix_market(matrix: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "%%MatrixMarket matrix coordinate real general").map_err(io)?;
    writeln!(w, "{} {} {}", matrix.nrows(), matrix.ncols(), matrix.nnz()).map_err(io)?;
    for i in 0..matrix.nrows() {
        let (cols, vals) = matrix.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Reads a dense `array` block, real or complex, column-major.
pub fn read_block(path: impl AsRef<Path>) -> Result<Block> {
    let path = path.as_ref();
    let (first, body) = open_lines(path)?;
    let header = parse_header(&first)?;
    if header.layout != Layout::Array || header.symmetry != Symmetry::General {
        return Err(mm_err(1, "dense blocks must use 'array ... general'"));
    }
    let mut it = body.into_iter();
    let (sline, size) = it.next().ok_or_else(|| mm_err(2, "missing size line"))?;
    let mut st = size.split_whitespace();
    let nrows = parse_usize(st.next(), sline)?;
    let ncols = parse_usize(st.next(), sline)?;
    let mut values = Vec::with_capacity(nrows * ncols);
    for (line, text) in it {
        let mut t = text.split_whitespace();
        let re = parse_f64(t.next(), line)?;
        let im = if header.field == Field::Complex {
            parse_f64(t.next(), line)?
        } else {
            0.0
        };
        values.push(c64::new(re, im));
    }
    if values.len() != nrows * ncols {
        return Err(mm_err(
            sline,
            format!("expected {} values, found {}", nrows * ncols, values.len()),
        ));
    }
    Ok(Block::from_vec(nrows, ncols, values))
}

/// Writes a dense block; `real` format when every imaginary part is zero.
pub fn write_block(block: &Block, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let real = block.iter().all(|v| v.im == 0.0);
    let field = if real { "real" } else { "complex" };
    writeln!(w, "%%MatrixMarket matrix array {field} general").map_err(io)?;
    writeln!(w, "{} {}", block.nrows(), block.ncols()).map_err(io)?;
    for v in block.iter() {
        if real {
            writeln!(w, "{:e}", v.re).map_err(io)?;
        } else {
            writeln!(w, "{:e} {:e}", v.re, v.im).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn reads_identity() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "id.mtx",
            "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 1.0\n2 2 1.0\n",
        );
        let a = read_matrix_market(&p).unwrap();
        assert_eq!(a, SparseMatrix::identity(2));
    }

    #[test]
    fn expands_symmetric_storage() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "s.mtx",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2\n2 1 1\n2 2 2\n",
        );
        let a = read_matrix_market(&p).unwrap();
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.get(1, 1), 2.0);
    }

    #[test]
    fn rejects_malformed_input() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            "%%MatrixMarket matrix coordinate\n1 1 1\n1 1 1\n",
            "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n",
        ];
        for (k, text) in cases.iter().enumerate() {
            let p = write(&dir, &format!("bad{k}.mtx"), text);
            assert!(
                matches!(read_matrix_market(&p), Err(Error::MatrixMarket { .. })),
                "case {k} accepted"
            );
        }
        assert!(matches!(
            read_matrix_market(dir.path().join("missing.mtx")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn round_trip_random() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let a = SparseMatrix::from_dense_fn(10, 10, |_, _| {
            if rng.random::<f64>() < 0.3 {
                rng.random::<f64>() * 200.0 - 100.0
            } else {
                0.0
            }
        });
        let p = dir.path().join("r.mtx");
        write_matrix_market(&a, &p).unwrap();
        assert_eq!(read_matrix_market(&p).unwrap(), a);
    }

    #[test]
    fn block_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let b = Block::from_fn(4, 3, |i, j| c64::new(i as f64 * 0.1, j as f64 - 1.0 / 3.0));
        let p = dir.path().join("b.mtx");
        write_block(&b, &p).unwrap();
        assert_eq!(read_block(&p).unwrap(), b);
        let r = Block::from_fn(3, 2, |i, j| c64::new((i * 2 + j) as f64 / 7.0, 0.0));
        write_block(&r, &p).unwrap();
        assert!(fs::read_to_string(&p).unwrap().contains("array real general"));
        assert_eq!(read_block(&p).unwrap(), r);
    }
}
