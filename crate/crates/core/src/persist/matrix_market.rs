//! Matrix Market I/O: coordinate format for sparse matrices, array format
//! for dense ones. Values are written in shortest round-trip scientific
//! notation, so write/read is bit-exact.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use faer::Mat;

use super::PersistError;
use crate::linalg::SparseMatrix;

pub fn write_sparse(path: &Path, m: &SparseMatrix) -> Result<(), PersistError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let trips = m.triplets();
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), trips.len())?;
    for (i, j, v) in trips {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn write_dense(path: &Path, m: &Mat<f64>) -> Result<(), PersistError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    // column-major per the array format
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            writeln!(w, "{:e}", m[(i, j)])?;
        }
    }
    Ok(())
}

enum Layout {
    Coordinate { symmetric: bool },
    Array,
}

fn parse_header(line: &str, path: &Path) -> Result<Layout, PersistError> {
    let lower = line.to_ascii_lowercase();
    let fields: Vec<&str> = lower.split_whitespace().collect();
    if fields.len() < 4 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(PersistError::Format(format!(
            "{}: not a Matrix Market file",
            path.display()
        )));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(PersistError::Format(format!(
            "{}: only real-valued matrices are supported",
            path.display()
        )));
    }
    let qualifier = fields.get(4).copied().unwrap_or("general");
    match fields[2] {
        "coordinate" => Ok(Layout::Coordinate {
            symmetric: qualifier == "symmetric",
        }),
        "array" => {
            if qualifier != "general" {
                return Err(PersistError::Format(format!(
                    "{}: array format must be general",
                    path.display()
                )));
            }
            Ok(Layout::Array)
        }
        other => Err(PersistError::Format(format!(
            "{}: unsupported layout {other}",
            path.display()
        ))),
    }
}

pub fn read_sparse(path: &Path) -> Result<SparseMatrix, PersistError> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| PersistError::Format(format!("{}: empty file", path.display())))??;
    let layout = parse_header(&header, path)?;
    let symmetric = match layout {
        Layout::Coordinate { symmetric } => symmetric,
        Layout::Array => {
            return Err(PersistError::Format(format!(
                "{}: expected coordinate format",
                path.display()
            )))
        }
    };

    let mut size_line = String::new();
    for line in lines.by_ref() {
        let line = line?;
        if !line.trim_start().starts_with('%') && !line.trim().is_empty() {
            size_line = line;
            break;
        }
    }
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| PersistError::Format(format!("{}: size line: {e}", path.display())))?;
    if dims.len() != 3 {
        return Err(PersistError::Format(format!(
            "{}: coordinate size line needs rows cols nnz",
            path.display()
        )));
    }
    let (nrows, ncols, nnz) = (dims[0], dims[1], dims[2]);
    let mut trips: Vec<(usize, usize, f64)> = Vec::with_capacity(nnz);
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut it = t.split_whitespace();
        let i: usize = it
            .next()
            .ok_or_else(|| PersistError::Format("missing row index".into()))?
            .parse()
            .map_err(|e| PersistError::Format(format!("row index: {e}")))?;
        let j: usize = it
            .next()
            .ok_or_else(|| PersistError::Format("missing col index".into()))?
            .parse()
            .map_err(|e| PersistError::Format(format!("col index: {e}")))?;
        let v: f64 = it
            .next()
            .ok_or_else(|| PersistError::Format("missing value".into()))?
            .parse()
            .map_err(|e| PersistError::Format(format!("value: {e}")))?;
        trips.push((i - 1, j - 1, v));
        if symmetric && i != j {
            trips.push((j - 1, i - 1, v));
        }
    }
    SparseMatrix::from_triplets(nrows, ncols, &trips)
        .map_err(|e| PersistError::Format(format!("{}: {e}", path.display())))
}

pub fn read_dense(path: &Path) -> Result<Mat<f64>, PersistError> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| PersistError::Format(format!("{}: empty file", path.display())))??;
    match parse_header(&header, path)? {
        Layout::Array => {}
        Layout::Coordinate { .. } => {
            return Err(PersistError::Format(format!(
                "{}: expected array format",
                path.display()
            )))
        }
    }
    let mut size_line = String::new();
    for line in lines.by_ref() {
        let line = line?;
        if !line.trim_start().starts_with('%') && !line.trim().is_empty() {
            size_line = line;
            break;
        }
    }
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| PersistError::Format(format!("{}: size line: {e}", path.display())))?;
    if dims.len() != 2 {
        return Err(PersistError::Format(format!(
            "{}: array size line needs rows cols",
            path.display()
        )));
    }
    let (nrows, ncols) = (dims[0], dims[1]);
    let mut values = Vec::with_capacity(nrows * ncols);
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        values.push(
            t.parse::<f64>()
                .map_err(|e| PersistError::Format(format!("{}: value: {e}", path.display())))?,
        );
    }
    if values.len() != nrows * ncols {
        return Err(PersistError::Format(format!(
            "{}: expected {} values, found {}",
            path.display(),
            nrows * ncols,
            values.len()
        )));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| values[j * nrows + i]))
}

/// Writes dense blocks stacked vertically into one array file.
pub fn write_stacked_blocks(path: &Path, blocks: &[Mat<f64>]) -> Result<(), PersistError> {
    if blocks.is_empty() {
        return write_dense(path, &Mat::zeros(0, 0));
    }
    let n = blocks[0].ncols();
    let rows: usize = blocks.iter().map(faer::Mat::nrows).sum();
    let stacked = {
        let mut out = Mat::zeros(rows, n);
        let mut r0 = 0;
        for b in blocks {
            for i in 0..b.nrows() {
                for j in 0..n {
                    out[(r0 + i, j)] = b[(i, j)];
                }
            }
            r0 += b.nrows();
        }
        out
    };
    write_dense(path, &stacked)
}

/// Splits a stacked array file back into `count` equal square blocks.
pub fn read_stacked_blocks(path: &Path, count: usize) -> Result<Vec<Mat<f64>>, PersistError> {
    let stacked = read_dense(path)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    let n = stacked.ncols();
    if stacked.nrows() != count * n {
        return Err(PersistError::Format(format!(
            "{}: expected {count} stacked {n}x{n} blocks, file holds {} rows",
            path.display(),
            stacked.nrows()
        )));
    }
    Ok((0..count)
        .map(|b| stacked.get(b * n..(b + 1) * n, ..).cloned())
        .collect())
}
