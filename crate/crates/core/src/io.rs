//! CSV input and output for samples, matrices and vectors.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CovError, Result};
use crate::estimators::TimeSeriesSample;
use crate::linalg::{ProjectionVector, SymMatrix};

/// Numeric rows of a headerless or headed CSV. A first record that does not
/// parse as numbers is taken as a header and skipped.
pub fn read_numeric_rows<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if idx == 0 => continue,
            Err(e) => {
                return Err(CovError::invalid(format!(
                    "record {}: {e}",
                    idx + 1
                )))
            }
        }
    }
    Ok(rows)
}

pub fn read_sample(path: &Path) -> Result<TimeSeriesSample> {
    let rows = read_numeric_rows(std::fs::File::open(path)?)?;
    TimeSeriesSample::from_rows(&rows)
}

pub fn read_matrix(path: &Path) -> Result<SymMatrix> {
    let rows = read_numeric_rows(std::fs::File::open(path)?)?;
    SymMatrix::from_rows(&rows)
}

/// A vector stored either as one row or as one column.
pub fn read_vector(path: &Path) -> Result<ProjectionVector> {
    let rows = read_numeric_rows(std::fs::File::open(path)?)?;
    let coords: Vec<f64> = match rows.as_slice() {
        [single] => single.clone(),
        many if many.iter().all(|r| r.len() == 1) => many.iter().map(|r| r[0]).collect(),
        _ => return Err(CovError::invalid("vector CSV must be one row or one column")),
    };
    ProjectionVector::new(coords)
}

fn write_rows<'a, W: Write>(w: W, rows: impl Iterator<Item = &'a [f64]>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for r in rows {
        wtr.write_record(r.iter().map(|v| format!("{v:e}")))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_sample<W: Write>(w: W, x: &TimeSeriesSample) -> Result<()> {
    write_rows(w, x.rows())
}

pub fn write_matrix<W: Write>(w: W, m: &SymMatrix) -> Result<()> {
    write_rows(w, (0..m.dim()).map(|i| m.row(i)))
}

/// Writes to `path`, or to stdout when `path` is `-`.
pub fn with_output(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    if path.as_os_str() == "-" {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        f(&mut lock)
    } else {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        f(&mut file)?;
        file.flush()?;
        Ok(())
    }
}
