//! CSV ingestion and artifact output.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Name of the response column in dataset files.
pub const RESPONSE: &str = "y";

/// A design matrix with named columns and its response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    /// Subtracts the given column means and response mean.
    pub fn shifted(&self, x_means: &DVector<f64>, y_mean: f64) -> Dataset {
        let mut x = self.x.clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            col.add_scalar_mut(-x_means[j]);
        }
        Dataset { features: self.features.clone(), x, y: self.y.add_scalar(-y_mean) }
    }

    pub fn means(&self) -> (DVector<f64>, f64) {
        let n = self.x.nrows() as f64;
        let x_means = DVector::from_iterator(self.x.ncols(), self.x.column_iter().map(|c| c.sum() / n));
        (x_means, self.y.sum() / n)
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> CliResult<Table> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let parse_err = |line: u64, message: String| CliError::Parse { path: path.to_path_buf(), line, message };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(parse_err(1, "missing header row".into()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("column '{}': cannot parse '{field}' as a number", header[j])))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    Ok(Table { header, rows })
}

/// Reads a dataset with a header row and a response column named `y`.
pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let table = read_table(path)?;
    let y_col = table
        .header
        .iter()
        .position(|h| h == RESPONSE)
        .ok_or_else(|| CliError::Parse { path: path.to_path_buf(), line: 1, message: "no column named 'y'".into() })?;
    let feature_cols: Vec<usize> = (0..table.header.len()).filter(|&j| j != y_col).collect();
    if feature_cols.is_empty() {
        return Err(CliError::Parse { path: path.to_path_buf(), line: 1, message: "no feature columns".into() });
    }
    let n = table.rows.len();
    let x = DMatrix::from_fn(n, feature_cols.len(), |i, j| table.rows[i][feature_cols[j]]);
    let y = DVector::from_fn(n, |i, _| table.rows[i][y_col]);
    let features = feature_cols.iter().map(|&j| table.header[j].clone()).collect();
    Ok(Dataset { features, x, y })
}

/// Reads a square matrix, optionally with a seed column named `b`.
pub fn read_problem(path: &Path) -> CliResult<(DMatrix<f64>, Option<DVector<f64>>)> {
    let table = read_table(path)?;
    let b_col = table.header.iter().position(|h| h == "b");
    let cols: Vec<usize> = (0..table.header.len()).filter(|&j| Some(j) != b_col).collect();
    let p = table.rows.len();
    if cols.len() != p {
        return Err(CliError::Data(format!(
            "{}: matrix has {p} rows but {} columns",
            path.display(),
            cols.len()
        )));
    }
    let a = DMatrix::from_fn(p, p, |i, j| table.rows[i][cols[j]]);
    let b = b_col.map(|c| DVector::from_fn(p, |i, _| table.rows[i][c]));
    Ok((a, b))
}

/// Writes a dataset so that [`read_dataset`] recovers every value exactly.
pub fn write_dataset<W: Write>(out: W, x: &DMatrix<f64>, y: &DVector<f64>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
    header.push(RESPONSE.into());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..x.nrows() {
        let row = x.row(i).iter().chain(std::iter::once(&y[i])).map(|v| v.to_string()).collect::<Vec<_>>();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io("<output>", e))
}

/// Serializes rows as CSV with a header taken from the row type.
pub fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io("<output>", e))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(format!("CSV output failed: {e}"))
}

/// Where a command sends its artifacts: a directory, or standard output for
/// the main table only.
#[derive(Debug, Clone)]
pub enum Sink {
    Dir(PathBuf),
    Stdout,
}

impl Sink {
    pub fn new(out: Option<PathBuf>) -> CliResult<Sink> {
        match out {
            Some(dir) => {
                fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                Ok(Sink::Dir(dir))
            }
            None => Ok(Sink::Stdout),
        }
    }

    /// Writes the main table to `name` or to standard output.
    pub fn table<T: Serialize>(&self, name: &str, rows: &[T]) -> CliResult<Option<String>> {
        match self {
            Sink::Dir(dir) => {
                let path = dir.join(name);
                let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
                write_rows(io::BufWriter::new(file), rows)?;
                Ok(Some(name.to_string()))
            }
            Sink::Stdout => {
                write_rows(io::stdout().lock(), rows)?;
                Ok(None)
            }
        }
    }

    /// Writes pretty JSON to `name`; skipped on standard output.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<Option<String>> {
        let Sink::Dir(dir) = self else { return Ok(None) };
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(Some(name.to_string()))
    }
}
