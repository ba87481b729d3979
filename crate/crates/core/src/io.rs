//! Numeric CSV ingestion with line/column diagnostics.
//!
//! Files have no header unless `header` is set, in which case the first row
//! supplies column names. Every other row must have the same number of
//! fields, each parsing as a finite number.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{FwelnetError, Result};

/// A parsed numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub values: Array2<f64>,
    pub names: Option<Vec<String>>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| FwelnetError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_error(name: &str, line: u64, column: usize, message: impl Into<String>) -> FwelnetError {
    FwelnetError::Parse {
        path: name.to_string(),
        line: line as usize,
        column,
        message: message.into(),
    }
}

/// Parse a numeric table from `reader`; `name` labels diagnostics.
pub fn parse_table<R: Read>(reader: R, header: bool, name: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names = if header {
        let h = rdr
            .headers()
            .map_err(|e| parse_error(name, 1, 1, e.to_string()))?;
        Some(h.iter().map(str::to_string).collect::<Vec<_>>())
    } else {
        None
    };
    let mut width = names.as_ref().map(Vec::len);
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(name, line, 1, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(parse_error(
                    name,
                    line,
                    rec.len().min(w) + 1,
                    format!("expected {w} fields, found {}", rec.len()),
                ))
            }
            _ => {}
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(name, line, c + 1, format!("cannot parse {field:?} as a number")))?;
            if !v.is_finite() {
                return Err(parse_error(name, line, c + 1, format!("non-finite value {field:?}")));
            }
            data.push(v);
        }
        rows += 1;
    }
    let width = width.unwrap_or(0);
    if rows == 0 || width == 0 {
        return Err(parse_error(name, 1, 1, "no data rows"));
    }
    let values = Array2::from_shape_vec((rows, width), data).expect("rows have equal width");
    Ok(Table { values, names })
}

/// Read a numeric matrix from a CSV file.
pub fn read_table(path: &Path, header: bool) -> Result<Table> {
    parse_table(open(path)?, header, &path.display().to_string())
}

/// Read a single-column CSV file as a vector.
pub fn read_vector(path: &Path, header: bool) -> Result<Array1<f64>> {
    let t = read_table(path, header)?;
    if t.values.ncols() != 1 {
        return Err(FwelnetError::Dimension(format!(
            "{}: expected one column, found {}",
            path.display(),
            t.values.ncols()
        )));
    }
    Ok(t.values.column(0).to_owned())
}

/// Read integer group labels, one per row.
pub fn read_groups(path: &Path, header: bool) -> Result<Vec<i64>> {
    let v = read_vector(path, header)?;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            if x.fract() == 0.0 && x.abs() < 9.0e15 {
                Ok(*x as i64)
            } else {
                Err(parse_error(
                    &path.display().to_string(),
                    (i + 1 + usize::from(header)) as u64,
                    1,
                    format!("group label {x} is not an integer"),
                ))
            }
        })
        .collect()
}
