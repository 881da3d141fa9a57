//! Curve bundles on disk.
//!
//! A bundle is a CSV file whose header holds the grid times, optionally followed
//! by a column named `y` with the responses. Empty cells and `NA` mark missing
//! values. A case with more than `max_missing` missing curve values is dropped;
//! otherwise each interior gap is filled with the mean of the closest observed
//! values before and after it, and a gap touching the boundary takes the nearest
//! observed value.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::data::{CurveMatrix, FunctionalDataset, Grid};
use crate::error::{Error, Result};

/// Relative tolerance on the spacing of header times.
pub const GRID_TOLERANCE: f64 = 1e-9;

pub const RESPONSE_COLUMN: &str = "y";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MissingPolicy {
    /// Cases with more missing curve values than this are dropped.
    pub max_missing: usize,
}

impl Default for MissingPolicy {
    fn default() -> Self {
        Self { max_missing: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowRepair {
    /// 1-based data row.
    pub row: usize,
    pub imputed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedRow {
    pub row: usize,
    pub missing: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub repaired: Vec<RowRepair>,
    pub dropped: Vec<DroppedRow>,
}

#[derive(Debug, Clone)]
pub struct LoadedCurves {
    pub data: FunctionalDataset,
    pub report: LoadReport,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

fn parse_number(cell: &str, row: usize, column: usize) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| Error::Parse {
        row,
        column,
        message: format!("`{cell}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column,
            message: format!("`{cell}` is not finite"),
        });
    }
    Ok(v)
}

/// Builds the grid from header times, checking they are equidistant.
pub fn grid_from_times(times: &[f64]) -> Result<Grid> {
    if times.len() < 3 {
        return Err(Error::Format(format!(
            "need at least 3 grid times, found {}",
            times.len()
        )));
    }
    if let Some(w) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Format(format!(
            "grid times must increase strictly (columns {} and {})",
            w + 1,
            w + 2
        )));
    }
    let p = times.len();
    let grid = Grid::new(times[0], times[p - 1], p).map_err(|e| Error::Format(e.to_string()))?;
    let tol = GRID_TOLERANCE * grid.width();
    if let Some(j) = (0..p).find(|&j| (times[j] - grid.point(j)).abs() > tol) {
        return Err(Error::Format(format!(
            "grid is not equidistant: time {} in column {} should be {}",
            times[j],
            j + 1,
            grid.point(j)
        )));
    }
    Ok(grid)
}

/// Fills gaps in place; returns the number of imputed values, or `None` when
/// nothing was observed.
pub fn impute_row(values: &mut [Option<f64>]) -> Option<usize> {
    let observed: Vec<usize> = (0..values.len()).filter(|&j| values[j].is_some()).collect();
    let (&first, &last) = (observed.first()?, observed.last()?);
    let mut filled = 0;
    let mut prev = first;
    for j in 0..values.len() {
        if values[j].is_some() {
            prev = j;
            continue;
        }
        let v = if j < first {
            values[first]
        } else if j > last {
            values[last]
        } else {
            let next = (j + 1..values.len())
                .find(|&l| values[l].is_some())
                .unwrap_or(last);
            Some(0.5 * (values[prev].unwrap_or(0.0) + values[next].unwrap_or(0.0)))
        };
        filled += 1;
        values[j] = v;
    }
    Some(filled)
}

/// Parses a curve bundle from any reader.
pub fn read_curves<R: Read>(reader: R, policy: MissingPolicy) -> Result<LoadedCurves> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::Format(e.to_string()))?,
        None => return Err(Error::Format("empty file".into())),
    };
    let cells: Vec<&str> = header.iter().collect();
    let has_response = cells.last() == Some(&RESPONSE_COLUMN);
    let p = if has_response {
        cells.len() - 1
    } else {
        cells.len()
    };
    let times = cells[..p]
        .iter()
        .enumerate()
        .map(|(j, c)| parse_number(c, 1, j + 1))
        .collect::<Result<Vec<f64>>>()?;
    let grid = grid_from_times(&times)?;
    let width = cells.len();

    let mut report = LoadReport::default();
    let mut rows = Vec::new();
    let mut responses = Vec::new();
    for (i, record) in records.enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != width {
            return Err(Error::Format(format!(
                "row {line} has {} cells, header has {width}",
                record.len()
            )));
        }
        report.rows_read += 1;
        let data_row = report.rows_read;
        let mut values = Vec::with_capacity(p);
        for (j, cell) in record.iter().take(p).enumerate() {
            values.push(if is_missing(cell) {
                None
            } else {
                Some(parse_number(cell, line, j + 1)?)
            });
        }
        let response = if has_response {
            let cell = record.get(p).unwrap_or("");
            if is_missing(cell) {
                None
            } else {
                Some(parse_number(cell, line, p + 1)?)
            }
        } else {
            None
        };
        let missing = values.iter().filter(|v| v.is_none()).count();
        if missing > policy.max_missing {
            report.dropped.push(DroppedRow {
                row: data_row,
                missing,
                reason: format!("more than {} missing values", policy.max_missing),
            });
            continue;
        }
        if has_response && response.is_none() {
            report.dropped.push(DroppedRow {
                row: data_row,
                missing,
                reason: "missing response".into(),
            });
            continue;
        }
        let Some(imputed) = impute_row(&mut values) else {
            report.dropped.push(DroppedRow {
                row: data_row,
                missing,
                reason: "no observed values".into(),
            });
            continue;
        };
        if imputed > 0 {
            report.repaired.push(RowRepair {
                row: data_row,
                imputed,
            });
        }
        rows.push(
            values
                .into_iter()
                .map(|v| v.unwrap_or(0.0))
                .collect::<Vec<f64>>(),
        );
        if let Some(y) = response {
            responses.push(y);
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData(
            "no usable cases in the file".into(),
        ));
    }
    let curves = CurveMatrix::from_rows(&rows)?;
    let data = FunctionalDataset::new(grid, curves, has_response.then_some(responses))?;
    Ok(LoadedCurves { data, report })
}

pub fn load_curves(path: &Path, policy: MissingPolicy) -> Result<LoadedCurves> {
    let file = std::fs::File::open(path)?;
    read_curves(std::io::BufReader::new(file), policy)
}

pub fn parse_curves(text: &str, policy: MissingPolicy) -> Result<LoadedCurves> {
    read_curves(text.as_bytes(), policy)
}

/// Writes the bundle with shortest round-trip number formatting.
pub fn write_curves<W: Write>(data: &FunctionalDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let map = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut header: Vec<String> = (0..data.p())
        .map(|j| data.grid.point(j).to_string())
        .collect();
    if data.responses.is_some() {
        header.push(RESPONSE_COLUMN.into());
    }
    w.write_record(&header).map_err(map)?;
    for (i, x) in data.curves.rows().enumerate() {
        let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
        if let Some(y) = &data.responses {
            row.push(y[i].to_string());
        }
        w.write_record(&row).map_err(map)?;
    }
    w.flush()?;
    Ok(())
}

pub fn curves_to_string(data: &FunctionalDataset) -> Result<String> {
    let mut buf = Vec::new();
    write_curves(data, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

/// Two-column CSV with a header.
pub fn write_columns<W: Write>(
    mut writer: W,
    names: [&str; 2],
    a: &[f64],
    b: &[f64],
) -> Result<()> {
    writeln!(writer, "{},{}", names[0], names[1])?;
    for (x, y) in a.iter().zip(b) {
        writeln!(writer, "{x},{y}")?;
    }
    Ok(())
}

/// Comma-separated reals, e.g. `0.25,0.75`. Whitespace around entries is ignored.
pub fn parse_float_list(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .enumerate()
        .map(|(i, s)| {
            let s = s.trim();
            let v: f64 = s
                .parse()
                .map_err(|_| Error::Config(format!("entry {} (`{s}`) is not a number", i + 1)))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!(
                    "entry {} (`{s}`) is not finite",
                    i + 1
                )))
            }
        })
        .collect()
}

/// Largest `count` accepted in `lo:hi:count`; every window costs a full detection pass.
pub const MAX_GRID_COUNT: usize = 10_000;

/// Either a float list or `lo:hi:count` for `count` equidistant values.
pub fn parse_delta_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [_] => parse_float_list(text),
        [lo, hi, count] => {
            let lo = parse_float_list(lo)?;
            let hi = parse_float_list(hi)?;
            let count: usize = count
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("`{}` is not a count", count.trim())))?;
            match (lo.as_slice(), hi.as_slice()) {
                ([lo], [hi])
                    if lo <= hi
                        && (hi - lo).is_finite()
                        && (1..=MAX_GRID_COUNT).contains(&count) =>
                {
                    Ok(crate::evaluation::equidistant(*lo, *hi, count))
                }
                _ => Err(Error::Config(format!("invalid range `{text}`"))),
            }
        }
        _ => Err(Error::Config(format!(
            "expected a list or lo:hi:count, got `{text}`"
        ))),
    }
}
