//! CSV tables, trajectory files and snapshot assembly from them.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dynsys::{TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::io::{atomic_write, read_artifact};
use crate::reduction::SnapshotMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A rectangular table with unique headers.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Result<Self> {
        let headers: Vec<String> = headers.into_iter().map(Into::into).collect();
        let mut seen = HashSet::new();
        if let Some(dup) = headers.iter().find(|h| !seen.insert(h.as_str())) {
            return Err(Error::invalid("headers", format!("duplicate column `{dup}`")));
        }
        Ok(CsvTable {
            headers,
            rows: Vec::new(),
        })
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.headers.len() {
            return Err(Error::invalid(
                "row",
                format!("{} cells for {} columns", row.len(), self.headers.len()),
            ));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Numeric column by name.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .column_index(name)
            .ok_or_else(|| Error::invalid("column", format!("no column named `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| match &row[j] {
                Cell::Num(v) => Ok(*v),
                Cell::Text(s) => s
                    .parse()
                    .map_err(|_| Error::invalid("column", format!("`{name}` row {i}: `{s}` is not a number"))),
            })
            .collect()
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_csv_string()?.as_bytes())
    }

    /// Parses every cell that looks like a float as [`Cell::Num`].
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut table = CsvTable::new(headers).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        for (i, record) in r.records().enumerate() {
            let record = record.map_err(|e| Error::Format {
                path: path.to_path_buf(),
                reason: format!("row {}: {e}", i + 1),
            })?;
            let row = record
                .iter()
                .map(|s| s.parse::<f64>().map(Cell::Num).unwrap_or_else(|_| Cell::Text(s.to_string())))
                .collect();
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = read_artifact(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        CsvTable::parse(&text, path)
    }
}

pub fn trajectory_headers(n: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((0..n).map(|i| format!("y_{i}")))
        .collect()
}

pub fn trajectory_table(traj: &Trajectory) -> CsvTable {
    let mut table = CsvTable::new(trajectory_headers(traj.n())).expect("headers are unique");
    for k in 0..=traj.steps() {
        let row = std::iter::once(Cell::Num(traj.grid().time(k)))
            .chain(traj.states().column(k).iter().map(|v| Cell::Num(*v)))
            .collect();
        table.rows.push(row);
    }
    table
}

/// `t, y_0, .., y_{n-1}`, one row per time level.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    trajectory_table(traj).write(path)
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let table = CsvTable::read(path)?;
    let fail = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let n = table.headers.len().saturating_sub(1);
    let expected = trajectory_headers(n);
    if n == 0 || table.headers != expected {
        let diag = table
            .headers
            .iter()
            .zip(&expected)
            .enumerate()
            .find(|(_, (got, want))| got != want)
            .map(|(i, (got, want))| format!("column {i} is `{got}`, expected `{want}`"))
            .unwrap_or_else(|| format!("expected columns t, y_0..y_{{n-1}}, got {:?}", table.headers));
        return Err(fail(diag));
    }
    if table.rows.is_empty() {
        return Err(fail("no data rows".into()));
    }
    let mut states = DMatrix::zeros(n, table.rows.len());
    let mut times = Vec::with_capacity(table.rows.len());
    for (k, row) in table.rows.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            let Cell::Num(v) = cell else {
                return Err(fail(format!("row {} column `{}` is not a number", k + 1, table.headers[j])));
            };
            if j == 0 {
                times.push(*v);
            } else {
                states[(j - 1, k)] = *v;
            }
        }
    }
    let steps = times.len() - 1;
    let dt = if steps == 0 { 1.0 } else { (times[steps] - times[0]) / steps as f64 };
    let grid = TimeGrid::new(dt, steps).map_err(|e| fail(e.to_string()))?;
    Trajectory::from_states(states, grid)
}

/// Reads trajectory files in the given order and stacks every state.
pub fn read_snapshot_matrix(paths: &[impl AsRef<Path>]) -> Result<SnapshotMatrix> {
    let trajectories = paths
        .iter()
        .map(|p| read_trajectory_csv(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    crate::reduction::assemble_snapshots(&trajectories, None)
}

/// Single-column table of a vector, used for singular values and the like.
pub fn vector_table(name: &str, values: &DVector<f64>) -> CsvTable {
    let mut table = CsvTable::new(["index", name]).expect("headers are unique");
    for (i, v) in values.iter().enumerate() {
        table.rows.push(vec![Cell::from(i), Cell::Num(*v)]);
    }
    table
}
