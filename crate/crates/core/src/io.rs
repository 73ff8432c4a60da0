//! Datasets from CSV, the plain-text graph format and JSON output.
//!
//! Graph files look like
//!
//! ```text
//! # Example
//! d=4
//! 0 -> 1
//! 1 -> 2
//! 2 -> 3
//! 1 <-> 3
//! ```
//!
//! with `#` starting a comment anywhere on a line.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MixedGraph;
use crate::ricf::SampleCovariance;

/// Version tag written into every JSON report.
pub const SCHEMA_VERSION: u32 = 1;

/// Named numeric columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    /// `n x d`, one row per observation.
    pub data: DMatrix<f64>,
    /// File path or a note on how the data were generated.
    pub source: String,
    pub standardized: bool,
    pub log_transformed: bool,
}

impl Dataset {
    pub fn from_matrix(names: Vec<String>, data: DMatrix<f64>, source: impl Into<String>) -> Result<Self> {
        if names.len() != data.ncols() {
            return Err(Error::DimensionMismatch {
                expected: data.ncols(),
                found: names.len(),
            });
        }
        Ok(Dataset {
            names,
            data,
            source: source.into(),
            standardized: false,
            log_transformed: false,
        })
    }

    /// Columns named `X0, X1, ...`.
    pub fn unnamed(data: DMatrix<f64>, source: impl Into<String>) -> Self {
        let names = (0..data.ncols()).map(|j| format!("X{j}")).collect();
        Dataset::from_matrix(names, data, source).expect("names match columns")
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path)?;
        Dataset::from_reader(file, path.display().to_string())
    }

    /// Parses a CSV with a header row. Every cell must be a finite number.
    pub fn from_reader<R: Read>(reader: R, source: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let csv_error = |e: csv::Error| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            Error::Csv {
                row,
                column: String::new(),
                message: e.to_string(),
            }
        };
        let names: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
        if names.is_empty() || names.iter().all(String::is_empty) {
            return Err(Error::Csv {
                row: 1,
                column: String::new(),
                message: "missing header row".into(),
            });
        }
        let mut values = Vec::new();
        let mut n = 0;
        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            let row = rec.position().map_or(n + 2, |p| p.line() as usize);
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Csv {
                    row,
                    column: names[j].clone(),
                    message: if cell.is_empty() {
                        "missing value".into()
                    } else {
                        format!("not a number: {cell:?}")
                    },
                })?;
                if !v.is_finite() {
                    return Err(Error::Csv {
                        row,
                        column: names[j].clone(),
                        message: format!("value must be finite, got {cell}"),
                    });
                }
                values.push(v);
            }
            n += 1;
        }
        let d = names.len();
        let data = DMatrix::from_row_slice(n, d, &values);
        Dataset::from_matrix(names, data, source)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    /// Centers every column and scales it to unit sample variance.
    pub fn standardize(&self) -> Result<Self> {
        let n = self.n();
        if n < 2 {
            return Err(Error::InsufficientSamples { n, d: self.d(), required: 2 });
        }
        let mut out = self.clone();
        for (j, mut col) in out.data.column_iter_mut().enumerate() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
            let sd = (col.norm_squared() / (n - 1) as f64).sqrt();
            if sd == 0.0 {
                return Err(Error::Csv {
                    row: 0,
                    column: self.names[j].clone(),
                    message: "column is constant".into(),
                });
            }
            col /= sd;
        }
        out.standardized = true;
        Ok(out)
    }

    /// Natural logarithm of every value; all values must be positive.
    pub fn log_transform(&self) -> Result<Self> {
        let mut out = self.clone();
        for (i, row) in self.data.row_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v <= 0.0 {
                    return Err(Error::Csv {
                        row: i + 2,
                        column: self.names[j].clone(),
                        message: format!("cannot take the logarithm of {v}"),
                    });
                }
            }
        }
        out.data = self.data.map(f64::ln);
        out.log_transformed = true;
        Ok(out)
    }

    /// Reorders columns so that new column `k` is old column `order[k]`.
    pub fn select_columns(&self, order: &[usize]) -> Result<Self> {
        for &j in order {
            if j >= self.d() {
                return Err(Error::VertexOutOfRange { vertex: j, d: self.d() });
            }
        }
        let mut out = self.clone();
        out.names = order.iter().map(|&j| self.names[j].clone()).collect();
        out.data = DMatrix::from_fn(self.n(), order.len(), |i, k| self.data[(i, order[k])]);
        Ok(out)
    }

    pub fn covariance(&self) -> Result<SampleCovariance> {
        SampleCovariance::from_data(&self.data)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for row in self.data.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Renders `g` in the graph file format.
pub fn format_graph(g: &MixedGraph) -> String {
    let mut out = format!("d={}\n", g.num_vertices());
    for (i, j) in g.directed_edges() {
        let _ = writeln!(out, "{i} -> {j}");
    }
    for (i, j) in g.bidirected_edges() {
        let _ = writeln!(out, "{i} <-> {j}");
    }
    out
}

/// Parses the graph file format. Errors carry 1-based line numbers.
pub fn parse_graph(text: &str) -> Result<MixedGraph> {
    let mut graph: Option<MixedGraph> = None;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let Some(g) = graph.as_mut() else {
            let d = line
                .strip_prefix("d=")
                .or_else(|| line.strip_prefix("d ="))
                .ok_or_else(|| err(format!("expected header `d=<vertices>`, found {line:?}")))?;
            let d: usize = d
                .trim()
                .parse()
                .map_err(|_| err(format!("invalid vertex count {:?}", d.trim())))?;
            graph = Some(MixedGraph::empty(d));
            continue;
        };
        let (lhs, rhs, bidirected) = if let Some((a, b)) = line.split_once("<->") {
            (a, b, true)
        } else if let Some((a, b)) = line.split_once("->") {
            (a, b, false)
        } else {
            return Err(err(format!("expected `i -> j` or `i <-> j`, found {line:?}")));
        };
        let vertex = |s: &str| -> Result<usize> {
            let v: usize = s
                .trim()
                .parse()
                .map_err(|_| err(format!("invalid vertex {:?}", s.trim())))?;
            if v >= g.num_vertices() {
                return Err(err(format!("vertex {v} out of range for d={}", g.num_vertices())));
            }
            Ok(v)
        };
        let (i, j) = (vertex(lhs)?, vertex(rhs)?);
        if i == j {
            return Err(err(format!("self-loop at vertex {i}")));
        }
        if bidirected {
            g.add_bidirected(i, j);
        } else {
            g.add_directed(i, j);
        }
    }
    graph.ok_or(Error::Parse {
        line: text.lines().count().max(1),
        message: "missing header `d=<vertices>`".into(),
    })
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<MixedGraph> {
    parse_graph(&fs::read_to_string(path)?)
}

pub fn write_graph(path: impl AsRef<Path>, g: &MixedGraph) -> Result<()> {
    fs::write(path, format_graph(g))?;
    Ok(())
}

/// A matrix as CSV with the given names as header.
pub fn matrix_to_csv(names: &[String], m: &DMatrix<f64>) -> String {
    let mut out = String::from("row,");
    out.push_str(&names.join(","));
    out.push('\n');
    for (i, row) in m.row_iter().enumerate() {
        out.push_str(names.get(i).map_or("", String::as_str));
        for v in row.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = to_json(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
