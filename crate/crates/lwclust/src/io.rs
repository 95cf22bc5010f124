//! File formats: matrix ingestion, dendrogram export, flat-cluster export.
//!
//! All formats are UTF-8 comma-separated text. A header row is optional on
//! input (the first line is skipped if any of its fields is not a number)
//! and written on output. Distances are parsed as 64-bit floats and printed
//! as their shortest round-trip decimal, so write/read cycles are bit-exact.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::dendrogram::{Dendrogram, Merge};
use crate::error::Error;
use crate::matrix::CondensedMatrix;

/// Tolerance for the symmetry check on square input, applied absolutely;
/// the two triangles are averaged on acceptance.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Supported matrix input layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    /// Full `n x n` matrix; must be symmetric within [`SYMMETRY_TOLERANCE`]
    /// with a zero diagonal.
    SquareCsv,
    /// The `(n*n - n)/2` upper-triangle cells in row-major order, any line
    /// layout.
    CondensedCsv,
    /// One point per row; all pairwise Euclidean distances are computed.
    PointsCsv,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "square-csv" => Ok(InputFormat::SquareCsv),
            "condensed-csv" => Ok(InputFormat::CondensedCsv),
            "points-csv" => Ok(InputFormat::PointsCsv),
            _ => Err(Error::Parse {
                line: 0,
                message: format!(
                    "unknown input format '{s}'; expected square-csv, condensed-csv or points-csv"
                ),
            }),
        }
    }
}

/// Dendrogram output renderings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    /// Merge-list CSV, the canonical lossless form.
    Csv,
    /// Nested JSON tree.
    Json,
    /// Newick string with branch lengths.
    Newick,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "newick" => Ok(OutputFormat::Newick),
            _ => Err(Error::Parse {
                line: 0,
                message: format!("unknown output format '{s}'; expected csv, json or newick"),
            }),
        }
    }
}

/// Reads a distance matrix from `path` in the given format.
pub fn read_matrix(path: &Path, format: InputFormat) -> Result<CondensedMatrix, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix(&text, format)
}

pub fn parse_matrix(text: &str, format: InputFormat) -> Result<CondensedMatrix, Error> {
    match format {
        InputFormat::SquareCsv => parse_square(text),
        InputFormat::CondensedCsv => parse_condensed(text),
        InputFormat::PointsCsv => parse_points(text),
    }
}

/// Numeric rows of the file: `(1-based line number, fields)`, with an
/// all-numeric check deciding whether the first line is a header.
fn numeric_rows(text: &str) -> Vec<(usize, Vec<&str>)> {
    let mut rows: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(index, line)| (index + 1, line.split(',').map(str::trim).collect()))
        .collect();
    if let Some((_, fields)) = rows.first() {
        if fields.iter().any(|field| field.parse::<f64>().is_err()) {
            rows.remove(0);
        }
    }
    rows
}

fn parse_field<T: FromStr>(line: usize, field: &str, what: &str) -> Result<T, Error> {
    field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} '{field}'"),
    })
}

pub fn parse_square(text: &str) -> Result<CondensedMatrix, Error> {
    let rows = numeric_rows(text);
    let n = rows.len();
    let mut full = vec![0.0f64; n * n];
    for (r, (line, fields)) in rows.iter().enumerate() {
        if fields.len() != n {
            return Err(Error::RaggedRow { row: r, got: fields.len(), expected: n });
        }
        for (c, field) in fields.iter().enumerate() {
            full[r * n + c] = parse_field(*line, field, "distance")?;
        }
    }
    for i in 0..n {
        let diagonal = full[i * n + i];
        if diagonal.is_nan() || diagonal.abs() > SYMMETRY_TOLERANCE {
            return Err(Error::NonzeroDiagonal { i, value: diagonal });
        }
    }
    CondensedMatrix::from_fn(n, |i, j| {
        let upper = full[i * n + j];
        let lower = full[j * n + i];
        let gap = (upper - lower).abs();
        if gap.is_nan() || gap > SYMMETRY_TOLERANCE {
            return f64::NAN; // flagged below with an exact diagnostic
        }
        0.5 * (upper + lower)
    })
    .map_err(|error| match error {
        // Distinguish "asymmetric" from a genuinely bad value.
        Error::InvalidDistance { i, j, value } => {
            let upper = full[i * n + j];
            let lower = full[j * n + i];
            if upper.is_nan() || lower.is_nan() {
                Error::InvalidDistance { i, j, value: if upper.is_nan() { upper } else { lower } }
            } else if (upper - lower).abs() <= SYMMETRY_TOLERANCE {
                Error::InvalidDistance { i, j, value: if value.is_nan() { upper } else { value } }
            } else {
                Error::AsymmetricCell { i, j, upper, lower, tolerance: SYMMETRY_TOLERANCE }
            }
        }
        other => other,
    })
}

pub fn parse_condensed(text: &str) -> Result<CondensedMatrix, Error> {
    let mut cells = Vec::new();
    for (line, fields) in numeric_rows(text) {
        for field in fields {
            if field.is_empty() {
                continue;
            }
            cells.push(parse_field::<f64>(line, field, "distance")?);
        }
    }
    let n = items_for_cell_count(cells.len())?;
    CondensedMatrix::new(n, cells)
}

/// Solves `n*(n-1)/2 = cells` for `n`; zero cells reads as zero items.
fn items_for_cell_count(cells: usize) -> Result<usize, Error> {
    if cells == 0 {
        return Ok(0);
    }
    let mut n = (((1.0 + 8.0 * cells as f64).sqrt() + 1.0) / 2.0) as usize;
    while n * (n - 1) / 2 > cells {
        n -= 1;
    }
    while n * (n - 1) / 2 < cells {
        n += 1;
    }
    if n * (n - 1) / 2 != cells {
        return Err(Error::NotTriangular { got: cells });
    }
    Ok(n)
}

pub fn parse_points(text: &str) -> Result<CondensedMatrix, Error> {
    let rows = numeric_rows(text);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    let mut dims = None;
    for (index, (line, fields)) in rows.iter().enumerate() {
        let expected = *dims.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(Error::RaggedRow { row: index, got: fields.len(), expected });
        }
        let mut point = Vec::with_capacity(fields.len());
        for field in fields {
            let value: f64 = parse_field(*line, field, "coordinate")?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("coordinate '{field}' is not finite"),
                });
            }
            point.push(value);
        }
        points.push(point);
    }
    CondensedMatrix::from_fn(points.len(), |i, j| euclidean(&points[i], &points[j]))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Full square rendering, symmetric with a zero diagonal.
pub fn write_square(matrix: &CondensedMatrix) -> String {
    let n = matrix.items();
    let mut out = String::new();
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                out.push(',');
            }
            if i == j {
                out.push('0');
            } else {
                let _ = write!(out, "{}", matrix.distance(i, j));
            }
        }
        out.push('\n');
    }
    out
}

/// Condensed rendering: one line per upper-triangle row.
pub fn write_condensed(matrix: &CondensedMatrix) -> String {
    let n = matrix.items();
    let mut out = String::new();
    for i in 0..n.saturating_sub(1) {
        for j in i + 1..n {
            if j > i + 1 {
                out.push(',');
            }
            let _ = write!(out, "{}", matrix.distance(i, j));
        }
        out.push('\n');
    }
    out
}

/// The canonical merge-list CSV: `left,right,height,size`, one row per merge.
pub fn merge_list_csv(dendrogram: &Dendrogram) -> String {
    let mut out = String::from("left,right,height,size\n");
    for merge in dendrogram.merges() {
        let _ = writeln!(out, "{},{},{},{}", merge.left, merge.right, merge.height, merge.size);
    }
    out
}

/// Parses a merge-list CSV back into a dendrogram. The item count is the
/// row count plus one.
pub fn parse_merge_list(text: &str) -> Result<Dendrogram, Error> {
    let rows = numeric_rows(text);
    let mut merges = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        if fields.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields (left,right,height,size), found {}", fields.len()),
            });
        }
        merges.push(Merge {
            left: parse_field(line, fields[0], "cluster id")?,
            right: parse_field(line, fields[1], "cluster id")?,
            height: parse_field(line, fields[2], "height")?,
            size: parse_field(line, fields[3], "size")?,
        });
    }
    Dendrogram::new(merges.len() + 1, merges)
}

pub fn read_merge_list(path: &Path) -> Result<Dendrogram, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_merge_list(&text)
}

/// Item-to-cluster labels for the `k`-cluster level: `item,cluster` rows.
pub fn labels_csv(dendrogram: &Dendrogram, k: usize) -> Result<String, Error> {
    let labels = dendrogram.cluster_labels(k)?;
    let mut out = String::from("item,cluster\n");
    for (item, label) in labels.iter().enumerate() {
        let _ = writeln!(out, "{item},{label}");
    }
    Ok(out)
}

/// Renders the dendrogram in the requested format.
pub fn render_dendrogram(dendrogram: &Dendrogram, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => merge_list_csv(dendrogram),
        OutputFormat::Json => json_tree(dendrogram),
        OutputFormat::Newick => newick(dendrogram),
    }
}

fn cluster_height(dendrogram: &Dendrogram, id: usize) -> f64 {
    let n = dendrogram.items();
    if id < n {
        0.0
    } else {
        dendrogram.merges()[id - n].height
    }
}

/// Newick rendering: leaves are labeled by item index and branch lengths are
/// height differences. Built with an explicit stack; deep chain dendrograms
/// must not overflow the call stack.
pub fn newick(dendrogram: &Dendrogram) -> String {
    let n = dendrogram.items();
    if n == 0 {
        return ";".to_string();
    }
    enum Task {
        Node(usize),
        Literal(&'static str),
        BranchLength(f64),
    }
    let root = n + dendrogram.merges().len() - 1;
    let mut out = String::new();
    let mut stack = vec![Task::Node(root)];
    while let Some(task) = stack.pop() {
        match task {
            Task::Literal(text) => out.push_str(text),
            Task::BranchLength(length) => {
                let _ = write!(out, ":{length}");
            }
            Task::Node(id) => {
                if id < n {
                    let _ = write!(out, "{id}");
                } else {
                    let merge = dendrogram.merges()[id - n];
                    let parent = merge.height;
                    stack.push(Task::Literal(")"));
                    stack.push(Task::BranchLength(parent - cluster_height(dendrogram, merge.right)));
                    stack.push(Task::Node(merge.right));
                    stack.push(Task::Literal(","));
                    stack.push(Task::BranchLength(parent - cluster_height(dendrogram, merge.left)));
                    stack.push(Task::Node(merge.left));
                    stack.push(Task::Literal("("));
                }
            }
        }
    }
    out.push(';');
    out
}

/// Nested JSON tree: internal nodes carry `id`, `height`, `size` and
/// `children`; leaves carry `id` and `size`. Also stack-driven.
pub fn json_tree(dendrogram: &Dendrogram) -> String {
    let n = dendrogram.items();
    if n == 0 {
        return "null".to_string();
    }
    enum Task {
        Node(usize),
        Literal(&'static str),
    }
    let root = n + dendrogram.merges().len() - 1;
    let mut out = String::new();
    let mut stack = vec![Task::Node(root)];
    while let Some(task) = stack.pop() {
        match task {
            Task::Literal(text) => out.push_str(text),
            Task::Node(id) => {
                if id < n {
                    let _ = write!(out, "{{\"id\":{id},\"size\":1}}");
                } else {
                    let merge = dendrogram.merges()[id - n];
                    let _ = write!(
                        out,
                        "{{\"id\":{id},\"height\":{},\"size\":{},\"children\":[",
                        merge.height, merge.size
                    );
                    stack.push(Task::Literal("]}"));
                    stack.push(Task::Node(merge.right));
                    stack.push(Task::Literal(","));
                    stack.push(Task::Node(merge.left));
                }
            }
        }
    }
    out
}
