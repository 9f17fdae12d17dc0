//! Result artifacts: the solver-output JSON schema and the CSV results log.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

/// The JSON document a `run` emits (and `plot` consumes).
#[derive(Debug, Serialize, Deserialize)]
pub struct ResultFile {
    /// Open facility ids.
    #[serde(rename = "X")]
    pub x: Vec<usize>,
    /// Radius per open facility, aligned with `X`.
    pub r: Vec<f64>,
    /// True nested cost of the assignment under the requested pair.
    pub cost: f64,
    /// Per-point assigned facility id.
    pub assignment: Vec<usize>,
    pub meta: ResultMeta,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResultMeta {
    pub epsilon: f64,
    pub guesses_tried: u64,
    pub lambda_final: f64,
    pub k: usize,
    pub objective: String,
    pub outer: String,
    pub claimed_factor: String,
    pub factor_value: f64,
    pub route: String,
    /// Ball/cover radii sorted descending, zero-padded to `k`.
    pub radii_sorted: Vec<f64>,
    /// Outer norm of `radii_sorted`.
    pub ord_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

/// Schema version line; the first line of every results CSV.
pub const CSV_HEADER: &str =
    "# nestnorm-csv v1: instance,objective,outer,epsilon,k,cost,oracle_cost,ratio,wall_ms";

/// One results row. Oracle columns stay empty when the oracle was off or
/// over budget; wall time is the last column so golden comparisons can
/// ignore it.
pub struct CsvRow<'a> {
    pub instance: &'a str,
    pub objective: &'a str,
    pub outer: &'a str,
    pub epsilon: f64,
    pub k: usize,
    pub cost: f64,
    pub oracle_cost: Option<f64>,
    pub ratio: Option<f64>,
    pub wall_ms: u128,
}

/// Appends a row, writing the versioned header first when the file is new
/// or empty.
pub fn append_csv(path: &Path, row: &CsvRow) -> Result<(), CliError> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut text = String::new();
    if fresh {
        text.push_str(CSV_HEADER);
        text.push('\n');
    }
    text.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        row.instance,
        row.objective,
        row.outer,
        row.epsilon,
        row.k,
        row.cost,
        opt(row.oracle_cost),
        opt(row.ratio),
        row.wall_ms
    ));
    file.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}
