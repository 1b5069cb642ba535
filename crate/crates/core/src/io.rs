//! CSV row types for experiment output. Column sets are versioned through
//! [`CSV_SCHEMA_VERSION`], which the run manifest records.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// One partition-function value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionRow {
    pub experiment_id: String,
    /// Empty on the continuum side.
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub d: usize,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub beta_hat: f64,
    pub functional: String,
    pub value: f64,
    pub normalization: f64,
    pub seed: u64,
    pub replica: u64,
    pub config_hash: String,
}

/// One statistic of a sweep (distances, curve points, moments).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub side: String,
    #[serde(rename = "N_or_a")]
    pub n_or_a: f64,
    pub statistic: String,
    pub value: f64,
    /// Empty when no error estimate exists.
    pub se: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
}

/// One appendix check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub k: usize,
    pub params: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    pub seed: u64,
    pub config_hash: String,
}

pub const PARTITION_COLUMNS: &[&str] = &[
    "experiment_id",
    "N",
    "d",
    "alpha",
    "a",
    "b",
    "beta_hat",
    "functional",
    "value",
    "normalization",
    "seed",
    "replica",
    "config_hash",
];
pub const RESULT_COLUMNS: &[&str] = &["experiment_id", "side", "N_or_a", "statistic", "value", "se", "seed", "config_hash"];
pub const CHECK_COLUMNS: &[&str] = &["check", "k", "params", "lhs", "rhs", "pass", "seed", "config_hash"];

/// Serialize rows with a header line. Writes only the header when `rows`
/// is empty.
pub fn write_rows<W: Write, T: Serialize>(out: W, columns: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(columns)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
