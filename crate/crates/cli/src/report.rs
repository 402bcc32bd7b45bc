//! Run reports: a schema-versioned TOML document plus a flat CSV plot
//! table.
//!
//! Both files are byte-deterministic functions of (config, seed, code
//! version): wall-clock time is kept out of the serialized form on
//! purpose, and CSV numbers are printed with 17 significant digits so
//! they round-trip `f64` exactly and the tables double as regression
//! fixtures.

use crate::config::ExperimentConfig;
use crate::CliError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::Duration;

pub const SCHEMA_VERSION: u32 = 1;

/// One plot point: `x` is the horizon or abscissa, `error` is an error
/// bar (0 where the value is exact).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PayloadRow {
    pub x: f64,
    pub metric: String,
    pub value: f64,
    pub error: f64,
}

impl PayloadRow {
    pub fn new(x: f64, metric: &str, value: f64, error: f64) -> Self {
        PayloadRow { x, metric: metric.to_string(), value, error }
    }
}

/// Everything needed to reconstruct a run at a given code version:
/// config echo, its content hash, surfaced warnings, and the payload.
/// `wall_clock` is informational only and never serialized.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub schema_version: u32,
    pub library_version: String,
    pub config_sha256: String,
    pub warnings: Vec<String>,
    pub config: ExperimentConfig,
    pub payload: Vec<PayloadRow>,
    #[serde(skip)]
    pub wall_clock: Duration,
}

/// Hex SHA-256 of the canonical TOML serialization of a config.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = toml::to_string(config).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunReport {
    pub fn new(
        config: ExperimentConfig,
        warnings: Vec<String>,
        payload: Vec<PayloadRow>,
        wall_clock: Duration,
    ) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_hash(&config),
            warnings,
            config,
            payload,
            wall_clock,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    /// The flat table: header row, then one `x,metric,value,error` line
    /// per payload row.
    pub fn csv_table(&self) -> String {
        let mut out = String::from("x,metric,value,error\n");
        for row in &self.payload {
            out.push_str(&format!(
                "{},{},{},{}\n",
                digits17(row.x),
                row.metric,
                digits17(row.value),
                digits17(row.error)
            ));
        }
        out
    }
}

/// 17 significant decimal digits: enough to reproduce any f64 bit for
/// bit when parsed back.
fn digits17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `<stem>.report.toml` and `<stem>.csv`; returns both paths.
pub fn write_report(report: &RunReport, stem: &str) -> Result<(String, String), CliError> {
    let report_path = format!("{stem}.report.toml");
    let csv_path = format!("{stem}.csv");
    let io_err = |path: &str| {
        let path = path.to_string();
        move |e: std::io::Error| CliError::Io { path, message: e.to_string() }
    };
    std::fs::write(&report_path, report.to_toml()).map_err(io_err(&report_path))?;
    std::fs::write(&csv_path, report.csv_table()).map_err(io_err(&csv_path))?;
    Ok((report_path, csv_path))
}
