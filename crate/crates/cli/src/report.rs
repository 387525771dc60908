//! CSV and JSON report writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use entlink_core::keyrate::CurvePoint;
use entlink_core::pipeline::BlockReport;
use entlink_core::PipelineReport;
use serde::Serialize;

use crate::error::CliError;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| CliError::io(path, e))?,
    ))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-block sampling results: block start (s), N, sample size, mismatches
/// in the sample and the estimated error rate.
pub fn write_blocks_csv(path: &Path, report: &PipelineReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["timestamp", "N", "n_pe", "mismatches", "qber_hat"])?;
    for b in &report.blocks {
        let b = &b.block;
        w.write_record([
            b.start.to_string(),
            b.n_total.to_string(),
            b.n_pe.to_string(),
            b.pe_errors.to_string(),
            b.qber_hat.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

const KEYRATE_HEADER: [&str; 13] = [
    "scope",
    "start_s",
    "duration_s",
    "N",
    "n_pe",
    "n_key",
    "mismatches",
    "qber_hat",
    "asymptotic_bits",
    "asymptotic_bps",
    "sharp_bits",
    "sharp_bps",
    "q_threshold",
];

fn keyrate_row(scope: &str, r: &BlockReport) -> Vec<String> {
    let b = &r.block;
    vec![
        scope.to_string(),
        b.start.to_string(),
        b.duration.to_string(),
        b.n_total.to_string(),
        b.n_pe.to_string(),
        b.n_key.to_string(),
        b.pe_errors.to_string(),
        b.qber_hat.to_string(),
        r.asymptotic.secret_bits.to_string(),
        r.asymptotic.rate_bps.to_string(),
        r.sharp.secret_bits.to_string(),
        r.sharp.rate_bps.to_string(),
        fmt_opt(r.sharp.q_threshold),
    ]
}

pub fn write_keyrate_csv(path: &Path, report: &PipelineReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(KEYRATE_HEADER)?;
    for b in &report.blocks {
        w.write_record(keyrate_row("block", b))?;
    }
    for a in &report.aggregates {
        w.write_record(keyrate_row("aggregate", &a.report))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_curve_csv(
    path: &Path,
    curve: &[CurvePoint],
    asymptotic_bps: f64,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "N",
        "duration_s",
        "sharp_bps",
        "q_threshold",
        "asymptotic_bps",
    ])?;
    for p in curve {
        w.write_record([
            p.n_total.to_string(),
            p.duration.to_string(),
            p.rate_bps.to_string(),
            p.q_threshold.to_string(),
            asymptotic_bps.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One row of the pass table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassRow {
    pub label: String,
    pub max_elevation_deg: f64,
    pub status: PassStatus,
    pub duration_s: Option<f64>,
    pub sifted_counts: Option<u64>,
    pub skr_bps: Option<f64>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PassStatus {
    Ok,
    NoVisibility,
    Error,
}

impl PassStatus {
    fn as_str(self) -> &'static str {
        match self {
            PassStatus::Ok => "ok",
            PassStatus::NoVisibility => "no_visibility",
            PassStatus::Error => "error",
        }
    }
}

pub fn write_pass_csv(path: &Path, rows: &[PassRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "local_time",
        "max_elevation_deg",
        "duration_s",
        "N",
        "skr_bps",
        "status",
    ])?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.max_elevation_deg.to_string(),
            fmt_opt(r.duration_s),
            r.sifted_counts.map(|n| n.to_string()).unwrap_or_default(),
            fmt_opt(r.skr_bps),
            r.status.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
