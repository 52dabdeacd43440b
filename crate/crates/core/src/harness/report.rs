//! Report and trace files: writing, re-reading and comparing.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::Deserialize;

use super::experiment::{EpochTraceRow, HarnessError, NavTraceRow, RunOutput};
use super::metrics::{self, improvement};

fn output_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Output { path: path.to_path_buf(), message: e.to_string() }
}

fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| output_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| output_err(path, e))?;
    }
    w.flush().map_err(|e| output_err(path, e))
}

/// Writes `report.json`, `<track>_nav.csv` and `<track>_epochs.csv` into
/// `dir`, creating it if needed. Returns the written paths.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| output_err(dir, e))?;
    let mut written = Vec::new();
    let report_path = dir.join("report.json");
    let json = serde_json::to_string_pretty(&out.report).map_err(|e| output_err(&report_path, e))?;
    fs::write(&report_path, json + "\n").map_err(|e| output_err(&report_path, e))?;
    written.push(report_path);
    for track in &out.tracks {
        let nav = dir.join(format!("{}_nav.csv", track.report.name));
        write_csv(&nav, &track.nav_trace)?;
        let epochs = dir.join(format!("{}_epochs.csv", track.report.name));
        write_csv(&epochs, &track.epoch_trace)?;
        written.push(nav);
        written.push(epochs);
    }
    Ok(written)
}

pub fn read_nav_trace(path: &Path) -> Result<Vec<NavTraceRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| output_err(path, e))?;
    r.deserialize().collect::<Result<Vec<NavTraceRow>, _>>().map_err(|e| output_err(path, e))
}

pub fn read_epoch_trace(path: &Path) -> Result<Vec<EpochTraceRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| output_err(path, e))?;
    r.deserialize().collect::<Result<Vec<EpochTraceRow>, _>>().map_err(|e| output_err(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceMetrics {
    pub vrmse: f64,
    pub mrmse: f64,
    pub excluded: usize,
}

/// Recomputes VRMSE and MRMSE from a navigation error trace.
pub fn trace_metrics(rows: &[NavTraceRow]) -> Result<TraceMetrics, HarnessError> {
    let vrmse = metrics::rms_of_norms(rows.iter().map(|r| Vector3::new(r.dvn, r.dve, r.dvd)))?;
    let angles: Vec<Vector3<f64>> = rows
        .iter()
        .filter_map(|r| Some(Vector3::new(r.droll?, r.dpitch?, r.dyaw?)))
        .collect();
    let excluded = rows.len() - angles.len();
    let mrmse = metrics::rms_of_norms(angles.into_iter())?;
    Ok(TraceMetrics { vrmse, mrmse, excluded })
}

/// The two aggregate metrics of a run report; other fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ReportSummary {
    pub vrmse_avg: f64,
    pub mrmse_avg: f64,
}

pub fn read_summary(path: &Path) -> Result<ReportSummary, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| output_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| output_err(path, e))
}

/// Improvement table of `ours` over `baseline`.
pub fn compare_table(baseline: &ReportSummary, ours: &ReportSummary) -> Result<String, HarnessError> {
    let v = improvement(baseline.vrmse_avg, ours.vrmse_avg)?;
    let m = improvement(baseline.mrmse_avg, ours.mrmse_avg)?;
    Ok(format!(
        "{:<8}{:>12}{:>12}{:>13}\n{:<8}{:>12.6}{:>12.6}{:>12.1}%\n{:<8}{:>12.6}{:>12.6}{:>12.1}%\n",
        "metric",
        "baseline",
        "ours",
        "improvement",
        "VRMSE",
        baseline.vrmse_avg,
        ours.vrmse_avg,
        v,
        "MRMSE",
        baseline.mrmse_avg,
        ours.mrmse_avg,
        m
    ))
}
