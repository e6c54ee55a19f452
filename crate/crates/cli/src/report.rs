//! Evaluation reports in text, CSV and JSON-lines form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ReportFormat;

pub const CSV_HEADER: &str = "frame,trans_err_m,rot_err_deg,inliers,correct,runtime_ms";
pub const SUMMARY_CSV_HEADER: &str = "n_max,frames,percent_correct,median_trans_err_m,median_rot_err_deg,mean_runtime_ms";

/// One test frame under one leaf budget. Errors are absent for failed frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRow {
    pub n_max: usize,
    pub frame: usize,
    pub trans_err_m: Option<f64>,
    pub rot_err_deg: Option<f64>,
    pub inliers: usize,
    pub correct: bool,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n_max: usize,
    pub frames: usize,
    pub percent_correct: f64,
    pub median_trans_err_m: Option<f64>,
    pub median_rot_err_deg: Option<f64>,
    pub mean_runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Frame(FrameRow),
    Summary(SummaryRow),
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_fixed(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into())
}

pub fn frames_csv(rows: &[FrameRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.frame,
            opt(r.trans_err_m),
            opt(r.rot_err_deg),
            r.inliers,
            r.correct,
            r.runtime_ms
        );
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n_max,
            r.frames,
            r.percent_correct,
            opt(r.median_trans_err_m),
            opt(r.median_rot_err_deg),
            r.mean_runtime_ms
        );
    }
    out
}

pub fn frames_text(rows: &[FrameRow]) -> String {
    let mut out = format!(
        "{:>7} {:>12} {:>12} {:>8} {:>8} {:>11}\n",
        "frame", "trans_err_m", "rot_err_deg", "inliers", "correct", "runtime_ms"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>7} {:>12} {:>12} {:>8} {:>8} {:>11.1}",
            r.frame,
            opt_fixed(r.trans_err_m, 4),
            opt_fixed(r.rot_err_deg, 3),
            r.inliers,
            if r.correct { "yes" } else { "no" },
            r.runtime_ms
        );
    }
    out
}

pub fn summary_text(rows: &[SummaryRow]) -> String {
    let mut out = format!(
        "{:>6} {:>7} {:>9} {:>14} {:>14} {:>12}\n",
        "n_max", "frames", "correct", "median_trans_m", "median_rot_deg", "runtime_ms"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>6} {:>7} {:>8.1}% {:>14} {:>14} {:>12.1}",
            r.n_max,
            r.frames,
            100.0 * r.percent_correct,
            opt_fixed(r.median_trans_err_m, 4),
            opt_fixed(r.median_rot_err_deg, 3),
            r.mean_runtime_ms
        );
    }
    out
}

pub fn json_lines(records: &[Record]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("report rows serialize") + "\n")
        .collect()
}

pub fn parse_json_lines(text: &str) -> serde_json::Result<Vec<Record>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

pub fn render_frames(format: ReportFormat, rows: &[FrameRow], summary: &SummaryRow) -> String {
    match format {
        ReportFormat::Csv => frames_csv(rows),
        ReportFormat::Text => frames_text(rows),
        ReportFormat::JsonLines => {
            let mut records: Vec<Record> = rows.iter().cloned().map(Record::Frame).collect();
            records.push(Record::Summary(summary.clone()));
            json_lines(&records)
        }
    }
}

pub fn render_summary(format: ReportFormat, rows: &[SummaryRow]) -> String {
    match format {
        ReportFormat::Csv => summary_csv(rows),
        ReportFormat::Text => summary_text(rows),
        ReportFormat::JsonLines => json_lines(&rows.iter().cloned().map(Record::Summary).collect::<Vec<_>>()),
    }
}

/// `dir/stem<suffix>.ext` next to `base`.
pub fn sibling(base: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    base.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Per-budget report path: `base` itself for a single budget, otherwise
/// `stem-n<N>.ext`.
pub fn budget_path(base: &Path, n_max: usize, single: bool, format: ReportFormat) -> PathBuf {
    if single {
        base.to_path_buf()
    } else {
        let ext = base
            .extension()
            .map(|e| e.to_string_lossy().into_owned())
            .unwrap_or_else(|| format.extension().into());
        sibling(base, &format!("-n{n_max}"), &ext)
    }
}
