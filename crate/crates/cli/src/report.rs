//! Comma-separated reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use myoinr_core::objective::EpochLoss;
use myoinr_core::strain::{AblationRow, CohortSummary, StrainReport};

use crate::error::{CliError, CliResult};

pub const METRICS_HEADER: &str = "epoch,l_pos,l_jac,l_z,total";
pub const STRAIN_HEADER: &str =
    "case_id,point_error_mm,gcs,gcs_bias,gcs_error,grs,grs_bias,grs_error";
pub const ABLATION_HEADER: &str = "alpha,point_error,gcs_bias,gcs_error,grs_bias,grs_error";

pub fn metrics_csv(history: &[EpochLoss]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for e in history {
        writeln!(
            s,
            "{},{},{},{},{}",
            e.epoch, e.pos, e.jac, e.latent, e.total
        )
        .unwrap();
    }
    s
}

/// One case row; strains and their differences are in percent.
pub struct StrainRow<'a> {
    pub case_id: &'a str,
    pub point_error_mm: f64,
    pub predicted: &'a StrainReport,
    pub reference: &'a StrainReport,
}

pub fn strain_cases_csv(rows: &[StrainRow<'_>]) -> String {
    let mut s = format!("{STRAIN_HEADER}\n");
    for r in rows {
        let gcs_d = 100.0 * (r.predicted.gcs - r.reference.gcs);
        let grs_d = 100.0 * (r.predicted.grs - r.reference.grs);
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.case_id,
            r.point_error_mm,
            100.0 * r.predicted.gcs,
            gcs_d,
            gcs_d.abs(),
            100.0 * r.predicted.grs,
            grs_d,
            grs_d.abs()
        )
        .unwrap();
    }
    s
}

pub fn strain_cohort_csv(summary: &CohortSummary) -> String {
    format!(
        "{STRAIN_HEADER}\ncohort,{},{},{},{},{},{},{}\n",
        summary.point_error_mm,
        100.0 * summary.gcs,
        summary.gcs_agreement.bias,
        summary.gcs_agreement.error,
        100.0 * summary.grs,
        summary.grs_agreement.bias,
        summary.grs_agreement.error
    )
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("{ABLATION_HEADER}\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.alpha, r.point_error, r.gcs_bias, r.gcs_error, r.grs_bias, r.grs_error
        )
        .unwrap();
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Parses a report written by this module back into header and rows.
pub fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}
