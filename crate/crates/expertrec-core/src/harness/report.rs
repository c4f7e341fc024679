//! Aggregation over per-session metrics and deterministic report files.

use std::path::Path;

use crate::config::ReportConfig;
use crate::error::{Error, Result};
use crate::harness::experiment::ArmResult;
use crate::harness::metrics::MetricsRow;
use crate::io_util::{fmt_f64, CsvWriter, F64};

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub arm: String,
    pub sessions: usize,
    pub mean_q_e: f64,
    pub mean_q_t: f64,
    pub median_q_t: f64,
    pub mean_w_t: f64,
    pub median_w_t: f64,
    pub min_w_t: f64,
    pub max_w_t: f64,
    /// Expert-guided share of all served steps.
    pub guided_fraction: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Linearly interpolated empirical quantile of a sorted nonempty slice,
/// q in [0, 1].
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let t = pos - lo as f64;
        sorted[lo] * (1.0 - t) + sorted[hi] * t
    }
}

fn sorted_values(rows: &[MetricsRow], pick: impl Fn(&MetricsRow) -> f64) -> Vec<f64> {
    let mut values: Vec<f64> = rows.iter().map(pick).collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn summarize_arm(arm: &str, rows: &[MetricsRow]) -> ArmSummary {
    let q_t = sorted_values(rows, |r| r.q_t);
    let w_t = sorted_values(rows, |r| r.w_t);
    let q_e: Vec<f64> = rows.iter().map(|r| r.q_e).collect();
    let steps: usize = rows.iter().map(|r| r.length).sum();
    let guided: usize = rows.iter().map(|r| r.guided_steps).sum();
    ArmSummary {
        arm: arm.to_string(),
        sessions: rows.len(),
        mean_q_e: mean(&q_e),
        mean_q_t: mean(&q_t),
        median_q_t: if q_t.is_empty() { 0.0 } else { quantile(&q_t, 0.5) },
        mean_w_t: mean(&w_t),
        median_w_t: if w_t.is_empty() { 0.0 } else { quantile(&w_t, 0.5) },
        min_w_t: w_t.first().copied().unwrap_or(0.0),
        max_w_t: w_t.last().copied().unwrap_or(0.0),
        guided_fraction: if steps == 0 {
            0.0
        } else {
            guided as f64 / steps as f64
        },
    }
}

fn write_cdf(
    path: &Path,
    header: &str,
    arms: &[ArmResult],
    points: usize,
    pick: impl Fn(&MetricsRow) -> f64,
) -> Result<()> {
    let mut w = CsvWriter::create(path, None, header)?;
    for result in arms {
        if result.rows.is_empty() {
            continue;
        }
        let values = sorted_values(&result.rows, &pick);
        for i in 0..points {
            let q = i as f64 / (points - 1) as f64;
            w.row(&[&result.arm, &F64(q), &F64(quantile(&values, q))])?;
        }
    }
    w.finish()
}

/// Writes the five report files: quantile grids for Q_T and Q_e, per-arm
/// W_T and Q_T tables, and a plain-text summary. Output is byte-stable for
/// identical inputs. Arms without sessions appear in the tables with zero
/// rows counted, and contribute no CDF rows.
pub fn emit_report(arms: &[ArmResult], cfg: &ReportConfig, out_dir: &Path) -> Result<()> {
    if cfg.cdf_points < 2 {
        return Err(Error::config("report.cdf_points must be at least 2"));
    }
    write_cdf(
        &out_dir.join("qt_cdf.csv"),
        "arm,quantile,q_t",
        arms,
        cfg.cdf_points,
        |r| r.q_t,
    )?;
    write_cdf(
        &out_dir.join("qe_cdf.csv"),
        "arm,quantile,q_e",
        arms,
        cfg.cdf_points,
        |r| r.q_e,
    )?;

    let summaries: Vec<ArmSummary> = arms
        .iter()
        .map(|a| summarize_arm(a.arm, &a.rows))
        .collect();

    let mut wt = CsvWriter::create(
        &out_dir.join("wt_by_arm.csv"),
        None,
        "arm,sessions,mean_w_t,median_w_t,min_w_t,max_w_t",
    )?;
    for s in &summaries {
        wt.row(&[
            &s.arm,
            &s.sessions,
            &F64(s.mean_w_t),
            &F64(s.median_w_t),
            &F64(s.min_w_t),
            &F64(s.max_w_t),
        ])?;
    }
    wt.finish()?;

    let mut qt = CsvWriter::create(
        &out_dir.join("qt_by_arm.csv"),
        None,
        "arm,sessions,mean_q_t,median_q_t,mean_q_e,guided_fraction",
    )?;
    for s in &summaries {
        qt.row(&[
            &s.arm,
            &s.sessions,
            &F64(s.mean_q_t),
            &F64(s.median_q_t),
            &F64(s.mean_q_e),
            &F64(s.guided_fraction),
        ])?;
    }
    qt.finish()?;

    let mut text = String::from("per-arm session metrics\n");
    for s in &summaries {
        text.push_str(&format!(
            "arm={} sessions={} mean_q_e={} mean_q_t={} median_q_t={} mean_w_t={} median_w_t={} guided_fraction={}\n",
            s.arm,
            s.sessions,
            fmt_f64(s.mean_q_e),
            fmt_f64(s.mean_q_t),
            fmt_f64(s.median_q_t),
            fmt_f64(s.mean_w_t),
            fmt_f64(s.median_w_t),
            fmt_f64(s.guided_fraction),
        ));
    }
    std::fs::write(out_dir.join("summary.txt"), text)?;
    Ok(())
}

pub const REPORT_FILES: [&str; 5] = [
    "qt_cdf.csv",
    "qe_cdf.csv",
    "wt_by_arm.csv",
    "qt_by_arm.csv",
    "summary.txt",
];
