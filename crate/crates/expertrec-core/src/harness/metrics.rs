//! Per-session outcome metrics: expert-step quality Q_e, overall quality
//! Q_T, and total watch time W_T.

use std::path::Path;

use crate::config::MetricsConfig;
use crate::error::Result;
use crate::io_util::{read_csv, CsvWriter, Row, F64};
use crate::user_env::SessionLog;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub session_id: usize,
    /// Mean experienced quality over expert-guided clicked steps; 0 when the
    /// session had none (`guided_clicks` flags that case).
    pub q_e: f64,
    /// Mean experienced quality: over clicked steps by default, or over all
    /// steps with no-clicks counted as 0 when so configured.
    pub q_t: f64,
    /// Total watch time.
    pub w_t: f64,
    /// Steps where the slate followed a matched expert policy action.
    pub guided_steps: usize,
    /// Guided steps the user actually clicked (the Q_e support).
    pub guided_clicks: usize,
    pub clicked_steps: usize,
    pub length: usize,
}

pub fn compute_metrics(session_id: usize, log: &SessionLog, cfg: &MetricsConfig) -> MetricsRow {
    let mut quality_sum = 0.0;
    let mut guided_quality_sum = 0.0;
    let mut guided_steps = 0;
    let mut guided_clicks = 0;
    let mut clicked_steps = 0;
    for step in &log.steps {
        if step.expert_guided {
            guided_steps += 1;
        }
        if step.response.clicked.is_some() {
            clicked_steps += 1;
            quality_sum += step.quality;
            if step.expert_guided {
                guided_clicks += 1;
                guided_quality_sum += step.quality;
            }
        }
    }
    let q_e = if guided_clicks > 0 {
        guided_quality_sum / guided_clicks as f64
    } else {
        0.0
    };
    let q_t = if cfg.count_no_click_as_zero {
        if log.steps.is_empty() {
            0.0
        } else {
            quality_sum / log.steps.len() as f64
        }
    } else if clicked_steps > 0 {
        quality_sum / clicked_steps as f64
    } else {
        0.0
    };
    MetricsRow {
        session_id,
        q_e,
        q_t,
        w_t: log.total_watch_time(),
        guided_steps,
        guided_clicks,
        clicked_steps,
        length: log.len(),
    }
}

pub const METRICS_HEADER: &str =
    "session_id,q_e,q_t,w_t,guided_steps,guided_clicks,clicked_steps,length";

pub fn save_metrics(path: &Path, rows: &[MetricsRow], comment: &str) -> Result<()> {
    let mut w = CsvWriter::create(path, Some(comment), METRICS_HEADER)?;
    for r in rows {
        w.row(&[
            &r.session_id,
            &F64(r.q_e),
            &F64(r.q_t),
            &F64(r.w_t),
            &r.guided_steps,
            &r.guided_clicks,
            &r.clicked_steps,
            &r.length,
        ])?;
    }
    w.finish()
}

pub fn load_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let file = read_csv(path, METRICS_HEADER, "simulate")?;
    file.rows
        .iter()
        .map(|(line, text)| {
            let row = Row::split(path, *line, text, 8)?;
            Ok(MetricsRow {
                session_id: row.usize(0, "session_id")?,
                q_e: row.f64(1, "q_e")?,
                q_t: row.f64(2, "q_t")?,
                w_t: row.f64(3, "w_t")?,
                guided_steps: row.usize(4, "guided_steps")?,
                guided_clicks: row.usize(5, "guided_clicks")?,
                clicked_steps: row.usize(6, "clicked_steps")?,
                length: row.usize(7, "length")?,
            })
        })
        .collect()
}
