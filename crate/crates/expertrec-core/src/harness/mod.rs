//! Experiment harness: per-session metrics, the five-arm comparison driver,
//! and report emission.

pub mod experiment;
pub mod metrics;
pub mod report;

pub use experiment::{
    run_arm, run_experiment, ArmResult, ExperimentInputs, ExperimentOutput, ARMS,
};
pub use metrics::{compute_metrics, load_metrics, save_metrics, MetricsRow, METRICS_HEADER};
pub use report::{emit_report, mean, quantile, summarize_arm, ArmSummary, REPORT_FILES};
