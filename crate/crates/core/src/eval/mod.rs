//! Cross-fitted evaluation of the three feature stages and the per-team
//! motion-benefit analysis.

mod folds;
mod harness;
mod metrics;
mod tables;
mod team;

pub use folds::{split, stratified_folds};
pub use harness::{
    cross_fit, design, fit_rows, median_metrics, metric_records, repeated_eval, run_seeds, EvalConfig, EvalRun,
    MetricRecord, METRIC_NAMES,
};
pub use metrics::{accuracy, auc, clip, log_loss, Metrics, PROB_CLIP};
pub use tables::{
    write_metric_medians, write_metric_plot, write_metrics, write_predictions, write_team_deltas, write_team_summary,
};
pub use team::{p_correct, team_benefit, PlayDelta, TeamAnalysis, TeamBenefit};
