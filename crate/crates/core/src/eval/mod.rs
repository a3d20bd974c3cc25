//! Patch-level and tumor-level detection metrics, ROC/FROC curves, and the
//! selection-bias harness.
//!
//! Ratios with a zero denominator are reported as 0 together with a
//! `degenerate` flag instead of NaN.

mod bias;
mod curves;
mod metrics;
mod regions;
mod report;

pub use bias::{gaussian_fit, selection_bias, BiasReport};
pub use curves::{average_precision, froc, roc_auc, CurveData, CurveKind, CurvePoint, RocResult, ScoredGrid};
pub use metrics::{confusion, f_beta, precision_recall, tanimoto, ConfusionCounts, Rate};
pub use regions::{
    connected_components, truth_tumors, tumor_match, Connectivity, LabelGrid, MatchConfig, Region, TumorMatch,
};
pub use report::{evaluate_grids, format_table_row, write_curve_csv, write_metrics_csv, MetricsReport, TABLE_HEADER};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no samples to evaluate")]
    Empty,
    #[error("length mismatch: {predicted} predictions for {truth} labels")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("only one class present ({positives} positives, {negatives} negatives)")]
    SingleClass { positives: usize, negatives: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no ground-truth tumors in the dataset")]
    NoTumors,
    #[error("{0}")]
    Io(String),
}
