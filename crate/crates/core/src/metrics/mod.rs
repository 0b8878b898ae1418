//! Ranking and regression metrics.

pub mod ranking;
pub mod regression;

pub use ranking::{accuracy, ap_at_k, auprc, auroc, macro_average, MacroSummary};
pub use regression::{regression_suite, RegressionMetrics};
