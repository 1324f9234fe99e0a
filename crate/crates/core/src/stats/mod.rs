//! Classification metrics and hypothesis tests.

pub mod metrics;
pub mod special;

pub use metrics::{macro_metrics, ConfusionMatrix, MacroMetrics};
pub use tests::{anova_oneway, holm_correction, ks_two_sample, HolmResult, TestResult};
