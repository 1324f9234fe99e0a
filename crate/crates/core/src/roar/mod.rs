//! Remove-and-retrain: masks from relevance, retraining sweeps and reports.

mod base;
mod export;
mod mask;
mod run;

pub use base::{base_run, fold_relevance, summarize_relevance, BaseRun, MethodRelevance};
pub use export::{curves_csv, export_mask, folds_csv, points_from_folds_csv, report_csv, significance_report, summary_csv, write_roar_csvs, ReportRow};
pub use mask::{
    apply_mask, default_slice_len, make_mask, slice_masks, uniform_random_mask, BinaryMask, Fill, MaskRule, SliceMode,
};
pub use run::{
    condition_mask, roar_curves, run_roar, Condition, CurvePoint, RoarConfig, RoarCurve, RoarPoint, RoarSubject,
    DEFAULT_REMOVAL_RATES,
};
