//! Splits, metrics, cross-validation, ablations and the logistic baseline.

mod cv;
mod logreg;
mod metrics;
mod report;
mod split;

pub use cv::{
    holdout_eval, run_baseline_cv, run_cv, score_holdout, verify_fold_pca, BaselineConfig, CvConfig, CvReport,
    FoldResult, HoldoutReport, MeanStd,
};
pub use logreg::{baseline_features, fit_logreg, logistic_loss_and_grad, LogRegConfig, LogisticModel};
pub use metrics::{
    classification_metrics, mean_std, roc_auc, roc_curve, ClassificationMetrics, Confusion, DEFAULT_THRESHOLD,
};
pub use report::{cv_csv, read_cv_csv, roc_csv, summary_json, CV_HEADER};
pub use split::{holdout_split, time_series_split, Fold, FoldPlan, DEFAULT_FOLDS, DEFAULT_HOLDOUT_FRACTION};
