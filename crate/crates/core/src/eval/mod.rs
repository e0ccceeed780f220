//! Metrics, ROC analysis, cross-validation, t-tests and timing.

mod cv;
mod metrics;
mod roc;
mod timing;
mod ttest;

pub use cv::{fold_assignment, kfold_cv, CvResult};
pub use metrics::{confusion_and_scores, ClassificationScores, ConfusionMatrix};
pub use roc::{roc_auc, roc_curve_points, trapezoid_area, RocPoint};
pub use timing::{time_execution, TimingRecord};
pub use ttest::{ttest_ind, ttest_welch, TTestResult};

use crate::error::{Error, Result};

/// Checks that labels are binary and both classes occur; returns `(P, N)`.
pub(crate) fn class_counts(scores: &[f64], truths: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != truths.len() {
        return Err(Error::Precondition(format!(
            "{} scores for {} labels",
            scores.len(),
            truths.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("score is NaN".into()));
    }
    if truths.iter().any(|&t| t > 1) {
        return Err(Error::Precondition("labels must be 0 or 1".into()));
    }
    let pos = truths.iter().filter(|&&t| t == 1).count();
    let neg = truths.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "ROC analysis needs both classes".into(),
        ));
    }
    Ok((pos, neg))
}
