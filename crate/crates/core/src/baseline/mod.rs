//! Linear and probabilistic baselines.

mod gnb;
mod logreg;

pub use gnb::{predict_gnb, train_gnb, GaussianNbModel, VAR_SMOOTHING};
pub use logreg::{
    logistic_objective, predict_logreg, train_logreg, train_logreg_traced, LogisticRegressionModel,
    LogisticRegressionParams,
};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

pub(crate) fn check_two_classes(x: &Matrix, y: &[u8]) -> Result<()> {
    if y.len() != x.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} rows",
            y.len(),
            x.rows()
        )));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::Precondition(format!("label {bad} is not binary")));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Precondition("both classes must be present".into()));
    }
    Ok(())
}
