use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Matrix, RngState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Accuracy on each held-out fold.
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `fold_scores`.
    pub std: f64,
}

impl CvResult {
    pub fn from_scores(fold_scores: Vec<f64>) -> Self {
        let k = fold_scores.len() as f64;
        let mean = fold_scores.iter().sum::<f64>() / k;
        let var = fold_scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / k;
        CvResult {
            fold_scores,
            mean,
            std: var.sqrt(),
        }
    }
}

/// Row indices of each fold: a seeded shuffle cut into contiguous pieces.
/// The first `n % k` folds get one extra row.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::Precondition(format!(
            "{k}-fold CV needs k >= 2 and at least k rows, got {n}"
        )));
    }
    let order = RngState::new(seed).permutation(n);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// k-fold cross-validated accuracy.
///
/// `fit_predict(fold, train_x, train_y, val_x)` trains on every fold but
/// `fold` and returns class-1 probabilities for `val_x`; a row counts as
/// correct when `(p >= 0.5) == label`.
pub fn kfold_cv<F>(
    mut fit_predict: F,
    x: &Matrix,
    y: &[u8],
    k: usize,
    seed: u64,
) -> Result<CvResult>
where
    F: FnMut(usize, &Matrix, &[u8], &Matrix) -> Result<Vec<f64>>,
{
    if y.len() != x.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} rows",
            y.len(),
            x.rows()
        )));
    }
    let folds = fold_assignment(x.rows(), k, seed)?;
    let mut scores = Vec::with_capacity(k);
    for (i, val) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        let train_y: Vec<u8> = train.iter().map(|&r| y[r]).collect();
        let proba = fit_predict(i, &x.select_rows(&train), &train_y, &x.select_rows(val))?;
        if proba.len() != val.len() {
            return Err(Error::Shape(format!(
                "{} predictions for {} rows",
                proba.len(),
                val.len()
            )));
        }
        let correct = proba
            .iter()
            .zip(val)
            .filter(|&(&p, &r)| u8::from(p >= 0.5) == y[r])
            .count();
        scores.push(correct as f64 / val.len() as f64);
    }
    Ok(CvResult::from_scores(scores))
}
