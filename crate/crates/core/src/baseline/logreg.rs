use serde::{Deserialize, Serialize};

use crate::baseline::check_two_classes;
use crate::error::{Error, Result};
use crate::numcore::{sigmoid, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticRegressionParams {
    pub l2_strength: f64,
    pub max_epochs: usize,
    /// Largest step tried by the line search.
    pub learning_rate: f64,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
}

impl Default for LogisticRegressionParams {
    fn default() -> Self {
        LogisticRegressionParams {
            l2_strength: 1.0,
            max_epochs: 200,
            learning_rate: 0.1,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegressionModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub params: LogisticRegressionParams,
}

impl LogisticRegressionModel {
    pub fn zeros(d: usize) -> Self {
        LogisticRegressionModel {
            weights: vec![0.0; d],
            bias: 0.0,
            params: LogisticRegressionParams::default(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        predict_logreg(self, x)
    }
}

fn margins(x: &Matrix, w: &[f64], b: f64) -> Vec<f64> {
    x.iter_rows()
        .map(|r| r.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b)
        .collect()
}

/// `log(1 + exp(m))` without overflow.
fn softplus(m: f64) -> f64 {
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

/// Mean logistic loss plus `(l2 / 2N)·‖w‖²`, and its gradient `(∂w, ∂b)`.
pub fn logistic_objective(
    x: &Matrix,
    y: &[u8],
    w: &[f64],
    b: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.rows() as f64;
    let m = margins(x, w, b);
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for ((row, &mi), &yi) in x.iter_rows().zip(&m).zip(y) {
        // -log p(y | x) = softplus(m) - y m
        loss += softplus(mi) - yi as f64 * mi;
        let r = sigmoid(mi) - yi as f64;
        gb += r;
        for (g, &v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
    }
    let reg: f64 = w.iter().map(|v| v * v).sum();
    for (g, &wj) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 / n * wj;
    }
    (loss / n + l2 / (2.0 * n) * reg, gw, gb / n)
}

fn objective_only(x: &Matrix, y: &[u8], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = x.rows() as f64;
    let loss: f64 = margins(x, w, b)
        .iter()
        .zip(y)
        .map(|(&m, &yi)| softplus(m) - yi as f64 * m)
        .sum();
    loss / n + l2 / (2.0 * n) * w.iter().map(|v| v * v).sum::<f64>()
}

pub fn train_logreg(
    x: &Matrix,
    y: &[u8],
    params: &LogisticRegressionParams,
) -> Result<LogisticRegressionModel> {
    train_logreg_traced(x, y, params).map(|(m, _)| m)
}

/// Full-batch gradient descent with an Armijo backtracking line search.
///
/// Each epoch starts from twice the previously accepted step (capped at
/// `learning_rate`) and halves until the objective decreases sufficiently.
/// Also returns the objective after every accepted step, starting with the
/// value at the zero initialization.
pub fn train_logreg_traced(
    x: &Matrix,
    y: &[u8],
    params: &LogisticRegressionParams,
) -> Result<(LogisticRegressionModel, Vec<f64>)> {
    check_two_classes(x, y)?;
    if !(params.learning_rate > 0.0) || !(params.l2_strength >= 0.0) {
        return Err(Error::Precondition(
            "learning_rate must be positive and l2_strength >= 0".into(),
        ));
    }
    let l2 = params.l2_strength;
    let mut w = vec![0.0; x.cols()];
    let mut b = 0.0;
    let mut step = params.learning_rate;
    let (mut obj, mut gw, mut gb) = logistic_objective(x, y, &w, b, l2);
    let mut history = vec![obj];
    for _ in 0..params.max_epochs {
        let grad_sq = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if grad_sq.sqrt() < params.tolerance {
            break;
        }
        step = (step * 2.0).min(params.learning_rate);
        let accepted = loop {
            let w_try: Vec<f64> = w.iter().zip(&gw).map(|(a, g)| a - step * g).collect();
            let b_try = b - step * gb;
            let trial = objective_only(x, y, &w_try, b_try, l2);
            if trial <= obj - 1e-4 * step * grad_sq {
                break Some((w_try, b_try));
            }
            step *= 0.5;
            if step < 1e-12 {
                break None;
            }
        };
        let Some((w_new, b_new)) = accepted else {
            break;
        };
        w = w_new;
        b = b_new;
        (obj, gw, gb) = logistic_objective(x, y, &w, b, l2);
        history.push(obj);
    }
    if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(Error::NonFinite("logistic regression diverged".into()));
    }
    Ok((
        LogisticRegressionModel {
            weights: w,
            bias: b,
            params: params.clone(),
        },
        history,
    ))
}

/// `sigmoid(w·x + b)`.
pub fn predict_logreg(model: &LogisticRegressionModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.weights.len() {
        return Err(Error::Shape(format!(
            "model has {} weights, input has {} features",
            model.weights.len(),
            x.cols()
        )));
    }
    Ok(margins(x, &model.weights, model.bias)
        .into_iter()
        .map(sigmoid)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::RngState;

    #[test]
    fn zero_model_is_one_half() {
        let x = Matrix::from_rows(&[[1.0, -3.0], [0.0, 2.0]]).unwrap();
        assert_eq!(
            predict_logreg(&LogisticRegressionModel::zeros(2), &x).unwrap(),
            vec![0.5, 0.5]
        );
    }

    #[test]
    fn large_margin_saturates_without_overflow() {
        let m = LogisticRegressionModel {
            weights: vec![1.0],
            bias: 0.0,
            params: Default::default(),
        };
        let p = predict_logreg(&m, &Matrix::from_rows(&[[40.0], [-800.0]]).unwrap()).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert!(p[1] >= 0.0 && p[1].is_finite());
    }

    #[test]
    fn matches_recomputation() {
        let mut rng = RngState::new(6);
        let x = Matrix::new(10, 3, (0..30).map(|_| rng.normal()).collect()).unwrap();
        let m = LogisticRegressionModel {
            weights: vec![0.4, -1.1, 2.0],
            bias: -0.3,
            params: Default::default(),
        };
        let p = predict_logreg(&m, &x).unwrap();
        for (i, row) in x.iter_rows().enumerate() {
            let z = 0.4 * row[0] - 1.1 * row[1] + 2.0 * row[2] - 0.3;
            assert!((p[i] - 1.0 / (1.0 + (-z).exp())).abs() < 1e-12);
        }
        assert!(predict_logreg(&m, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn separable_line() {
        let x = Matrix::from_rows(&[[-2.0], [-1.0], [1.0], [2.0]]).unwrap();
        let y = [0, 0, 1, 1];
        let m = train_logreg(&x, &y, &Default::default()).unwrap();
        assert!(m.weights[0] > 0.0);
        let p = m.predict_proba(&x).unwrap();
        assert!(p.iter().zip(&y).all(|(p, &y)| (*p >= 0.5) == (y == 1)));
    }

    #[test]
    fn gradient_at_origin_by_hand() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [2.0, 1.0], [0.5, -1.0], [-1.0, 3.0]]).unwrap();
        let y = [1, 0, 1, 0];
        let (_, gw, gb) = logistic_objective(&x, &y, &[0.0, 0.0], 0.0, 1.0);
        // mean((0.5 - y) x): rows contribute -0.5·x, +0.5·x, -0.5·x, +0.5·x
        let g0 = (-0.5 * 1.0 + 0.5 * 2.0 - 0.5 * 0.5 - 0.5 * 1.0) / 4.0;
        let g1 = (0.5 * 1.0 + 0.5 * 1.0 + 0.5 * 3.0) / 4.0;
        assert!((gw[0] - g0).abs() < 1e-15);
        assert!((gw[1] - g1).abs() < 1e-15);
        assert!(gb.abs() < 1e-15);
        // the regularizer adds (l2 / N) w away from the origin
        let (_, gw2, _) = logistic_objective(&x, &y, &[1.0, 0.0], 0.0, 2.0);
        let (_, gw0, _) = logistic_objective(&x, &y, &[1.0, 0.0], 0.0, 0.0);
        assert!((gw2[0] - gw0[0] - 2.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(matches!(
            train_logreg(&x, &[1, 1], &Default::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = RngState::new(9);
        let x = Matrix::new(80, 4, (0..320).map(|_| rng.normal() * 3.0).collect()).unwrap();
        let y: Vec<u8> = (0..80)
            .map(|i| (x.get(i, 0) + rng.normal() > 0.0) as u8)
            .collect();
        let (_, hist) = train_logreg_traced(&x, &y, &Default::default()).unwrap();
        assert!(hist.len() > 1);
        assert!(hist.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn decision_boundary_is_affine() {
        let m = LogisticRegressionModel {
            weights: vec![1.5, -2.0, 0.5],
            bias: 0.2,
            params: Default::default(),
        };
        // two points with equal score, and their convex combinations
        let a = [1.0, 0.5, 2.0];
        let b = [0.0, 0.25, 4.0];
        let score = |p: &[f64]| m.weights.iter().zip(p).map(|(w, v)| w * v).sum::<f64>() + m.bias;
        assert!((score(&a) - score(&b)).abs() < 1e-12);
        for t in [0.1, 0.5, 0.9] {
            let c: Vec<f64> = a
                .iter()
                .zip(&b)
                .map(|(u, v)| t * u + (1.0 - t) * v)
                .collect();
            assert!((score(&c) - score(&a)).abs() < 1e-12);
        }
    }
}
