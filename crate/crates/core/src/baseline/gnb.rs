use serde::{Deserialize, Serialize};

use crate::baseline::check_two_classes;
use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Fraction of the largest feature variance added to every variance.
pub const VAR_SMOOTHING: f64 = 1e-9;

/// Gaussian naive Bayes with per-class diagonal Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    pub class_log_priors: [f64; 2],
    /// `means[c]` has one entry per feature.
    pub means: [Vec<f64>; 2],
    /// Smoothed population variances, same layout as `means`.
    pub variances: [Vec<f64>; 2],
}

impl GaussianNbModel {
    pub fn n_features(&self) -> usize {
        self.means[0].len()
    }

    /// Per row, `log p(c) + Σ_j log N(x_j; μ_cj, σ²_cj)` for both classes.
    pub fn joint_log_likelihood(&self, x: &Matrix) -> Result<Vec<[f64; 2]>> {
        if x.cols() != self.n_features() {
            return Err(Error::Shape(format!(
                "model has {} features, input has {}",
                self.n_features(),
                x.cols()
            )));
        }
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let norm: [f64; 2] = [0, 1].map(|c| {
            self.variances[c]
                .iter()
                .map(|v| ln_2pi + v.ln())
                .sum::<f64>()
                * -0.5
        });
        Ok(x.iter_rows()
            .map(|row| {
                [0, 1].map(|c| {
                    let quad: f64 = row
                        .iter()
                        .zip(&self.means[c])
                        .zip(&self.variances[c])
                        .map(|((v, m), s)| (v - m) * (v - m) / s)
                        .sum();
                    self.class_log_priors[c] + norm[c] - 0.5 * quad
                })
            })
            .collect())
    }

    /// Posterior `P(y = 1 | x)` normalized with log-sum-exp.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self
            .joint_log_likelihood(x)?
            .into_iter()
            .map(|[l0, l1]| {
                let top = l0.max(l1);
                let lse = top + ((l0 - top).exp() + (l1 - top).exp()).ln();
                (l1 - lse).exp().clamp(0.0, 1.0)
            })
            .collect())
    }
}

/// Posterior `P(y = 1 | x)`; same as [`GaussianNbModel::predict_proba`].
pub fn predict_gnb(model: &GaussianNbModel, x: &Matrix) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

/// Class priors, means and population variances; every variance is raised by
/// `VAR_SMOOTHING × max_j Var(x_j)` (or by `VAR_SMOOTHING` itself when all
/// features are constant).
pub fn train_gnb(x: &Matrix, y: &[u8]) -> Result<GaussianNbModel> {
    check_two_classes(x, y)?;
    let d = x.cols();
    let n = x.rows() as f64;
    let mut counts = [0usize; 2];
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    for (row, &c) in x.iter_rows().zip(y) {
        counts[c as usize] += 1;
        for (s, v) in sums[c as usize].iter_mut().zip(row) {
            *s += v;
        }
    }
    let means = [0, 1].map(|c| {
        sums[c]
            .iter()
            .map(|s| s / counts[c] as f64)
            .collect::<Vec<_>>()
    });
    let mut sq = [vec![0.0; d], vec![0.0; d]];
    for (row, &c) in x.iter_rows().zip(y) {
        let c = c as usize;
        for ((s, v), m) in sq[c].iter_mut().zip(row).zip(&means[c]) {
            *s += (v - m) * (v - m);
        }
    }

    // overall per-feature variance sets the smoothing floor
    let mut overall_max: f64 = 0.0;
    for j in 0..d {
        let mean = (sums[0][j] + sums[1][j]) / n;
        let var = x.iter_rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        overall_max = overall_max.max(var);
    }
    let epsilon = if overall_max > 0.0 {
        VAR_SMOOTHING * overall_max
    } else {
        VAR_SMOOTHING
    };
    let variances = [0, 1].map(|c| {
        sq[c]
            .iter()
            .map(|s| s / counts[c] as f64 + epsilon)
            .collect::<Vec<_>>()
    });
    let class_log_priors = [0, 1].map(|c| (counts[c] as f64 / n).ln());
    Ok(GaussianNbModel {
        class_log_priors,
        means,
        variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::RngState;
    use proptest::prelude::*;

    #[test]
    fn degenerate_variances_hit_the_floor() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [3.0, 5.0], [3.0, 5.0]]).unwrap();
        let m = train_gnb(&x, &[0, 0, 1, 1]).unwrap();
        assert_eq!(m.means[0], vec![1.0, 2.0]);
        assert_eq!(m.means[1], vec![3.0, 5.0]);
        // overall variances: 1.0 and 2.25
        let floor = VAR_SMOOTHING * 2.25;
        assert!(m.variances.iter().flatten().all(|&v| v == floor));
        let total: f64 = m.class_log_priors.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_problem_gives_one_half() {
        let x = Matrix::from_rows(&[[-1.5], [-0.5], [0.5], [1.5]]).unwrap();
        let m = train_gnb(&x, &[0, 0, 1, 1]).unwrap();
        let p = m
            .predict_proba(&Matrix::from_rows(&[[0.0]]).unwrap())
            .unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hand_density_and_bayes_rule() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 3.0], [2.0, 0.0], [4.0, 2.0], [3.0, 1.0]])
            .unwrap();
        let y = [0, 0, 1, 1, 1];
        let m = train_gnb(&x, &y).unwrap();
        let q = [1.5, 2.5];
        let jll = m
            .joint_log_likelihood(&Matrix::from_rows(&[q]).unwrap())
            .unwrap()[0];

        let log_normal = |v: f64, mu: f64, var: f64| {
            -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (v - mu).powi(2) / (2.0 * var)
        };
        // class 0: rows (0,1),(1,3); class 1: rows (2,0),(4,2),(3,1)
        let mu0 = [0.5, 2.0];
        let var0 = [0.25, 1.0];
        let mu1 = [3.0, 1.0];
        let var1 = [2.0 / 3.0, 2.0 / 3.0];
        let eps = VAR_SMOOTHING * 2.0; // overall variance of feature 0 is 2.0
        let h0 = (0.4f64).ln()
            + log_normal(q[0], mu0[0], var0[0] + eps)
            + log_normal(q[1], mu0[1], var0[1] + eps);
        let h1 = (0.6f64).ln()
            + log_normal(q[0], mu1[0], var1[0] + eps)
            + log_normal(q[1], mu1[1], var1[1] + eps);
        assert!((jll[0] - h0).abs() < 1e-9);
        assert!((jll[1] - h1).abs() < 1e-9);

        let p = m.predict_proba(&Matrix::from_rows(&[q]).unwrap()).unwrap()[0];
        let bayes = h1.exp() / (h0.exp() + h1.exp());
        assert!((p - bayes).abs() < 1e-9);
    }

    #[test]
    fn extreme_input_stays_finite() {
        let x = Matrix::from_rows(&[[0.0], [0.1], [0.9], [1.0]]).unwrap();
        let m = train_gnb(&x, &[0, 0, 1, 1]).unwrap();
        for p in m
            .predict_proba(&Matrix::from_rows(&[[1e6], [-1e6]]).unwrap())
            .unwrap()
        {
            assert!(p.is_finite() && (0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn single_class_rejected() {
        assert!(train_gnb(&Matrix::zeros(2, 1), &[0, 0]).is_err());
    }

    fn random_model(seed: u64) -> (GaussianNbModel, Matrix) {
        let mut rng = RngState::new(seed);
        let x = Matrix::new(40, 3, (0..120).map(|_| rng.normal()).collect()).unwrap();
        let y: Vec<u8> = (0..40).map(|i| (i % 3 == 0) as u8).collect();
        let probe = Matrix::new(25, 3, (0..75).map(|_| rng.normal() * 4.0).collect()).unwrap();
        (train_gnb(&x, &y).unwrap(), probe)
    }

    proptest! {
        #[test]
        fn posteriors_sum_to_one(seed in any::<u64>()) {
            let (m, probe) = random_model(seed);
            for [l0, l1] in m.joint_log_likelihood(&probe).unwrap() {
                let top = l0.max(l1);
                let lse = top + ((l0 - top).exp() + (l1 - top).exp()).ln();
                prop_assert!(((l0 - lse).exp() + (l1 - lse).exp() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn common_prior_scaling_keeps_decisions(seed in any::<u64>(), scale in 0.01f64..100.0) {
            let (m, probe) = random_model(seed);
            let mut scaled = m.clone();
            for l in scaled.class_log_priors.iter_mut() {
                *l += scale.ln();
            }
            let a = m.predict_proba(&probe).unwrap();
            let b = scaled.predict_proba(&probe).unwrap();
            for (p, q) in a.iter().zip(&b) {
                prop_assert_eq!(*p >= 0.5, *q >= 0.5);
            }
        }
    }
}
