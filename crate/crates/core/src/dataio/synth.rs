use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::numcore::{sigmoid, Matrix, RngState};

/// Shape of a synthetic two-class feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub feature_dim: usize,
    pub n_informative: usize,
    /// Distance between the class means on every informative feature.
    pub class_separation: f64,
    /// Probability that a row is labelled 1.
    pub label_balance: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::Precondition("feature_dim must be positive".into()));
        }
        if self.n_informative > self.feature_dim {
            return Err(Error::Precondition(format!(
                "{} informative features exceed dimension {}",
                self.n_informative, self.feature_dim
            )));
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return Err(Error::Precondition(
                "class_separation must be finite and >= 0".into(),
            ));
        }
        if !(self.label_balance > 0.0 && self.label_balance < 1.0) {
            return Err(Error::Precondition(
                "label_balance must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Gain applied to informative features before squashing.
const INFORMATIVE_GAIN: f64 = 2.0;
/// Noise columns get `offset ~ U(-6, -4)` and `gain ~ U(1, 2)`.
const NOISE_OFFSET: (f64, f64) = (-6.0, -4.0);
const NOISE_GAIN: (f64, f64) = (1.0, 2.0);

/// Generates a two-class dataset with values in `(0, 1)`.
///
/// Informative feature `j < n_informative` is `sigmoid(2 v)` with
/// `v ~ N(±separation/2, 1)` by label, a dense column whose class shift is
/// shared across all informative features. Every other feature is
/// `sigmoid(offset_j + gain_j e)` with independent `e ~ N(0, 1)` per cell and
/// per-column offset and gain drawn once per dataset, giving sparse,
/// right-skewed columns that mostly sit near zero, as count-like static
/// features do.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.feature_dim;
    let mut rng = RngState::new(seed);
    let between = |rng: &mut RngState, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.uniform();
    let offsets: Vec<f64> = (0..d).map(|_| between(&mut rng, NOISE_OFFSET)).collect();
    let gains: Vec<f64> = (0..d).map(|_| between(&mut rng, NOISE_GAIN)).collect();

    let half = spec.class_separation / 2.0;
    let mut data = Vec::with_capacity(spec.n_samples * d);
    let mut labels = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let label = rng.uniform() < spec.label_balance;
        labels.push(label as i8);
        let shift = if label { half } else { -half };
        for j in 0..d {
            let e = rng.normal();
            let v = if j < spec.n_informative {
                INFORMATIVE_GAIN * (e + shift)
            } else {
                offsets[j] + gains[j] * e
            };
            data.push(sigmoid(v));
        }
    }
    Dataset::new(
        format!("synthetic-{seed}"),
        Matrix::new(spec.n_samples, d, data)?,
        labels,
    )
}
