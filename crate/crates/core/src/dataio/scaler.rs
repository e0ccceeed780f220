use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Per-feature minimum and maximum observed on a training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::Shape(format!(
                "scaler has {} minima and {} maxima",
                min.len(),
                max.len()
            )));
        }
        if let Some(j) = (0..min.len()).find(|&j| !(min[j] <= max[j])) {
            return Err(Error::Precondition(format!(
                "feature {j}: min {} exceeds max {}",
                min[j], max[j]
            )));
        }
        Ok(ScalerParams { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Scales one value of feature `j` into `[0, 1]`.
    #[inline]
    pub fn scale_value(&self, j: usize, x: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span > 0.0 {
            ((x - self.min[j]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::Shape(format!(
                "expected {} features, got {}",
                self.dim(),
                row.len()
            )));
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &x)| self.scale_value(j, x))
            .collect())
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "expected {} features, got {}",
                self.dim(),
                x.cols()
            )));
        }
        let d = self.dim();
        let data = x
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &v)| self.scale_value(i % d, v))
            .collect();
        Matrix::new(x.rows(), d, data)
    }
}

/// Fits per-column min/max on the training rows.
pub fn fit_scaler(train: &Dataset) -> Result<ScalerParams> {
    if train.is_empty() {
        return Err(Error::Precondition(
            "cannot fit a scaler on an empty dataset".into(),
        ));
    }
    let x = train.features();
    let mut min = x.row(0).to_vec();
    let mut max = min.clone();
    for row in x.iter_rows().skip(1) {
        for (j, &v) in row.iter().enumerate() {
            if v < min[j] {
                min[j] = v;
            }
            if v > max[j] {
                max[j] = v;
            }
        }
    }
    ScalerParams::new(min, max)
}

/// `(x - min) / (max - min)`, clamped to `[0, 1]`; constant columns map to 0.
pub fn apply_scaler(params: &ScalerParams, ds: &Dataset) -> Result<Dataset> {
    ds.with_features(params.transform(ds.features())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::RngState;
    use proptest::prelude::*;

    fn column(values: &[f64]) -> Dataset {
        let m = Matrix::new(values.len(), 1, values.to_vec()).unwrap();
        Dataset::new("c", m, vec![0; values.len()]).unwrap()
    }

    #[test]
    fn min_max_of_column() {
        let p = fit_scaler(&column(&[2.0, 4.0, 6.0])).unwrap();
        assert_eq!((p.min[0], p.max[0]), (2.0, 6.0));
        let scaled = apply_scaler(&p, &column(&[2.0, 4.0, 6.0])).unwrap();
        assert_eq!(scaled.features().as_slice(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let p = fit_scaler(&column(&[5.0, 5.0])).unwrap();
        assert_eq!((p.min[0], p.max[0]), (5.0, 5.0));
        let scaled = apply_scaler(&p, &column(&[5.0, 5.0])).unwrap();
        assert_eq!(scaled.features().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn out_of_range_clamps() {
        let p = fit_scaler(&column(&[2.0, 6.0])).unwrap();
        let scaled = apply_scaler(&p, &column(&[8.0, -1.0])).unwrap();
        assert_eq!(scaled.features().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn empty_and_mismatch() {
        let empty = Dataset::new("e", Matrix::zeros(0, 3), vec![]).unwrap();
        assert!(matches!(fit_scaler(&empty), Err(Error::Precondition(_))));
        let p = fit_scaler(&column(&[1.0, 2.0])).unwrap();
        let wide = Dataset::new("w", Matrix::zeros(1, 2), vec![0]).unwrap();
        assert!(matches!(apply_scaler(&p, &wide), Err(Error::Shape(_))));
    }

    #[test]
    fn matches_column_loop() {
        let mut rng = RngState::new(20);
        let data: Vec<f64> = (0..80).map(|_| rng.normal() * 3.0).collect();
        let ds = Dataset::new("r", Matrix::new(20, 4, data).unwrap(), vec![0; 20]).unwrap();
        let p = fit_scaler(&ds).unwrap();
        for j in 0..4 {
            let col = ds.features().column(j);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(p.min[j], lo);
            assert_eq!(p.max[j], hi);
        }
    }

    proptest! {
        #[test]
        fn scaled_values_stay_in_unit_interval(
            train in proptest::collection::vec(-1e3f64..1e3, 3..40),
            test in proptest::collection::vec(-1e4f64..1e4, 1..40),
        ) {
            let p = fit_scaler(&column(&train)).unwrap();
            for ds in [column(&train), column(&test)] {
                let s = apply_scaler(&p, &ds).unwrap();
                prop_assert!(s.features().as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
