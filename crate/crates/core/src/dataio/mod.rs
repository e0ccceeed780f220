//! Dataset ingestion, cleaning, min-max scaling, splitting and synthesis.

mod csv;
mod lmld;
mod scaler;
mod split;
mod synth;

pub use self::csv::{load_csv, write_csv, LabelColumn};
pub use lmld::{load_binary, load_binary_with_header, save_binary, LmldHeader};
pub use scaler::{apply_scaler, fit_scaler, ScalerParams};
pub use split::{split, split_indices, SplitIndices, SplitSpec};
pub use synth::{generate_synthetic, SyntheticSpec};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Label value marking rows without a class (EMBER convention).
pub const DEFAULT_UNLABELED: i8 = -1;

/// Feature width of the EMBER / BODMAS static feature vectors.
pub const DEFAULT_FEATURE_DIM: usize = 2381;

/// Feature matrix plus one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    features: Matrix,
    labels: Vec<i8>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Matrix, labels: Vec<i8>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::Shape(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        Ok(Dataset {
            name: name.into(),
            features,
            labels,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn into_parts(self) -> (Matrix, Vec<i8>) {
        (self.features, self.labels)
    }

    /// Labels as 0/1 class ids; anything else is a precondition error.
    pub fn binary_labels(&self) -> Result<Vec<u8>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, &l)| match l {
                0 => Ok(0),
                1 => Ok(1),
                other => Err(Error::Precondition(format!(
                    "row {i} has label {other}; expected 0 or 1"
                ))),
            })
            .collect()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Same labels, new feature matrix.
    pub fn with_features(&self, features: Matrix) -> Result<Dataset> {
        Dataset::new(self.name.clone(), features, self.labels.clone())
    }
}

/// Removes every row labelled `sentinel`, keeping survivors in order.
pub fn drop_unlabeled(ds: &Dataset, sentinel: i8) -> Dataset {
    let keep: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.labels[i] != sentinel)
        .collect();
    if keep.len() == ds.len() {
        return ds.clone();
    }
    ds.select(&keep)
}
