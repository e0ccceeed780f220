use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::numcore::RngState;

/// Train / test / holdout fractions plus the shuffle seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub test_fraction: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
    /// Shuffle each class separately so partitions keep the class ratio.
    #[serde(default)]
    pub stratify: bool,
}

impl SplitSpec {
    /// Holdout takes whatever train and test leave over.
    pub fn new(train_fraction: f64, test_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            train_fraction,
            test_fraction,
            holdout_fraction: 1.0 - train_fraction - test_fraction,
            seed,
            stratify: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = [
            self.train_fraction,
            self.test_fraction,
            self.holdout_fraction,
        ];
        if f.iter().any(|v| !(-1e-12..=1.0 + 1e-12).contains(v)) {
            return Err(Error::Precondition(format!(
                "split fractions out of [0,1]: {f:?}"
            )));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!(
                "split fractions do not sum to 1: {f:?}"
            )));
        }
        Ok(())
    }

    /// Short tag such as `30/30` used in reports.
    pub fn label(&self) -> String {
        format!(
            "{}/{}",
            (self.train_fraction * 100.0).round(),
            (self.test_fraction * 100.0).round()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub holdout: Vec<usize>,
}

fn part_size(n: usize, fraction: f64) -> usize {
    // Absorbs representation error such as 100 * 0.29 = 28.999999999999996.
    ((n as f64) * fraction + 1e-9).floor() as usize
}

/// Seeded permutation of `0..labels.len()` cut into train / test / holdout.
///
/// Train receives `floor(N · train_fraction)` rows, test `floor(N · test_fraction)`,
/// holdout the remainder. With `stratify` the same rule is applied per class.
pub fn split_indices(labels: &[i8], spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    let n = labels.len();
    if n < 3 {
        return Err(Error::Precondition(format!("cannot split {n} rows")));
    }
    let mut rng = RngState::new(spec.seed);
    let mut out = SplitIndices {
        train: Vec::new(),
        test: Vec::new(),
        holdout: Vec::new(),
    };
    let groups: Vec<Vec<usize>> = if spec.stratify {
        let mut classes: Vec<i8> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        classes
            .iter()
            .map(|&c| (0..n).filter(|&i| labels[i] == c).collect())
            .collect()
    } else {
        vec![(0..n).collect()]
    };
    for mut group in groups {
        rng.shuffle(&mut group);
        let n_train = part_size(group.len(), spec.train_fraction);
        let n_test = part_size(group.len(), spec.test_fraction).min(group.len() - n_train);
        out.train.extend_from_slice(&group[..n_train]);
        out.test
            .extend_from_slice(&group[n_train..n_train + n_test]);
        out.holdout.extend_from_slice(&group[n_train + n_test..]);
    }
    if spec.stratify {
        rng.shuffle(&mut out.train);
        rng.shuffle(&mut out.test);
        rng.shuffle(&mut out.holdout);
    }
    Ok(out)
}

/// Splits a dataset into (train, test, holdout).
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let idx = split_indices(ds.labels(), spec)?;
    Ok((
        ds.select(&idx.train),
        ds.select(&idx.test),
        ds.select(&idx.holdout),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sizes(n: usize, tr: f64, te: f64) -> (usize, usize, usize) {
        let idx = split_indices(&vec![0; n], &SplitSpec::new(tr, te, 42)).unwrap();
        (idx.train.len(), idx.test.len(), idx.holdout.len())
    }

    #[test]
    fn default_split_sizes() {
        assert_eq!(sizes(1000, 0.3, 0.3), (300, 300, 400));
        assert_eq!(sizes(1000, 0.5, 0.3), (500, 300, 200));
        assert_eq!(sizes(10, 0.7, 0.3), (7, 3, 0));
    }

    #[test]
    fn seeds_control_permutation() {
        let labels = vec![0; 100];
        let a = split_indices(&labels, &SplitSpec::new(0.5, 0.3, 42)).unwrap();
        let b = split_indices(&labels, &SplitSpec::new(0.5, 0.3, 42)).unwrap();
        let c = split_indices(&labels, &SplitSpec::new(0.5, 0.3, 123)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_specs() {
        let labels = vec![0; 10];
        assert!(split_indices(&labels, &SplitSpec::new(0.8, 0.3, 1)).is_err());
        let mut s = SplitSpec::new(0.5, 0.5, 1);
        s.holdout_fraction = 0.2;
        assert!(split_indices(&labels, &s).is_err());
        assert!(split_indices(&[0, 1], &SplitSpec::new(0.5, 0.5, 1)).is_err());
    }

    #[test]
    fn stratified_keeps_ratio() {
        let labels: Vec<i8> = (0..200).map(|i| (i % 4 == 0) as i8).collect();
        let mut s = SplitSpec::new(0.5, 0.5, 3);
        s.stratify = true;
        let idx = split_indices(&labels, &s).unwrap();
        let pos = idx.train.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!(pos, 25);
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint_and_exhaustive(
            n in 3usize..=500,
            tr in 0.0f64..=1.0,
            te_share in 0.0f64..=1.0,
            seed in any::<u64>(),
            stratify in any::<bool>(),
        ) {
            let te = (1.0 - tr) * te_share;
            let mut spec = SplitSpec::new(tr, te, seed);
            spec.stratify = stratify;
            let labels: Vec<i8> = (0..n).map(|i| (i % 3 == 0) as i8).collect();
            let idx = split_indices(&labels, &spec).unwrap();
            let mut all: Vec<usize> = idx.train.iter().chain(&idx.test).chain(&idx.holdout).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            if !stratify {
                prop_assert_eq!(idx.train.len(), part_size(n, tr));
            }
        }
    }
}
