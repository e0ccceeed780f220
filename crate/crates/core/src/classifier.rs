//! A single handle over the five classifier families.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::{
    train_gnb, train_logreg, GaussianNbModel, LogisticRegressionModel, LogisticRegressionParams,
};
use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::trees::{
    train_decision_tree, train_gbdt, train_random_forest, DecisionTreeModel, DecisionTreeParams,
    GbdtModel, GbdtParams, RandomForestModel, RandomForestParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    DecisionTree,
    RandomForest,
    Gbdt,
    LogisticRegression,
    NaiveBayes,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::DecisionTree,
        ClassifierKind::RandomForest,
        ClassifierKind::Gbdt,
        ClassifierKind::LogisticRegression,
        ClassifierKind::NaiveBayes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::DecisionTree => "decision_tree",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::Gbdt => "gbdt",
            ClassifierKind::LogisticRegression => "logistic_regression",
            ClassifierKind::NaiveBayes => "naive_bayes",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown classifier '{s}'")))
    }
}

/// Hyperparameters for every family. The `seed` fields inside are replaced
/// by the seed passed to [`ClassifierParams::train`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    pub decision_tree: DecisionTreeParams,
    pub random_forest: RandomForestParams,
    pub gbdt: GbdtParams,
    pub logistic_regression: LogisticRegressionParams,
}

impl ClassifierParams {
    pub fn train(
        &self,
        kind: ClassifierKind,
        x: &Matrix,
        y: &[u8],
        seed: u64,
    ) -> Result<ClassifierModel> {
        Ok(match kind {
            ClassifierKind::DecisionTree => {
                let params = DecisionTreeParams {
                    seed,
                    ..self.decision_tree.clone()
                };
                ClassifierModel::DecisionTree(train_decision_tree(x, y, &params)?)
            }
            ClassifierKind::RandomForest => {
                let params = RandomForestParams {
                    seed,
                    ..self.random_forest.clone()
                };
                ClassifierModel::RandomForest(train_random_forest(x, y, &params)?)
            }
            ClassifierKind::Gbdt => {
                let params = GbdtParams {
                    seed,
                    ..self.gbdt.clone()
                };
                ClassifierModel::Gbdt(train_gbdt(x, y, &params)?)
            }
            ClassifierKind::LogisticRegression => {
                ClassifierModel::LogisticRegression(train_logreg(x, y, &self.logistic_regression)?)
            }
            ClassifierKind::NaiveBayes => ClassifierModel::NaiveBayes(train_gnb(x, y)?),
        })
    }
}

/// Any trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierModel {
    DecisionTree(DecisionTreeModel),
    RandomForest(RandomForestModel),
    Gbdt(GbdtModel),
    LogisticRegression(LogisticRegressionModel),
    NaiveBayes(GaussianNbModel),
}

impl ClassifierModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierModel::DecisionTree(_) => ClassifierKind::DecisionTree,
            ClassifierModel::RandomForest(_) => ClassifierKind::RandomForest,
            ClassifierModel::Gbdt(_) => ClassifierKind::Gbdt,
            ClassifierModel::LogisticRegression(_) => ClassifierKind::LogisticRegression,
            ClassifierModel::NaiveBayes(_) => ClassifierKind::NaiveBayes,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            ClassifierModel::DecisionTree(m) => m.n_features,
            ClassifierModel::RandomForest(m) => m.n_features,
            ClassifierModel::Gbdt(m) => m.n_features,
            ClassifierModel::LogisticRegression(m) => m.n_features(),
            ClassifierModel::NaiveBayes(m) => m.n_features(),
        }
    }

    /// Class-1 probability for each row.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            ClassifierModel::DecisionTree(m) => m.predict_proba(x),
            ClassifierModel::RandomForest(m) => m.predict_proba(x),
            ClassifierModel::Gbdt(m) => m.predict_proba(x),
            ClassifierModel::LogisticRegression(m) => m.predict_proba(x),
            ClassifierModel::NaiveBayes(m) => m.predict_proba(x),
        }
    }

    /// Hard labels at the 0.5 cut.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| (p >= 0.5) as u8)
            .collect())
    }
}
