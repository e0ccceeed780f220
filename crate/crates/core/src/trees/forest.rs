use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{derive_seed, Matrix, RngState};
use crate::trees::cart::grow;
use crate::trees::{check_fit_inputs, check_predict_width, DecisionTreeModel, DecisionTreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `floor(sqrt(d))`, at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k.clamp(1, d.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomForestParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        RandomForestParams {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 0,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTreeModel>,
    pub n_features: usize,
    pub params: RandomForestParams,
}

impl RandomForestModel {
    /// Mean of the member trees' leaf values.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_predict_width(x, self.n_features)?;
        let k = self.trees.len().max(1) as f64;
        Ok(x.iter_rows()
            .map(|r| {
                self.trees
                    .iter()
                    .map(|t| t.tree.predict_row(r))
                    .sum::<f64>()
                    / k
            })
            .collect())
    }
}

/// Parameters of member tree `t` in a forest over `d` features.
pub(crate) fn member_params(params: &RandomForestParams, d: usize, t: usize) -> DecisionTreeParams {
    DecisionTreeParams {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        min_samples_leaf: params.min_samples_leaf,
        max_features: Some(params.max_features.resolve(d)),
        seed: derive_seed(params.seed, t as u64),
    }
}

/// Bagged CART ensemble; tree `t` uses the seed `derive_seed(seed, t)` for
/// both its bootstrap draw and its per-split feature sampling.
pub fn train_random_forest(
    x: &Matrix,
    y: &[u8],
    params: &RandomForestParams,
) -> Result<RandomForestModel> {
    check_fit_inputs(x, y)?;
    if params.n_trees == 0 {
        return Err(Error::Precondition(
            "a forest needs at least one tree".into(),
        ));
    }
    let n = x.rows();
    let d = x.cols();
    let trees = (0..params.n_trees)
        .map(|t| {
            let tree_seed = derive_seed(params.seed, t as u64);
            let mut rng = RngState::new(tree_seed);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            let tree_params = member_params(params, d, t);
            DecisionTreeModel {
                tree: grow(x, y, rows, &tree_params, &mut rng),
                n_features: d,
                params: tree_params,
            }
        })
        .collect();
    Ok(RandomForestModel {
        trees,
        n_features: d,
        params: params.clone(),
    })
}
