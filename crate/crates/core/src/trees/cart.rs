use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numcore::{Matrix, RngState};
use crate::trees::{check_fit_inputs, check_predict_width, Tree, TreeNode};

/// CART settings. The split criterion is always Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionTreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` means all of them.
    pub max_features: Option<usize>,
    /// Drives feature subsampling when `max_features` is set.
    pub seed: u64,
}

impl Default for DecisionTreeParams {
    fn default() -> Self {
        DecisionTreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTreeModel {
    pub tree: Tree,
    pub n_features: usize,
    pub params: DecisionTreeParams,
}

impl DecisionTreeModel {
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_predict_width(x, self.n_features)?;
        Ok(x.iter_rows().map(|r| self.tree.predict_row(r)).collect())
    }
}

/// Greedy CART on all rows.
pub fn train_decision_tree(
    x: &Matrix,
    y: &[u8],
    params: &DecisionTreeParams,
) -> Result<DecisionTreeModel> {
    check_fit_inputs(x, y)?;
    let rows: Vec<usize> = (0..x.rows()).collect();
    let mut rng = RngState::new(params.seed);
    let tree = grow(x, y, rows, params, &mut rng);
    Ok(DecisionTreeModel {
        tree,
        n_features: x.cols(),
        params: params.clone(),
    })
}

/// Candidate split quality `Σ_c n_lc² / n_l + Σ_c n_rc² / n_r` as an exact
/// fraction. Maximizing it maximizes the Gini impurity decrease.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(l: [u64; 2], r: [u64; 2]) -> Self {
        let nl = (l[0] + l[1]) as u128;
        let nr = (r[0] + r[1]) as u128;
        let a = (l[0] as u128).pow(2) + (l[1] as u128).pow(2);
        let b = (r[0] as u128).pow(2) + (r[1] as u128).pow(2);
        Score {
            num: a * nr + b * nl,
            den: nl * nr,
        }
    }

    fn beats(&self, other: &Score) -> bool {
        self.num * other.den > other.num * self.den
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    score: Score,
}

struct Work {
    rows: Vec<usize>,
    depth: usize,
    parent: Option<(usize, bool)>,
}

/// Grows a tree over `rows` (repeats allowed, as in bootstrap samples),
/// depth-first with nodes stored in preorder.
pub(crate) fn grow(
    x: &Matrix,
    y: &[u8],
    rows: Vec<usize>,
    params: &DecisionTreeParams,
    rng: &mut RngState,
) -> Tree {
    let d = x.cols();
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut stack = vec![Work {
        rows,
        depth: 0,
        parent: None,
    }];
    let mut feature_order: Vec<usize> = (0..d).collect();
    let mut pairs: Vec<(f64, u8)> = Vec::new();

    while let Some(work) = stack.pop() {
        let idx = nodes.len();
        if let Some((p, is_left)) = work.parent {
            if let TreeNode::Split { left, right, .. } = &mut nodes[p] {
                if is_left {
                    *left = idx;
                } else {
                    *right = idx;
                }
            }
        }
        let n = work.rows.len();
        let pos = work.rows.iter().filter(|&&i| y[i] == 1).count();
        let leaf_value = if n == 0 { 0.0 } else { pos as f64 / n as f64 };
        let pure = pos == 0 || pos == n;
        let depth_capped = params.max_depth.is_some_and(|m| work.depth >= m);
        let too_small =
            n < params.min_samples_split.max(2) || n < 2 * params.min_samples_leaf.max(1);

        let best = if pure || depth_capped || too_small {
            None
        } else {
            let candidates =
                choose_features(x, &work.rows, params.max_features, &mut feature_order, rng);
            best_split(
                x,
                y,
                &work.rows,
                &candidates,
                params.min_samples_leaf.max(1),
                &mut pairs,
            )
        };

        match best {
            None => nodes.push(TreeNode::Leaf { value: leaf_value }),
            Some(c) => {
                nodes.push(TreeNode::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left: usize::MAX,
                    right: usize::MAX,
                });
                let (left, right): (Vec<usize>, Vec<usize>) = work
                    .rows
                    .iter()
                    .partition(|&&i| x.get(i, c.feature) <= c.threshold);
                stack.push(Work {
                    rows: right,
                    depth: work.depth + 1,
                    parent: Some((idx, false)),
                });
                stack.push(Work {
                    rows: left,
                    depth: work.depth + 1,
                    parent: Some((idx, true)),
                });
            }
        }
    }
    Tree::from_nodes_unchecked(nodes)
}

/// Features to evaluate at a node, in ascending index order.
///
/// With a feature budget, features are visited in a fresh random order and
/// constant ones (at this node) do not count toward the budget.
fn choose_features(
    x: &Matrix,
    rows: &[usize],
    max_features: Option<usize>,
    order: &mut [usize],
    rng: &mut RngState,
) -> Vec<usize> {
    let d = order.len();
    let budget = match max_features {
        Some(k) if k < d => k.max(1),
        _ => return (0..d).collect(),
    };
    rng.shuffle(order);
    let mut picked = Vec::with_capacity(budget);
    let mut varying = 0;
    for &f in order.iter() {
        if varying == budget {
            break;
        }
        let first = x.get(rows[0], f);
        if rows.iter().any(|&i| x.get(i, f) != first) {
            varying += 1;
            picked.push(f);
        }
    }
    picked.sort_unstable();
    picked
}

fn best_split(
    x: &Matrix,
    y: &[u8],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
    pairs: &mut Vec<(f64, u8)>,
) -> Option<Candidate> {
    let n = rows.len();
    let total_pos = rows.iter().filter(|&&i| y[i] == 1).count() as u64;
    let total = [n as u64 - total_pos, total_pos];
    let mut best: Option<Candidate> = None;
    for &f in features {
        pairs.clear();
        pairs.extend(rows.iter().map(|&i| (x.get(i, f), y[i])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0u64; 2];
        for k in 1..n {
            left[pairs[k - 1].1 as usize] += 1;
            if pairs[k].0 == pairs[k - 1].0 || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let score = Score::new(left, right);
            if best.as_ref().map_or(true, |b| score.beats(&b.score)) {
                best = Some(Candidate {
                    feature: f,
                    threshold: midpoint(pairs[k - 1].0, pairs[k].0),
                    score,
                });
            }
        }
    }
    best
}

/// Midpoint of two distinct sorted values that still separates them.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi || !m.is_finite() {
        lo
    } else {
        m
    }
}
