//! Histogram gradient boosting for binary logistic loss.
//!
//! Features are bucketed once per training run into at most
//! `histogram_bins` equal-frequency bins. Each boosting round fits a
//! regression tree to the loss gradients `g = p - y` and hessians
//! `h = p (1 - p)`, growing leaf-wise: the leaf whose best split has the
//! largest gain
//!
//! ```text
//! gain = ½ [ G_L² / (H_L + λ) + G_R² / (H_R + λ) - (G_L + G_R)² / (H_L + H_R + λ) ]
//! ```
//!
//! is split next, until `max_leaves` leaves exist or no split has positive
//! gain. A leaf outputs `-G / (H + λ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{sigmoid, Matrix, RngState};
use crate::trees::cart::midpoint;
use crate::trees::{check_fit_inputs, check_predict_width, Tree, TreeNode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_iterations: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub histogram_bins: usize,
    pub min_samples_leaf: usize,
    /// L2 regularization `λ` on leaf outputs.
    pub lambda: f64,
    pub min_sum_hessian: f64,
    /// Fraction of rows drawn (without replacement) per round; 1.0 uses all.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_iterations: 100,
            learning_rate: 0.1,
            max_leaves: 31,
            histogram_bins: 255,
            min_samples_leaf: 20,
            lambda: 1.0,
            min_sum_hessian: 1e-3,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl GbdtParams {
    fn validate(&self) -> Result<()> {
        if !(2..=256).contains(&self.histogram_bins) {
            return Err(Error::Precondition(
                "histogram_bins must be within 2..=256".into(),
            ));
        }
        if self.max_leaves < 1 || !(self.learning_rate > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::Precondition("invalid boosting parameters".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Precondition("subsample must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    /// Log-odds of the training base rate.
    pub initial_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub params: GbdtParams,
}

impl GbdtModel {
    /// `sigmoid(initial_score + learning_rate · Σ tree outputs)`.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.predict_proba_first(x, self.trees.len())
    }

    /// Probabilities using only the first `k` trees.
    pub fn predict_proba_first(&self, x: &Matrix, k: usize) -> Result<Vec<f64>> {
        check_predict_width(x, self.n_features)?;
        let trees = &self.trees[..k.min(self.trees.len())];
        Ok(x.iter_rows()
            .map(|r| {
                let sum: f64 = trees.iter().map(|t| t.predict_row(r)).sum();
                sigmoid(self.initial_score + self.learning_rate * sum)
            })
            .collect())
    }
}

/// One accepted split, for inspection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRecord {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

pub fn train_gbdt(x: &Matrix, y: &[u8], params: &GbdtParams) -> Result<GbdtModel> {
    train_gbdt_traced(x, y, params).map(|(m, _)| m)
}

const PROBA_CLIP: f64 = 1e-15;

/// Trains and also returns, per round, the splits taken in order.
pub fn train_gbdt_traced(
    x: &Matrix,
    y: &[u8],
    params: &GbdtParams,
) -> Result<(GbdtModel, Vec<Vec<SplitRecord>>)> {
    check_fit_inputs(x, y)?;
    params.validate()?;
    let n = x.rows();
    let d = x.cols();
    let positives = y.iter().filter(|&&v| v == 1).count();
    let base = (positives as f64 / n as f64).clamp(PROBA_CLIP, 1.0 - PROBA_CLIP);
    let initial_score = (base / (1.0 - base)).ln();
    let single_class = positives == 0 || positives == n;

    let binned = BinnedMatrix::new(x, params.histogram_bins);
    let mut scores = vec![initial_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut rng = RngState::new(params.seed);
    let mut trees = Vec::with_capacity(params.n_iterations);
    let mut trace = Vec::with_capacity(params.n_iterations);
    let sample_size = ((n as f64 * params.subsample).round() as usize).clamp(1, n);

    for _ in 0..params.n_iterations {
        for i in 0..n {
            let p = sigmoid(scores[i]);
            grad[i] = p - y[i] as f64;
            hess[i] = p * (1.0 - p);
        }
        let rows: Vec<u32> = if sample_size < n {
            let mut perm = rng.permutation(n);
            perm.truncate(sample_size);
            perm.sort_unstable();
            perm.into_iter().map(|i| i as u32).collect()
        } else {
            (0..n as u32).collect()
        };
        let max_leaves = if single_class { 1 } else { params.max_leaves };
        let (tree, leaf_of, splits) = grow_tree(&binned, &grad, &hess, rows, params, max_leaves);
        // every row (sampled or not) moves by its leaf's output
        for (i, s) in scores.iter_mut().enumerate() {
            *s += params.learning_rate * leaf_of(&binned, i, &tree);
        }
        // store in preorder so a saved and reloaded model compares equal
        trees.push(Tree::from_preorder(&tree.preorder())?);
        trace.push(splits);
    }

    Ok((
        GbdtModel {
            initial_score,
            learning_rate: params.learning_rate,
            trees,
            n_features: d,
            params: params.clone(),
        },
        trace,
    ))
}

/// Column-major bin indices plus the cut points that define them.
struct BinnedMatrix {
    n: usize,
    bins: Vec<u8>,
    /// `edges[f]`: ascending cut values; bin `b` holds `edges[b-1] < x <= edges[b]`.
    edges: Vec<Vec<f64>>,
    offsets: Vec<usize>,
    total_bins: usize,
}

impl BinnedMatrix {
    fn new(x: &Matrix, max_bins: usize) -> Self {
        let n = x.rows();
        let d = x.cols();
        let mut bins = vec![0u8; n * d];
        let mut edges = Vec::with_capacity(d);
        let mut offsets = Vec::with_capacity(d);
        let mut total_bins = 0;
        let mut col = vec![0.0; n];
        for f in 0..d {
            for (i, c) in col.iter_mut().enumerate() {
                *c = x.get(i, f);
            }
            let e = cut_points(&col, max_bins);
            for i in 0..n {
                bins[f * n + i] = e.partition_point(|&edge| edge < col[i]) as u8;
            }
            offsets.push(total_bins);
            total_bins += e.len() + 1;
            edges.push(e);
        }
        BinnedMatrix {
            n,
            bins,
            edges,
            offsets,
            total_bins,
        }
    }

    #[inline]
    fn bin(&self, f: usize, i: usize) -> usize {
        self.bins[f * self.n + i] as usize
    }

    fn d(&self) -> usize {
        self.edges.len()
    }
}

/// Equal-frequency cut points over a column, at most `max_bins - 1` of them.
///
/// With few distinct values every gap gets a cut at its midpoint; otherwise
/// cuts sit just below the values found at the `k / max_bins` quantiles.
fn cut_points(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut cuts: Vec<f64> = Vec::with_capacity(max_bins - 1);
    for k in 1..max_bins {
        let q = sorted[k * n / max_bins];
        let below = distinct.partition_point(|&v| v < q);
        if below == 0 {
            continue;
        }
        let cut = midpoint(distinct[below - 1], q);
        if cuts.last().map_or(true, |&c| cut > c) {
            cuts.push(cut);
        }
    }
    cuts
}

#[derive(Clone)]
struct Histogram {
    grad: Vec<f64>,
    hess: Vec<f64>,
    count: Vec<u32>,
}

impl Histogram {
    fn build(b: &BinnedMatrix, grad: &[f64], hess: &[f64], rows: &[u32]) -> Self {
        let mut h = Histogram {
            grad: vec![0.0; b.total_bins],
            hess: vec![0.0; b.total_bins],
            count: vec![0; b.total_bins],
        };
        for f in 0..b.d() {
            let off = b.offsets[f];
            let col = &b.bins[f * b.n..(f + 1) * b.n];
            for &i in rows {
                let i = i as usize;
                let k = off + col[i] as usize;
                h.grad[k] += grad[i];
                h.hess[k] += hess[i];
                h.count[k] += 1;
            }
        }
        h
    }

    fn subtract(&self, other: &Histogram) -> Histogram {
        Histogram {
            grad: self
                .grad
                .iter()
                .zip(&other.grad)
                .map(|(a, b)| a - b)
                .collect(),
            hess: self
                .hess
                .iter()
                .zip(&other.hess)
                .map(|(a, b)| a - b)
                .collect(),
            count: self
                .count
                .iter()
                .zip(&other.count)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

#[derive(Clone, Copy)]
struct BestSplit {
    feature: usize,
    bin: usize,
    gain: f64,
}

struct Leaf {
    node: usize,
    rows: Vec<u32>,
    hist: Histogram,
    sum_grad: f64,
    sum_hess: f64,
    best: Option<BestSplit>,
}

fn leaf_objective(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

fn find_best_split(b: &BinnedMatrix, leaf: &Leaf, params: &GbdtParams) -> Option<BestSplit> {
    let n = leaf.rows.len() as u32;
    let min_leaf = params.min_samples_leaf.max(1) as u32;
    if n < 2 * min_leaf {
        return None;
    }
    let lambda = params.lambda;
    let parent = leaf_objective(leaf.sum_grad, leaf.sum_hess, lambda);
    let mut best: Option<BestSplit> = None;
    for f in 0..b.d() {
        let off = b.offsets[f];
        let nb = b.edges[f].len() + 1;
        let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0u32);
        for bin in 0..nb - 1 {
            let k = off + bin;
            gl += leaf.hist.grad[k];
            hl += leaf.hist.hess[k];
            cl += leaf.hist.count[k];
            if cl < min_leaf {
                continue;
            }
            let cr = n - cl;
            if cr < min_leaf {
                break;
            }
            let gr = leaf.sum_grad - gl;
            let hr = leaf.sum_hess - hl;
            if hl < params.min_sum_hessian || hr < params.min_sum_hessian {
                continue;
            }
            let gain =
                0.5 * (leaf_objective(gl, hl, lambda) + leaf_objective(gr, hr, lambda) - parent);
            if gain > 0.0 && best.map_or(true, |s| gain > s.gain) {
                best = Some(BestSplit {
                    feature: f,
                    bin,
                    gain,
                });
            }
        }
    }
    best
}

type LeafLookup = fn(&BinnedMatrix, usize, &Tree) -> f64;

fn route_binned(b: &BinnedMatrix, i: usize, tree: &Tree) -> f64 {
    // thresholds are bin edges, so comparing bins equals comparing values
    let nodes = tree.nodes();
    let mut k = 0;
    loop {
        match nodes[k] {
            TreeNode::Leaf { value } => return value,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let edge_bin = b.edges[feature].partition_point(|&e| e < threshold);
                k = if b.bin(feature, i) <= edge_bin {
                    left
                } else {
                    right
                };
            }
        }
    }
}

fn grow_tree(
    b: &BinnedMatrix,
    grad: &[f64],
    hess: &[f64],
    rows: Vec<u32>,
    params: &GbdtParams,
    max_leaves: usize,
) -> (Tree, LeafLookup, Vec<SplitRecord>) {
    let sum = |rows: &[u32]| -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(g, h), &i| {
            (g + grad[i as usize], h + hess[i as usize])
        })
    };
    let (sg, sh) = sum(&rows);
    let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
    let hist = Histogram::build(b, grad, hess, &rows);
    let mut root = Leaf {
        node: 0,
        rows,
        hist,
        sum_grad: sg,
        sum_hess: sh,
        best: None,
    };
    if max_leaves > 1 {
        root.best = find_best_split(b, &root, params);
    }
    let mut leaves = vec![root];
    let mut splits = Vec::new();

    while leaves.len() < max_leaves {
        // highest gain; earliest leaf wins ties
        let mut pick: Option<(usize, f64)> = None;
        for (li, leaf) in leaves.iter().enumerate() {
            if let Some(s) = leaf.best {
                if pick.map_or(true, |(_, g)| s.gain > g) {
                    pick = Some((li, s.gain));
                }
            }
        }
        let Some((li, _)) = pick else { break };
        let leaf = leaves.remove(li);
        let split = leaf.best.expect("picked leaf has a split");
        let threshold = b.edges[split.feature][split.bin];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = leaf
            .rows
            .iter()
            .partition(|&&i| b.bin(split.feature, i as usize) <= split.bin);
        let left_id = nodes.len();
        nodes.push(TreeNode::Leaf { value: 0.0 });
        nodes.push(TreeNode::Leaf { value: 0.0 });
        nodes[leaf.node] = TreeNode::Split {
            feature: split.feature,
            threshold,
            left: left_id,
            right: left_id + 1,
        };
        splits.push(SplitRecord {
            feature: split.feature,
            threshold,
            gain: split.gain,
        });

        let (small_rows, large_rows, small_is_left) = if left_rows.len() <= right_rows.len() {
            (left_rows, right_rows, true)
        } else {
            (right_rows, left_rows, false)
        };
        let small_hist = Histogram::build(b, grad, hess, &small_rows);
        let large_hist = leaf.hist.subtract(&small_hist);
        let (sg_s, sh_s) = sum(&small_rows);
        let (sg_l, sh_l) = sum(&large_rows);
        let (small_node, large_node) = if small_is_left {
            (left_id, left_id + 1)
        } else {
            (left_id + 1, left_id)
        };
        let mut children = [
            Leaf {
                node: small_node,
                rows: small_rows,
                hist: small_hist,
                sum_grad: sg_s,
                sum_hess: sh_s,
                best: None,
            },
            Leaf {
                node: large_node,
                rows: large_rows,
                hist: large_hist,
                sum_grad: sg_l,
                sum_hess: sh_l,
                best: None,
            },
        ];
        if !small_is_left {
            children.swap(0, 1);
        }
        for mut child in children {
            child.best = find_best_split(b, &child, params);
            leaves.push(child);
        }
    }

    for leaf in &leaves {
        nodes[leaf.node] = TreeNode::Leaf {
            value: -leaf.sum_grad / (leaf.sum_hess + params.lambda),
        };
    }
    (Tree::from_nodes_unchecked(nodes), route_binned, splits)
}
