//! CART decision trees, random forests and histogram gradient boosting.

mod cart;
mod forest;
mod gbdt;

pub use cart::{train_decision_tree, DecisionTreeModel, DecisionTreeParams};
pub(crate) use forest::member_params;
pub use forest::{train_random_forest, MaxFeatures, RandomForestModel, RandomForestParams};
pub use gbdt::{train_gbdt, train_gbdt_traced, GbdtModel, GbdtParams, SplitRecord};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// A node in a binary tree arena.
///
/// Rows with `x[feature] <= threshold` go left. Leaf values are class-1
/// probabilities for classification trees and raw additive scores for
/// boosted trees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Arena of nodes with the root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    /// Validates that every node is reachable exactly once from the root.
    pub fn new(nodes: Vec<TreeNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Format("tree has no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if i >= nodes.len() {
                return Err(Error::Format(format!("child index {i} out of range")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Format(format!("node {i} reached twice")));
            }
            match nodes[i] {
                TreeNode::Leaf { value } if !value.is_finite() => {
                    return Err(Error::NonFinite(format!("leaf {i}")))
                }
                TreeNode::Split { threshold, .. } if !threshold.is_finite() => {
                    return Err(Error::NonFinite(format!("threshold at node {i}")))
                }
                TreeNode::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
                TreeNode::Leaf { .. } => {}
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::Format(format!("node {orphan} is unreachable")));
        }
        Ok(Tree { nodes })
    }

    pub(crate) fn from_nodes_unchecked(nodes: Vec<TreeNode>) -> Self {
        debug_assert!(Tree::new(nodes.clone()).is_ok());
        Tree { nodes }
    }

    pub fn single_leaf(value: f64) -> Self {
        Tree {
            nodes: vec![TreeNode::Leaf { value }],
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            best = best.max(d);
            if let TreeNode::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        best
    }

    /// Largest feature index referenced by any split.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .max()
    }

    /// Index of the leaf reached by `row`.
    #[inline]
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { .. } => return i,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            TreeNode::Leaf { value } => value,
            TreeNode::Split { .. } => unreachable!(),
        }
    }

    /// Nodes in preorder (node, left subtree, right subtree).
    pub fn preorder(&self) -> Vec<TreeNode> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            out.push(self.nodes[i]);
            if let TreeNode::Split { left, right, .. } = self.nodes[i] {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    /// Rebuilds a tree from preorder records; child indices in the records are ignored.
    pub fn from_preorder(records: &[TreeNode]) -> Result<Self> {
        let mut nodes = Vec::with_capacity(records.len());
        // (slot of a split waiting for its right child)
        let mut pending: Vec<usize> = Vec::new();
        let mut attach_to: Option<(usize, bool)> = None;
        for rec in records {
            let idx = nodes.len();
            if let Some((parent, is_left)) = attach_to.take() {
                if let TreeNode::Split { left, right, .. } = &mut nodes[parent] {
                    if is_left {
                        *left = idx;
                    } else {
                        *right = idx;
                    }
                }
            }
            match *rec {
                TreeNode::Leaf { value } => {
                    nodes.push(TreeNode::Leaf { value });
                    if let Some(p) = pending.pop() {
                        attach_to = Some((p, false));
                    } else if idx + 1 != records.len() {
                        return Err(Error::Format(
                            "trailing records after a complete tree".into(),
                        ));
                    }
                }
                TreeNode::Split {
                    feature, threshold, ..
                } => {
                    nodes.push(TreeNode::Split {
                        feature,
                        threshold,
                        left: usize::MAX,
                        right: usize::MAX,
                    });
                    pending.push(idx);
                    attach_to = Some((idx, true));
                }
            }
        }
        if attach_to.is_some() || !pending.is_empty() {
            return Err(Error::Format(
                "preorder records end inside a subtree".into(),
            ));
        }
        Tree::new(nodes)
    }
}

pub(crate) fn check_fit_inputs(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::Precondition("cannot train on zero rows".into()));
    }
    if y.len() != x.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} rows",
            y.len(),
            x.rows()
        )));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::Precondition(format!("label {bad} is not binary")));
    }
    Ok(())
}

pub(crate) fn check_predict_width(x: &Matrix, n_features: usize) -> Result<()> {
    if x.cols() != n_features {
        return Err(Error::Shape(format!(
            "model trained on {n_features} features, got {}",
            x.cols()
        )));
    }
    Ok(())
}
