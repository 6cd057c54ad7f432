//! Gradient-boosted trees: weighted least-squares residual boosting on
//! {0,1} targets, scores clamped to [0,1].

use serde::{Deserialize, Serialize};

use crate::learners::tree::{build_tree, DecisionTree, SplitCriterion, TreeParams};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbtModel {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<DecisionTree>,
}

pub fn fit(
    x: &Matrix,
    targets: &[f64],
    weights: &[f64],
    estimators: usize,
    learning_rate: f64,
    max_depth: usize,
    min_leaf: usize,
) -> GbtModel {
    let n = x.rows();
    let total_w: f64 = weights.iter().sum();
    let base = weights
        .iter()
        .zip(targets)
        .map(|(w, y)| w * y)
        .sum::<f64>()
        / total_w;
    let mut current = vec![base; n];
    let mut trees = Vec::with_capacity(estimators);
    let params = TreeParams {
        max_depth,
        min_leaf,
        criterion: SplitCriterion::Variance,
    };
    let mut residuals = vec![0.0; n];
    for _ in 0..estimators {
        for i in 0..n {
            residuals[i] = targets[i] - current[i];
        }
        let tree = build_tree(x, &residuals, weights, &params);
        for i in 0..n {
            current[i] += learning_rate * tree.predict_row(x.row(i));
        }
        trees.push(tree);
    }
    GbtModel {
        base,
        learning_rate,
        trees,
    }
}

impl GbtModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut f = self.base;
        for tree in &self.trees {
            f += self.learning_rate * tree.predict_row(row);
        }
        f.clamp(0.0, 1.0)
    }
}
