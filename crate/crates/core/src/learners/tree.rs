//! Weighted decision trees shared by the CART classifier and the GBT
//! regression stages. Splits are exhaustive over midpoints of distinct
//! feature values with deterministic tie-breaking.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitCriterion {
    /// Weighted Gini impurity on binary targets.
    Gini,
    /// Weighted squared error around the leaf mean (regression).
    Variance,
}

pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub criterion: SplitCriterion,
}

#[derive(Clone, Copy, Default)]
struct Stats {
    w: f64,
    wy: f64,
    wyy: f64,
    count: usize,
}

impl Stats {
    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.wy += w * y;
        self.wyy += w * y * y;
        self.count += 1;
    }

    fn sub(&mut self, w: f64, y: f64) {
        self.w -= w;
        self.wy -= w * y;
        self.wyy -= w * y * y;
        self.count -= 1;
    }

    /// Total impurity contribution (weight-scaled, so children sum directly).
    fn cost(&self, criterion: SplitCriterion) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match criterion {
            // w * 2p(1-p) with p = wy/w
            SplitCriterion::Gini => 2.0 * self.wy * (1.0 - self.wy / self.w),
            SplitCriterion::Variance => self.wyy - self.wy * self.wy / self.w,
        }
    }

    fn mean(&self, targets_sum_fallback: f64) -> f64 {
        if self.w > 0.0 {
            self.wy / self.w
        } else {
            targets_sum_fallback
        }
    }
}

pub fn build_tree(x: &Matrix, targets: &[f64], weights: &[f64], params: &TreeParams) -> DecisionTree {
    let idx: Vec<usize> = (0..x.rows()).collect();
    let mut nodes = Vec::new();
    grow(x, targets, weights, params, idx, params.max_depth, &mut nodes);
    DecisionTree { nodes }
}

fn leaf_value(idx: &[usize], targets: &[f64], weights: &[f64]) -> f64 {
    let mut s = Stats::default();
    for &i in idx {
        s.add(weights[i], targets[i]);
    }
    let unweighted = idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len().max(1) as f64;
    s.mean(unweighted)
}

fn grow(
    x: &Matrix,
    targets: &[f64],
    weights: &[f64],
    params: &TreeParams,
    idx: Vec<usize>,
    depth_left: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut total = Stats::default();
    for &i in &idx {
        total.add(weights[i], targets[i]);
    }
    let node_cost = total.cost(params.criterion);
    let stop = depth_left == 0 || idx.len() < 2 * params.min_leaf || node_cost <= 1e-15;
    if !stop {
        if let Some((feature, threshold, split_at, order)) =
            best_split(x, targets, weights, params, &idx, node_cost)
        {
            let left_idx: Vec<usize> = order[..split_at].to_vec();
            let right_idx: Vec<usize> = order[split_at..].to_vec();
            let slot = nodes.len();
            nodes.push(Node::Leaf { value: 0.0 }); // placeholder
            let left = grow(x, targets, weights, params, left_idx, depth_left - 1, nodes);
            let right = grow(x, targets, weights, params, right_idx, depth_left - 1, nodes);
            nodes[slot] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
            return slot;
        }
    }
    let slot = nodes.len();
    nodes.push(Node::Leaf {
        value: leaf_value(&idx, targets, weights),
    });
    slot
}

/// Returns (feature, threshold, split position, sorted order) of the best
/// split, or None when no split improves the node cost. Ties resolve to the
/// lowest feature index, then the lowest threshold.
fn best_split(
    x: &Matrix,
    targets: &[f64],
    weights: &[f64],
    params: &TreeParams,
    idx: &[usize],
    node_cost: f64,
) -> Option<(usize, f64, usize, Vec<usize>)> {
    let mut best: Option<(f64, usize, f64, usize, Vec<usize>)> = None;
    for f in 0..x.cols() {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        let mut right = Stats::default();
        for &i in &order {
            right.add(weights[i], targets[i]);
        }
        let mut left = Stats::default();
        for k in 1..order.len() {
            let i = order[k - 1];
            left.add(weights[i], targets[i]);
            right.sub(weights[i], targets[i]);
            let prev = x.get(i, f);
            let next = x.get(order[k], f);
            if prev == next {
                continue;
            }
            if k < params.min_leaf || order.len() - k < params.min_leaf {
                continue;
            }
            let cost = left.cost(params.criterion) + right.cost(params.criterion);
            if cost >= node_cost - 1e-12 {
                continue;
            }
            let threshold = prev + (next - prev) / 2.0;
            let better = match &best {
                None => true,
                Some((bc, bf, bt, _, _)) => {
                    cost < bc - 1e-15
                        || (cost <= bc + 1e-15 && (f, threshold) < (*bf, *bt))
                }
            };
            if better {
                best = Some((cost, f, threshold, k, order.clone()));
            }
        }
    }
    best.map(|(_, f, t, k, order)| (f, t, k, order))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_split_reaches_zero_gini() {
        // Labels [0,0,1,1] split cleanly by one feature: root impurity 0.5,
        // weighted Gini of the split is 0.
        let x = Matrix::from_rows(&[vec![0.0], vec![0.1], vec![1.0], vec![1.1]]);
        let targets = [0.0, 0.0, 1.0, 1.0];
        let weights = [1.0; 4];
        let mut root = Stats::default();
        for i in 0..4 {
            root.add(weights[i], targets[i]);
        }
        // Gini impurity per unit weight at the root: 2 * 0.5 * 0.5 = 0.5.
        assert!((root.cost(SplitCriterion::Gini) / root.w - 0.5).abs() < 1e-12);
        let tree = build_tree(
            &x,
            &targets,
            &weights,
            &TreeParams {
                max_depth: 1,
                min_leaf: 1,
                criterion: SplitCriterion::Gini,
            },
        );
        assert_eq!(tree.predict_row(&[0.05]), 0.0);
        assert_eq!(tree.predict_row(&[1.05]), 1.0);
        // Children are pure: split cost 0.
        match &tree.nodes[0] {
            Node::Split { threshold, .. } => assert!((*threshold - 0.55).abs() < 1e-12),
            Node::Leaf { .. } => panic!("expected a split at the root"),
        }
    }

    #[test]
    fn min_leaf_blocks_small_children() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let targets = [0.0, 1.0, 1.0, 1.0];
        let weights = [1.0; 4];
        let tree = build_tree(
            &x,
            &targets,
            &weights,
            &TreeParams {
                max_depth: 3,
                min_leaf: 2,
                criterion: SplitCriterion::Gini,
            },
        );
        // The only impurity-reducing split (0|111) has a 1-row child, so the
        // allowed split is at 2/2.
        for n in &tree.nodes {
            if let Node::Split { threshold, .. } = n {
                assert!((*threshold - 1.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn variance_criterion_fits_regression_steps() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let targets = [1.0, 1.0, 5.0, 5.0];
        let weights = [1.0; 4];
        let tree = build_tree(
            &x,
            &targets,
            &weights,
            &TreeParams {
                max_depth: 2,
                min_leaf: 1,
                criterion: SplitCriterion::Variance,
            },
        );
        assert_eq!(tree.predict_row(&[0.5]), 1.0);
        assert_eq!(tree.predict_row(&[2.5]), 5.0);
    }
}
