//! Sample-weight-aware base learners behind a single `train` entry point.
//!
//! Every learner accepts optional per-row weights and target overrides so it
//! can serve as the cost-sensitive oracle required by reduction-based
//! unfairness mitigation. Training is pure and deterministic given its
//! inputs; models are immutable afterwards.

pub mod gbt;
pub mod logistic;
pub mod model;
pub mod space;
pub mod tree;

pub use model::{GroupRule, ModelCore, TrainedModel};
pub use space::{
    default_space, ConfigPoint, LearnerKind, LearnerSpace, ParamRange, ParamValue, Scale,
    SearchSpace, SpaceMode,
};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Train the learner selected by `c` on `d`, minimizing the weighted
/// training loss of its family. `targets` overrides `d.labels` (used by
/// best-response oracles). Degenerate single-class data yields a constant
/// majority predictor flagged `degenerate` instead of an error.
pub fn train(
    c: &ConfigPoint,
    d: &Dataset,
    weights: Option<&[f64]>,
    targets: Option<&[u8]>,
) -> Result<TrainedModel> {
    let n = d.rows();
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::LengthMismatch(format!(
                    "weights length {} != rows {}",
                    w.len(),
                    n
                )));
            }
            if w.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::BadRunParam("weights must be finite and >= 0".into()));
            }
            w.to_vec()
        }
        None => vec![1.0; n],
    };
    if w.iter().sum::<f64>() <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    let y: Vec<u8> = match targets {
        Some(t) => {
            if t.len() != n {
                return Err(Error::LengthMismatch(format!(
                    "targets length {} != rows {}",
                    t.len(),
                    n
                )));
            }
            t.to_vec()
        }
        None => d.labels.clone(),
    };

    // Single effective class after weighting: constant majority predictor.
    let mut seen = [false, false];
    for i in 0..n {
        if w[i] > 0.0 {
            seen[usize::from(y[i] > 0)] = true;
        }
    }
    if !(seen[0] && seen[1]) {
        let class = u8::from(seen[1]);
        return Ok(TrainedModel {
            core: ModelCore::Constant {
                score: f64::from(class),
            },
            learner: c.learner,
            mitigated: false,
            degenerate: true,
            features: d.features.cols(),
        });
    }

    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let core = match c.learner {
        LearnerKind::Logistic => {
            let l2 = c.get_f64("l2_reg").unwrap_or(1e-3);
            let iters = c.get_usize("iterations").unwrap_or(500);
            ModelCore::Logistic(logistic::fit(&d.features, &yf, &w, l2, iters))
        }
        LearnerKind::Tree => {
            let depth = c.get_usize("max_depth").unwrap_or(6);
            let min_leaf = c.get_usize("min_leaf").unwrap_or(8).max(1);
            ModelCore::Tree(tree::build_tree(
                &d.features,
                &yf,
                &w,
                &tree::TreeParams {
                    max_depth: depth,
                    min_leaf,
                    criterion: tree::SplitCriterion::Gini,
                },
            ))
        }
        LearnerKind::Gbt => {
            let estimators = c.get_usize("estimators").unwrap_or(64).max(1);
            let lr = c.get_f64("learning_rate").unwrap_or(0.1);
            let depth = c.get_usize("max_depth").unwrap_or(6).max(1);
            let min_leaf = c.get_usize("min_leaf").unwrap_or(8).max(1);
            ModelCore::Gbt(gbt::fit(&d.features, &yf, &w, estimators, lr, depth, min_leaf))
        }
    };
    Ok(TrainedModel {
        core,
        learner: c.learner,
        mitigated: false,
        degenerate: false,
        features: d.features.cols(),
    })
}

/// Deterministic cost proxy in abstract units, monotone in the
/// cost-driving parameters. Used by the simulated-cost runner mode.
pub fn proxy_cost(c: &ConfigPoint) -> f64 {
    match c.learner {
        LearnerKind::Logistic => 0.001 * c.get_f64("iterations").unwrap_or(500.0),
        LearnerKind::Tree => 0.01 * c.get_f64("max_depth").unwrap_or(6.0),
        LearnerKind::Gbt => {
            0.001
                * c.get_f64("estimators").unwrap_or(64.0)
                * c.get_f64("max_depth").unwrap_or(6.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn toy_dataset() -> Dataset {
        Dataset {
            features: Matrix::from_rows(&[
                vec![0.0, 0.0],
                vec![0.2, 0.1],
                vec![1.0, 1.0],
                vec![0.9, 1.1],
            ]),
            feature_names: vec!["x1".into(), "x2".into()],
            labels: vec![0, 0, 1, 1],
            sensitive: vec![0, 1, 0, 1],
            group_names: vec!["a".into(), "b".into()],
        }
    }

    #[test]
    fn logistic_fits_separable_data() {
        let d = toy_dataset();
        let m = train(&ConfigPoint::logistic(1e-6, 2000), &d, None, None).unwrap();
        let preds = m.predict(&d.features, 0.5).unwrap();
        assert_eq!(preds, d.labels);
        assert!(!m.degenerate);
    }

    #[test]
    fn single_effective_class_is_degenerate() {
        let d = toy_dataset();
        // All mass on one example with label 1.
        let w = [0.0, 0.0, 3.0, 0.0];
        let m = train(&ConfigPoint::logistic(1e-3, 100), &d, Some(&w), None).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.predict(&d.features, 0.5).unwrap(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn all_zero_weights_rejected() {
        let d = toy_dataset();
        let w = [0.0; 4];
        assert!(matches!(
            train(&ConfigPoint::tree(2, 1), &d, Some(&w), None),
            Err(Error::AllZeroWeights)
        ));
    }

    #[test]
    fn target_override_is_used() {
        let d = toy_dataset();
        let flipped = [1, 1, 0, 0];
        let m = train(&ConfigPoint::tree(2, 1), &d, None, Some(&flipped)).unwrap();
        assert_eq!(m.predict(&d.features, 0.5).unwrap(), flipped.to_vec());
    }

    #[test]
    fn tree_reweighting_scale_invariance() {
        let d = toy_dataset();
        let w1 = [1.0, 2.0, 1.0, 2.0];
        let w2 = [2.5, 5.0, 2.5, 5.0];
        let m1 = train(&ConfigPoint::tree(3, 1), &d, Some(&w1), None).unwrap();
        let m2 = train(&ConfigPoint::tree(3, 1), &d, Some(&w2), None).unwrap();
        let s1 = m1.predict_scores(&d.features).unwrap();
        let s2 = m2.predict_scores(&d.features).unwrap();
        for (a, b) in s1.iter().zip(&s2) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn proxy_cost_monotone_in_estimators() {
        let mut prev = 0.0;
        for e in [4, 8, 64, 512] {
            let c = ConfigPoint::gbt(e, 0.1, 3, 2);
            let cost = proxy_cost(&c);
            assert!(cost > prev);
            prev = cost;
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let d = toy_dataset();
        let m = train(&ConfigPoint::logistic(1e-3, 50), &d, None, None).unwrap();
        let wrong = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]);
        assert!(matches!(
            m.predict_scores(&wrong),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
