//! Group-fairness assessment: disparity functions for demographic parity and
//! equalized odds, the threshold indicator, and the validation loss metric.
//!
//! All metrics take *expected* decisions in [0,1], so randomized classifiers
//! are evaluated in expectation rather than by sampling. Multi-group
//! disparities are the maximum pairwise gap, which reduces to the standard
//! two-group definition.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learners::TrainedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Dp,
    Eo,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Dp => write!(f, "dp"),
            Metric::Eo => write!(f, "eo"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dp" => Ok(Metric::Dp),
            "eo" => Ok(Metric::Eo),
            other => Err(Error::BadRunParam(format!(
                "unknown metric '{other}' (expected dp|eo)"
            ))),
        }
    }
}

/// Metric kind, sensitive attribute name, and disparity threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FairnessSpec {
    pub metric: Metric,
    pub sensitive_attr: String,
    pub delta: f64,
}

impl FairnessSpec {
    /// Commonly used mild threshold.
    pub const DELTA_MILD: f64 = 0.05;
    /// Commonly used harsh threshold.
    pub const DELTA_HARSH: f64 = 0.01;

    pub fn new(metric: Metric, sensitive_attr: &str, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::BadDelta(delta));
        }
        Ok(FairnessSpec {
            metric,
            sensitive_attr: sensitive_attr.to_string(),
            delta,
        })
    }
}

/// Assessment output: the disparity, the inclusive threshold indicator, and
/// the per-group rates behind it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FairnessReport {
    pub disparity: f64,
    pub fair: bool,
    pub selection_rates: Vec<f64>,
    pub tpr: Option<Vec<f64>>,
    pub fpr: Option<Vec<f64>>,
}

fn group_count_of(groups: &[usize]) -> usize {
    groups.iter().copied().max().map_or(0, |g| g + 1)
}

/// Mean expected decision per group; errors on an empty group.
pub(crate) fn group_means(decisions: &[f64], groups: &[usize]) -> Result<Vec<f64>> {
    if decisions.len() != groups.len() {
        return Err(Error::LengthMismatch(
            "decisions and groups must have equal length".into(),
        ));
    }
    let k = group_count_of(groups);
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (d, &g) in decisions.iter().zip(groups) {
        sums[g] += d;
        counts[g] += 1;
    }
    sums.iter()
        .zip(&counts)
        .enumerate()
        .map(|(g, (s, &c))| {
            if c == 0 {
                Err(Error::EmptyGroup { group: g })
            } else {
                Ok(s / c as f64)
            }
        })
        .collect()
}

fn spread(rates: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &r in rates {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (hi - lo).max(0.0)
}

/// Demographic-parity difference: max over group pairs of the absolute gap
/// in mean expected decision.
pub fn dp_difference(decisions: &[f64], groups: &[usize]) -> Result<f64> {
    Ok(spread(&group_means(decisions, groups)?))
}

/// Per-(group, label) mean expected decision; row y=1 gives TPRs, row y=0
/// gives FPRs. Errors name the first empty cell.
pub(crate) fn cell_rates(
    decisions: &[f64],
    labels: &[u8],
    groups: &[usize],
) -> Result<[Vec<f64>; 2]> {
    if decisions.len() != labels.len() || labels.len() != groups.len() {
        return Err(Error::LengthMismatch(
            "decisions, labels, groups must have equal length".into(),
        ));
    }
    let k = group_count_of(groups);
    let mut sums = [vec![0.0; k], vec![0.0; k]];
    let mut counts = [vec![0usize; k], vec![0usize; k]];
    for i in 0..decisions.len() {
        let y = usize::from(labels[i] > 0);
        sums[y][groups[i]] += decisions[i];
        counts[y][groups[i]] += 1;
    }
    let mut out = [vec![0.0; k], vec![0.0; k]];
    for y in 0..2 {
        for g in 0..k {
            if counts[y][g] == 0 {
                return Err(Error::EmptyCell {
                    group: g,
                    label: y as u8,
                });
            }
            out[y][g] = sums[y][g] / counts[y][g] as f64;
        }
    }
    Ok(out)
}

/// Equalized-odds difference: max over both label values and group pairs of
/// the conditional decision-rate gap.
pub fn eo_difference(decisions: &[f64], labels: &[u8], groups: &[usize]) -> Result<f64> {
    let rates = cell_rates(decisions, labels, groups)?;
    Ok(spread(&rates[0]).max(spread(&rates[1])))
}

pub(crate) fn disparity_for(
    metric: Metric,
    decisions: &[f64],
    labels: &[u8],
    groups: &[usize],
) -> Result<f64> {
    match metric {
        Metric::Dp => dp_difference(decisions, groups),
        Metric::Eo => eo_difference(decisions, labels, groups),
    }
}

/// Evaluate the fairness indicator of a model on a dataset. The boundary is
/// inclusive: `fair` holds iff disparity <= delta.
pub fn assess(model: &TrainedModel, d: &Dataset, spec: &FairnessSpec) -> Result<FairnessReport> {
    let decisions = model.expected_decisions(&d.features, Some(&d.sensitive))?;
    let selection_rates = group_means(&decisions, &d.sensitive)?;
    let (disparity, tpr, fpr) = match spec.metric {
        Metric::Dp => (spread(&selection_rates), None, None),
        Metric::Eo => {
            let rates = cell_rates(&decisions, &d.labels, &d.sensitive)?;
            let disparity = spread(&rates[0]).max(spread(&rates[1]));
            (disparity, Some(rates[1].clone()), Some(rates[0].clone()))
        }
    };
    Ok(FairnessReport {
        disparity,
        fair: disparity <= spec.delta,
        selection_rates,
        tpr,
        fpr,
    })
}

/// Validation loss: one minus expected accuracy of the expected decisions;
/// reduces to 1 - accuracy for deterministic models.
pub fn loss(model: &TrainedModel, d: &Dataset) -> Result<f64> {
    let decisions = model.expected_decisions(&d.features, Some(&d.sensitive))?;
    Ok(expected_loss(&decisions, &d.labels))
}

/// Same loss on precomputed expected decisions.
pub(crate) fn expected_loss(decisions: &[f64], labels: &[u8]) -> f64 {
    let n = decisions.len();
    if n == 0 {
        return 0.0;
    }
    let correct: f64 = decisions
        .iter()
        .zip(labels)
        .map(|(s, &y)| if y == 1 { *s } else { 1.0 - *s })
        .sum();
    1.0 - correct / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{ModelCore, TrainedModel};
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    #[test]
    fn dp_worked_example() {
        // Group a decisions (1,1,0,1), group b (0,1,0,0): |0.75 - 0.25| = 0.5.
        let decisions = [1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0];
        let groups = [0, 0, 0, 0, 1, 1, 1, 1];
        assert_eq!(dp_difference(&decisions, &groups).unwrap(), 0.5);
    }

    #[test]
    fn dp_identical_rates_are_zero() {
        let decisions = [1.0, 0.0, 1.0, 0.0];
        let groups = [0, 0, 1, 1];
        assert_eq!(dp_difference(&decisions, &groups).unwrap(), 0.0);
    }

    #[test]
    fn dp_fractional_decisions() {
        let decisions = [0.5, 0.5, 0.5, 0.5];
        let groups = [0, 0, 1, 1];
        assert_eq!(dp_difference(&decisions, &groups).unwrap(), 0.0);
    }

    #[test]
    fn dp_empty_group_is_reported() {
        let decisions = [1.0, 0.0];
        let groups = [0, 2];
        assert!(matches!(
            dp_difference(&decisions, &groups),
            Err(Error::EmptyGroup { group: 1 })
        ));
    }

    #[test]
    fn eo_worked_example() {
        // Group a: y=1 decisions (1,1,0) TPR 2/3, y=0 decisions (0,1) FPR 1/2.
        // Group b: y=1 (1,0) TPR 1/2, y=0 (0,0) FPR 0. max(1/6, 1/2) = 0.5.
        let decisions = [1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let labels = [1, 1, 1, 0, 0, 1, 1, 0, 0];
        let groups = [0, 0, 0, 0, 0, 1, 1, 1, 1];
        let d = eo_difference(&decisions, &labels, &groups).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eo_perfect_classifier_is_zero() {
        let labels = [0, 1, 0, 1, 1, 0];
        let decisions: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();
        let groups = [0, 0, 1, 1, 0, 1];
        assert_eq!(eo_difference(&decisions, &labels, &groups).unwrap(), 0.0);
    }

    #[test]
    fn eo_empty_cell_is_named() {
        // Group 1 has no y=1 rows.
        let decisions = [1.0, 0.0, 1.0, 0.0];
        let labels = [1, 0, 0, 0];
        let groups = [0, 0, 1, 1];
        match eo_difference(&decisions, &labels, &groups) {
            Err(Error::EmptyCell { group: 1, label: 1 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    fn constant_model(score: f64) -> TrainedModel {
        TrainedModel {
            core: ModelCore::Constant { score },
            learner: crate::learners::LearnerKind::Logistic,
            mitigated: false,
            degenerate: false,
            features: 1,
        }
    }

    fn two_group_dataset(labels: Vec<u8>) -> Dataset {
        let rows: Vec<Vec<f64>> = labels.iter().map(|&y| vec![f64::from(y)]).collect();
        let n = labels.len();
        Dataset {
            features: Matrix::from_rows(&rows),
            feature_names: vec!["x".into()],
            sensitive: (0..n).map(|i| i % 2).collect(),
            labels,
            group_names: vec!["a".into(), "b".into()],
        }
    }

    #[test]
    fn assess_boundary_is_inclusive() {
        let spec = FairnessSpec::new(Metric::Dp, "s", 0.05).unwrap();
        // Disparity 0 <= 0.05.
        let d = two_group_dataset(vec![0, 1, 0, 1]);
        let m = constant_model(1.0);
        let rep = assess(&m, &d, &spec).unwrap();
        assert_eq!(rep.disparity, 0.0);
        assert!(rep.fair);
        // Direct indicator checks at the boundary.
        assert!(0.05 <= spec.delta);
        assert!(!(0.0501 <= spec.delta));
        assert!(0.03 <= spec.delta);
    }

    #[test]
    fn spec_rejects_bad_delta() {
        assert!(matches!(
            FairnessSpec::new(Metric::Dp, "s", 1.5),
            Err(Error::BadDelta(_))
        ));
        assert!(FairnessSpec::new(Metric::Dp, "s", FairnessSpec::DELTA_HARSH).is_ok());
    }

    #[test]
    fn loss_examples() {
        // 8 of 10 deterministic decisions correct -> 0.2.
        let decisions = [1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let labels = [1, 1, 1, 1, 1, 0, 0, 0, 0, 1];
        assert!((expected_loss(&decisions, &labels) - 0.2).abs() < 1e-15);
        // Perfect deterministic model -> 0.
        let perfect: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();
        assert_eq!(expected_loss(&perfect, &labels), 0.0);
        // Single row, y=1, expected decision 0.7 -> 0.3.
        assert!((expected_loss(&[0.7], &[1]) - 0.3).abs() < 1e-15);
    }

    /// Brute-force reference: explicit per-group lists and pairwise scans.
    fn dp_brute(decisions: &[f64], groups: &[usize]) -> f64 {
        let k = groups.iter().copied().max().unwrap() + 1;
        let mut best: f64 = 0.0;
        for g in 0..k {
            for h in 0..k {
                let gd: Vec<f64> = decisions
                    .iter()
                    .zip(groups)
                    .filter(|(_, &gg)| gg == g)
                    .map(|(d, _)| *d)
                    .collect();
                let hd: Vec<f64> = decisions
                    .iter()
                    .zip(groups)
                    .filter(|(_, &gg)| gg == h)
                    .map(|(d, _)| *d)
                    .collect();
                let gm = gd.iter().sum::<f64>() / gd.len() as f64;
                let hm = hd.iter().sum::<f64>() / hd.len() as f64;
                best = best.max((gm - hm).abs());
            }
        }
        best
    }

    proptest! {
        #[test]
        fn dp_matches_brute_force(
            n in 4usize..40,
            k in 2usize..4,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut groups: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
            let decisions: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=1) as f64).collect();
            let got = dp_difference(&decisions, &groups).unwrap();
            prop_assert!((got - dp_brute(&decisions, &groups)).abs() < 1e-12);
            // Invariance under permutation of group labels.
            for g in groups.iter_mut() {
                *g = k - 1 - *g;
            }
            let relabeled = dp_difference(&decisions, &groups).unwrap();
            prop_assert!((got - relabeled).abs() < 1e-12);
        }

        #[test]
        fn eo_bounds_hold(n in 8usize..40, seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // Force every (group, label) cell non-empty.
            let mut groups = vec![0, 0, 1, 1];
            let mut labels = vec![0u8, 1, 0, 1];
            for _ in 4..n {
                groups.push(rng.gen_range(0..2));
                labels.push(rng.gen_range(0..2) as u8);
            }
            let decisions: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let d = eo_difference(&decisions, &labels, &groups).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
