//! Shared machinery for reduction-based mitigation: the signed constraint
//! system over group rates and the cost-sensitive best-response oracle.

use crate::dataset::Dataset;
use crate::error::Result;
use crate::fairness::{cell_rates, Metric};
use crate::learners::{train, ConfigPoint, TrainedModel};

/// One constraint axis. For demographic parity, axis g carries the per-row
/// gradient factor of mean(h | g) - mean(h); for equalized odds the same
/// conditioned on a label value, with within-label group fractions. The
/// uniform 1/n normalization is dropped consistently with the unit
/// classification costs, so factors are directly comparable to them.
pub(crate) struct Axis {
    pub factors: Vec<f64>,
    /// Rows participating in the axis mean (n for DP, n_y for EO).
    pub denom: f64,
}

pub(crate) struct ConstraintSet {
    pub axes: Vec<Axis>,
}

impl ConstraintSet {
    pub fn for_spec(metric: Metric, d: &Dataset) -> Result<ConstraintSet> {
        let n = d.rows();
        let k = d.group_count();
        let sizes = d.group_sizes();
        let mut axes = Vec::new();
        match metric {
            Metric::Dp => {
                for g in 0..k {
                    let p = sizes[g] as f64 / n as f64;
                    let factors = d
                        .sensitive
                        .iter()
                        .map(|&gi| if gi == g { 1.0 / p - 1.0 } else { -1.0 })
                        .collect();
                    axes.push(Axis {
                        factors,
                        denom: n as f64,
                    });
                }
            }
            Metric::Eo => {
                // Validates every (group, label) cell up front.
                let unit: Vec<f64> = vec![1.0; n];
                cell_rates(&unit, &d.labels, &d.sensitive)?;
                for y in 0..2u8 {
                    let n_y = d.labels.iter().filter(|&&l| l == y).count() as f64;
                    for g in 0..k {
                        let n_gy = (0..n)
                            .filter(|&i| d.labels[i] == y && d.sensitive[i] == g)
                            .count() as f64;
                        let p = n_gy / n_y;
                        let factors = (0..n)
                            .map(|i| {
                                if d.labels[i] != y {
                                    0.0
                                } else if d.sensitive[i] == g {
                                    1.0 / p - 1.0
                                } else {
                                    -1.0
                                }
                            })
                            .collect();
                        axes.push(Axis {
                            factors,
                            denom: n_y,
                        });
                    }
                }
            }
        }
        Ok(ConstraintSet { axes })
    }

    /// Signed axis values for expected decisions `s`:
    /// mean(s | axis group) - mean(s | axis condition).
    pub fn axis_values(&self, s: &[f64]) -> Vec<f64> {
        self.axes
            .iter()
            .map(|a| {
                let dot: f64 = a.factors.iter().zip(s).map(|(f, v)| f * v).sum();
                dot / a.denom
            })
            .collect()
    }

    /// Per-example cost adjustment for signed multiplier differences
    /// (lambda_plus - lambda_minus per axis).
    pub fn adjustments(&self, lambda_diff: &[f64]) -> Vec<f64> {
        let n = self.axes.first().map_or(0, |a| a.factors.len());
        let mut adj = vec![0.0; n];
        for (a, ld) in self.axes.iter().zip(lambda_diff) {
            if *ld == 0.0 {
                continue;
            }
            for (out, f) in adj.iter_mut().zip(&a.factors) {
                *out += ld * f;
            }
        }
        adj
    }
}

/// Cost-sensitive best response: predicting 1 on example i costs
/// 1{y_i = 0} + adj_i, predicting 0 costs 1{y_i = 1}. The oracle trains on
/// weights |cost1 - cost0| with targets 1{cost1 < cost0}. With all
/// adjustments zero this is exactly plain training.
pub(crate) fn best_response(
    c: &ConfigPoint,
    d: &Dataset,
    adjustments: &[f64],
) -> Result<TrainedModel> {
    let n = d.rows();
    let mut weights = vec![0.0; n];
    let mut targets = vec![0u8; n];
    for i in 0..n {
        let cost1 = f64::from(d.labels[i] == 0) + adjustments[i];
        let cost0 = f64::from(d.labels[i] == 1);
        weights[i] = (cost1 - cost0).abs();
        targets[i] = u8::from(cost1 < cost0);
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        // Every example is cost-indifferent; any classifier is optimal.
        return train(c, d, None, None);
    }
    train(c, d, Some(&weights), Some(&targets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn dataset(groups: Vec<usize>, labels: Vec<u8>) -> Dataset {
        let rows: Vec<Vec<f64>> = labels.iter().map(|&y| vec![f64::from(y)]).collect();
        Dataset {
            features: Matrix::from_rows(&rows),
            feature_names: vec!["x".into()],
            labels,
            sensitive: groups,
            group_names: vec!["a".into(), "b".into()],
        }
    }

    #[test]
    fn dp_adjustment_hand_value() {
        // Two equal groups (p_a = 0.5), lambda difference 0.2 on group a's
        // axis: group-a rows get +0.2 * (1/0.5 - 1) = +0.2, group-b rows get
        // 0.2 * (0 - 1) = -0.2.
        let d = dataset(vec![0, 0, 1, 1], vec![0, 1, 0, 1]);
        let cs = ConstraintSet::for_spec(Metric::Dp, &d).unwrap();
        let adj = cs.adjustments(&[0.2, 0.0]);
        assert!((adj[0] - 0.2).abs() < 1e-15);
        assert!((adj[1] - 0.2).abs() < 1e-15);
        assert!((adj[2] + 0.2).abs() < 1e-15);
        assert!((adj[3] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn axis_values_match_rate_gaps() {
        let d = dataset(vec![0, 0, 1, 1], vec![0, 1, 0, 1]);
        let cs = ConstraintSet::for_spec(Metric::Dp, &d).unwrap();
        // Decisions select group a only: mean|a = 1, overall = 0.5.
        let vals = cs.axis_values(&[1.0, 1.0, 0.0, 0.0]);
        assert!((vals[0] - 0.5).abs() < 1e-15);
        assert!((vals[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_adjustments_reproduce_plain_training() {
        // With all multipliers zero, cost1 - cost0 = 1{y=0} - 1{y=1}: unit
        // weights and targets equal to the labels.
        let d = dataset(vec![0, 1, 0, 1], vec![0, 0, 1, 1]);
        let adj = vec![0.0; 4];
        let n = d.rows();
        for i in 0..n {
            let cost1 = f64::from(d.labels[i] == 0) + adj[i];
            let cost0 = f64::from(d.labels[i] == 1);
            assert_eq!((cost1 - cost0).abs(), 1.0);
            assert_eq!(u8::from(cost1 < cost0), d.labels[i]);
        }
    }

    #[test]
    fn eo_axes_require_full_cells() {
        // Group 1 has no y=1 rows.
        let d = dataset(vec![0, 0, 1, 1], vec![0, 1, 0, 0]);
        assert!(ConstraintSet::for_spec(Metric::Eo, &d).is_err());
    }
}
