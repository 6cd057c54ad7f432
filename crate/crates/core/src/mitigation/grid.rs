//! Grid-search reduction: enumerate multiplier settings on a symmetric grid
//! along the signed constraint axis (one axis for demographic parity, a
//! two-axis label-conditioned grid for equalized odds), train the
//! cost-sensitive best response at each point, and keep the best qualifying
//! model. Binary sensitive attributes only.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fairness::{disparity_for, expected_loss, FairnessSpec, Metric};
use crate::learners::{ConfigPoint, TrainedModel};
use crate::mitigation::reduction::{best_response, ConstraintSet};
use crate::mitigation::{MitigationOutcome, SLACK_NU};

/// Symmetric grid of `size` points over [-bound, bound]; `size` is odd so 0
/// is the exact middle point (zero-multiplier identity).
pub(crate) fn grid_points(size: usize, bound: f64) -> Vec<f64> {
    let step = 2.0 * bound / (size - 1) as f64;
    let mut points: Vec<f64> = (0..size).map(|i| -bound + i as f64 * step).collect();
    points[(size - 1) / 2] = 0.0;
    points
}

pub fn grid_reduce(
    c: &ConfigPoint,
    d_train: &Dataset,
    spec: &FairnessSpec,
    grid_size: usize,
    bound: f64,
) -> Result<MitigationOutcome> {
    if d_train.group_count() != 2 {
        return Err(Error::NonBinaryAttribute(d_train.group_count()));
    }
    let cs = ConstraintSet::for_spec(spec.metric, d_train)?;
    let points = grid_points(grid_size, bound);

    // With a binary attribute the two group axes are collinear, so a single
    // signed multiplier per condition spans the whole constraint family.
    // Axis layout: DP -> group0; EO -> (group0 | y=0), (group0 | y=1) at
    // indices 0 and 2.
    let settings: Vec<Vec<f64>> = match spec.metric {
        Metric::Dp => points.iter().map(|&m| vec![m]).collect(),
        Metric::Eo => {
            let mut all = Vec::with_capacity(points.len() * points.len());
            for &m0 in &points {
                for &m1 in &points {
                    all.push(vec![m0, m1]);
                }
            }
            all
        }
    };

    let mut best_ok: Option<(f64, usize)> = None;
    let mut best_any: Option<(f64, usize)> = None;
    let mut kept: Vec<(TrainedModel, f64)> = Vec::with_capacity(settings.len());
    for (idx, setting) in settings.iter().enumerate() {
        let mut lambda_diff = vec![0.0; cs.axes.len()];
        match spec.metric {
            Metric::Dp => lambda_diff[0] = setting[0],
            Metric::Eo => {
                lambda_diff[0] = setting[0];
                lambda_diff[2] = setting[1];
            }
        }
        let adj = cs.adjustments(&lambda_diff);
        let h = best_response(c, d_train, &adj)?;
        let decisions = h.expected_decisions(&d_train.features, Some(&d_train.sensitive))?;
        let disparity =
            disparity_for(spec.metric, &decisions, &d_train.labels, &d_train.sensitive)?;
        let loss = expected_loss(&decisions, &d_train.labels);
        if disparity <= spec.delta + SLACK_NU && best_ok.map_or(true, |(l, _)| loss < l) {
            best_ok = Some((loss, idx));
        }
        if best_any.map_or(true, |(v, _)| disparity < v) {
            best_any = Some((disparity, idx));
        }
        kept.push((h, disparity));
    }

    let met_constraint = best_ok.is_some();
    let chosen = best_ok.or(best_any).map(|(_, i)| i).unwrap_or(0);
    let oracle_calls = settings.len();
    let (mut model, train_violation) = kept.swap_remove(chosen);
    model.mitigated = true;
    Ok(MitigationOutcome {
        model,
        train_violation,
        oracle_calls,
        met_constraint,
    })
}
