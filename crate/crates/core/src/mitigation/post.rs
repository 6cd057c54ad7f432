//! Threshold post-processing: train the base model once, then pick
//! per-group decision rules over a resolution-r grid. Demographic parity
//! uses one deterministic threshold per group with selection rates matched
//! within delta; equalized odds uses per-group randomized mixtures of two
//! thresholds with TPR and FPR gaps within delta. Rules are fitted on
//! training data only.

use std::collections::HashMap;

use crate::dataset::Dataset;
use crate::error::Result;
use crate::fairness::{cell_rates, disparity_for, FairnessSpec, Metric};
use crate::learners::{train, ConfigPoint, GroupRule, ModelCore, TrainedModel};
use crate::mitigation::{MitigationOutcome, SLACK_NU};

const TOL: f64 = 1e-9;

/// Threshold grid {0, r, 2r, ...} plus the endpoint 1.0.
pub(crate) fn threshold_grid(resolution: f64) -> Vec<f64> {
    let mut ts = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * resolution;
        if t > 1.0 + TOL {
            break;
        }
        ts.push(t.min(1.0));
        k += 1;
    }
    if *ts.last().unwrap() < 1.0 - TOL {
        ts.push(1.0);
    }
    ts
}

fn group_rows(groups: &[usize], g: usize) -> Vec<usize> {
    (0..groups.len()).filter(|&i| groups[i] == g).collect()
}

/// Per-threshold statistics for one group.
struct ThresholdStat {
    threshold: f64,
    selection: f64,
    correct: f64,
}

fn dp_stats(scores: &[f64], labels: &[u8], rows: &[usize], ts: &[f64]) -> Vec<ThresholdStat> {
    ts.iter()
        .map(|&t| {
            let mut sel = 0usize;
            let mut correct = 0usize;
            for &i in rows {
                let d = u8::from(scores[i] >= t);
                sel += usize::from(d == 1);
                correct += usize::from(d == labels[i]);
            }
            ThresholdStat {
                threshold: t,
                selection: sel as f64 / rows.len() as f64,
                correct: correct as f64,
            }
        })
        .collect()
}

/// Deterministic per-group thresholds with selection rates matched within
/// delta, maximizing total training accuracy. Returns the rules and whether
/// a constraint-satisfying grid point existed.
pub(crate) fn fit_dp_rules(
    scores: &[f64],
    labels: &[u8],
    groups: &[usize],
    group_count: usize,
    delta: f64,
    resolution: f64,
) -> (Vec<GroupRule>, bool) {
    let ts = threshold_grid(resolution);
    let stats: Vec<Vec<ThresholdStat>> = (0..group_count)
        .map(|g| dp_stats(scores, labels, &group_rows(groups, g), &ts))
        .collect();

    if group_count == 2 {
        let mut best_ok: Option<(f64, [usize; 2])> = None;
        let mut best_any: Option<(f64, f64, [usize; 2])> = None;
        for (i, a) in stats[0].iter().enumerate() {
            for (j, b) in stats[1].iter().enumerate() {
                let gap = (a.selection - b.selection).abs();
                let correct = a.correct + b.correct;
                if gap <= delta + TOL && best_ok.map_or(true, |(c, _)| correct > c) {
                    best_ok = Some((correct, [i, j]));
                }
                let better_any = match best_any {
                    None => true,
                    Some((g0, c0, _)) => gap < g0 - TOL || (gap <= g0 + TOL && correct > c0),
                };
                if better_any {
                    best_any = Some((gap, correct, [i, j]));
                }
            }
        }
        let met = best_ok.is_some();
        let pick = best_ok
            .map(|(_, p)| p)
            .unwrap_or_else(|| best_any.unwrap().2);
        let rules = vec![
            GroupRule::Threshold(stats[0][pick[0]].threshold),
            GroupRule::Threshold(stats[1][pick[1]].threshold),
        ];
        return (rules, met);
    }

    // Multi-group: anchor the target rate on group 0's grid and hold every
    // group within delta/2 of it, so pairwise gaps stay within delta.
    let mut best_ok: Option<(f64, Vec<usize>)> = None;
    let mut best_any: Option<(f64, f64, Vec<usize>)> = None;
    for (i0, anchor) in stats[0].iter().enumerate() {
        let target = anchor.selection;
        let mut picks = vec![i0];
        let mut feasible = true;
        for stat in stats.iter().skip(1) {
            let mut best: Option<(f64, usize)> = None;
            for (j, s) in stat.iter().enumerate() {
                if (s.selection - target).abs() <= delta / 2.0 + TOL
                    && best.map_or(true, |(c, _)| s.correct > c)
                {
                    best = Some((s.correct, j));
                }
            }
            match best {
                Some((_, j)) => picks.push(j),
                None => {
                    feasible = false;
                    // Nearest-rate fallback pick for the violation route.
                    let j = stat
                        .iter()
                        .enumerate()
                        .min_by(|(_, a), (_, b)| {
                            (a.selection - target)
                                .abs()
                                .total_cmp(&(b.selection - target).abs())
                                .then(b.correct.total_cmp(&a.correct))
                        })
                        .map(|(j, _)| j)
                        .unwrap();
                    picks.push(j);
                }
            }
        }
        let rates: Vec<f64> = picks
            .iter()
            .zip(&stats)
            .map(|(&j, s)| s[j].selection)
            .collect();
        let gap = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - rates.iter().cloned().fold(f64::INFINITY, f64::min);
        let correct: f64 = picks.iter().zip(&stats).map(|(&j, s)| s[j].correct).sum();
        if feasible && best_ok.as_ref().map_or(true, |(c, _)| correct > *c) {
            best_ok = Some((correct, picks.clone()));
        }
        let better_any = match &best_any {
            None => true,
            Some((g0, c0, _)) => gap < g0 - TOL || (gap <= g0 + TOL && correct > *c0),
        };
        if better_any {
            best_any = Some((gap, correct, picks));
        }
    }
    let met = best_ok.is_some();
    let picks = best_ok
        .map(|(_, p)| p)
        .unwrap_or_else(|| best_any.unwrap().2);
    let rules = picks
        .iter()
        .zip(&stats)
        .map(|(&j, s)| GroupRule::Threshold(s[j].threshold))
        .collect();
    (rules, met)
}

/// One candidate operating point for a group: a (possibly randomized)
/// two-threshold rule with its expected confusion rates.
struct OpPoint {
    fpr: f64,
    tpr: f64,
    correct: f64,
    rule: GroupRule,
}

fn eo_candidates(
    scores: &[f64],
    labels: &[u8],
    rows: &[usize],
    ts: &[f64],
    resolution: f64,
) -> Vec<OpPoint> {
    let n_pos = rows.iter().filter(|&&i| labels[i] == 1).count().max(1) as f64;
    let n_neg = rows.iter().filter(|&&i| labels[i] == 0).count().max(1) as f64;
    let per_threshold: Vec<(f64, f64, f64)> = ts
        .iter()
        .map(|&t| {
            let mut tp = 0.0;
            let mut fp = 0.0;
            let mut correct = 0.0;
            for &i in rows {
                let d = scores[i] >= t;
                if labels[i] == 1 {
                    tp += f64::from(d);
                } else {
                    fp += f64::from(d);
                }
                correct += f64::from(u8::from(d) == labels[i]);
            }
            (fp / n_neg, tp / n_pos, correct)
        })
        .collect();

    let weights = threshold_grid(resolution);
    let q = resolution / 2.0;
    let bucket = |v: f64| (v / q).round() as i64;
    let mut best: HashMap<(i64, i64), OpPoint> = HashMap::new();
    let mut push = |fpr: f64, tpr: f64, correct: f64, rule: GroupRule| {
        let key = (bucket(fpr), bucket(tpr));
        match best.get(&key) {
            Some(p) if p.correct >= correct => {}
            _ => {
                best.insert(
                    key,
                    OpPoint {
                        fpr,
                        tpr,
                        correct,
                        rule,
                    },
                );
            }
        }
    };
    for (i, &(f1, t1, c1)) in per_threshold.iter().enumerate() {
        push(f1, t1, c1, GroupRule::Threshold(ts[i]));
        for (j, &(f2, t2, c2)) in per_threshold.iter().enumerate().skip(i + 1) {
            for &w in &weights {
                if w <= TOL || w >= 1.0 - TOL {
                    continue; // endpoints are the singleton rules
                }
                push(
                    w * f1 + (1.0 - w) * f2,
                    w * t1 + (1.0 - w) * t2,
                    w * c1 + (1.0 - w) * c2,
                    GroupRule::Randomized {
                        low: ts[i],
                        high: ts[j],
                        weight: w,
                    },
                );
            }
        }
    }
    let mut out: Vec<((i64, i64), OpPoint)> = best.into_iter().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out.into_iter().map(|(_, p)| p).collect()
}

fn chebyshev(a: &OpPoint, b: &OpPoint) -> f64 {
    (a.fpr - b.fpr).abs().max((a.tpr - b.tpr).abs())
}

/// Per-group randomized threshold rules with TPR and FPR gaps within delta,
/// maximizing expected training accuracy over the candidate grid.
pub(crate) fn fit_eo_rules(
    scores: &[f64],
    labels: &[u8],
    groups: &[usize],
    group_count: usize,
    delta: f64,
    resolution: f64,
) -> Result<(Vec<GroupRule>, bool)> {
    // Every (group, label) cell must be populated.
    let unit = vec![1.0; scores.len()];
    cell_rates(&unit, labels, groups)?;
    let ts = threshold_grid(resolution);
    let cands: Vec<Vec<OpPoint>> = (0..group_count)
        .map(|g| eo_candidates(scores, labels, &group_rows(groups, g), &ts, resolution))
        .collect();

    if group_count == 2 {
        let mut best_ok: Option<(f64, [usize; 2])> = None;
        let mut best_any: Option<(f64, f64, [usize; 2])> = None;
        for (i, a) in cands[0].iter().enumerate() {
            for (j, b) in cands[1].iter().enumerate() {
                let gap = chebyshev(a, b);
                let correct = a.correct + b.correct;
                if gap <= delta + TOL && best_ok.map_or(true, |(c, _)| correct > c) {
                    best_ok = Some((correct, [i, j]));
                }
                let better_any = match best_any {
                    None => true,
                    Some((g0, c0, _)) => gap < g0 - TOL || (gap <= g0 + TOL && correct > c0),
                };
                if better_any {
                    best_any = Some((gap, correct, [i, j]));
                }
            }
        }
        let met = best_ok.is_some();
        let pick = best_ok
            .map(|(_, p)| p)
            .unwrap_or_else(|| best_any.unwrap().2);
        return Ok((
            vec![cands[0][pick[0]].rule.clone(), cands[1][pick[1]].rule.clone()],
            met,
        ));
    }

    // Multi-group: targets from group 0's candidates, everyone within a
    // delta/2 box so pairwise gaps stay within delta.
    let mut best_ok: Option<(f64, Vec<usize>)> = None;
    let mut best_any: Option<(f64, f64, Vec<usize>)> = None;
    for (i0, target) in cands[0].iter().enumerate() {
        let mut picks = vec![i0];
        let mut feasible = true;
        for cand in cands.iter().skip(1) {
            let ok = cand
                .iter()
                .enumerate()
                .filter(|(_, p)| chebyshev(p, target) <= delta / 2.0 + TOL)
                .max_by(|(_, a), (_, b)| a.correct.total_cmp(&b.correct));
            match ok {
                Some((j, _)) => picks.push(j),
                None => {
                    feasible = false;
                    let j = cand
                        .iter()
                        .enumerate()
                        .min_by(|(_, a), (_, b)| {
                            chebyshev(a, target)
                                .total_cmp(&chebyshev(b, target))
                                .then(b.correct.total_cmp(&a.correct))
                        })
                        .map(|(j, _)| j)
                        .unwrap();
                    picks.push(j);
                }
            }
        }
        let mut gap = 0.0f64;
        for (gi, &pi) in picks.iter().enumerate() {
            for (gj, &pj) in picks.iter().enumerate().skip(gi + 1) {
                gap = gap.max(chebyshev(&cands[gi][pi], &cands[gj][pj]));
            }
        }
        let correct: f64 = picks.iter().zip(&cands).map(|(&j, c)| c[j].correct).sum();
        if feasible && best_ok.as_ref().map_or(true, |(c, _)| correct > *c) {
            best_ok = Some((correct, picks.clone()));
        }
        let better_any = match &best_any {
            None => true,
            Some((g0, c0, _)) => gap < g0 - TOL || (gap <= g0 + TOL && correct > *c0),
        };
        if better_any {
            best_any = Some((gap, correct, picks));
        }
    }
    let met = best_ok.is_some();
    let picks = best_ok
        .map(|(_, p)| p)
        .unwrap_or_else(|| best_any.unwrap().2);
    Ok((
        picks
            .iter()
            .zip(&cands)
            .map(|(&j, c)| c[j].rule.clone())
            .collect(),
        met,
    ))
}

pub fn threshold_postprocess(
    c: &ConfigPoint,
    d_train: &Dataset,
    spec: &FairnessSpec,
    resolution: f64,
) -> Result<MitigationOutcome> {
    let base = train(c, d_train, None, None)?;
    let scores = base.predict_scores(&d_train.features)?;
    let k = d_train.group_count();
    let (rules, _grid_met) = match spec.metric {
        Metric::Dp => fit_dp_rules(
            &scores,
            &d_train.labels,
            &d_train.sensitive,
            k,
            spec.delta,
            resolution,
        ),
        Metric::Eo => fit_eo_rules(
            &scores,
            &d_train.labels,
            &d_train.sensitive,
            k,
            spec.delta,
            resolution,
        )?,
    };
    let model = TrainedModel {
        core: ModelCore::GroupThreshold {
            base: Box::new(base.core),
            rules,
        },
        learner: c.learner,
        mitigated: true,
        degenerate: base.degenerate,
        features: d_train.features.cols(),
    };
    let decisions = model.expected_decisions(&d_train.features, Some(&d_train.sensitive))?;
    let train_violation = disparity_for(
        spec.metric,
        &decisions,
        &d_train.labels,
        &d_train.sensitive,
    )?;
    Ok(MitigationOutcome {
        met_constraint: train_violation <= spec.delta + SLACK_NU,
        model,
        train_violation,
        oracle_calls: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_resolution_gives_three_thresholds() {
        assert_eq!(threshold_grid(0.5), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn dp_rules_hit_the_median_split() {
        // Group a scores (0.9, 0.7, 0.4, 0.1), group b (0.8, 0.6, 0.3, 0.2);
        // labels reward selecting the top two of each group. The optimal
        // matched rule selects 2 per group: selection rates (0.5, 0.5),
        // demographic-parity difference 0.
        let scores = [0.9, 0.7, 0.4, 0.1, 0.8, 0.6, 0.3, 0.2];
        let labels = [1, 1, 0, 0, 1, 1, 0, 0];
        let groups = [0, 0, 0, 0, 1, 1, 1, 1];
        let (rules, met) = fit_dp_rules(&scores, &labels, &groups, 2, 0.05, 0.1);
        assert!(met);
        let decide = |s: f64, g: usize| match &rules[g] {
            GroupRule::Threshold(t) => u8::from(s >= *t),
            _ => unreachable!(),
        };
        let sel_a: u8 = scores[..4].iter().map(|&s| decide(s, 0)).sum();
        let sel_b: u8 = scores[4..].iter().map(|&s| decide(s, 1)).sum();
        assert_eq!(sel_a, 2);
        assert_eq!(sel_b, 2);
    }
}
