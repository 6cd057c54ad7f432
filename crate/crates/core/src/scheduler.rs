//! The per-trial scheduling policy: decide between a fresh hyperparameter
//! suggestion (m = 0) and running unfairness mitigation on the most
//! promising evaluated-but-unfair configuration (m = 1).
//!
//! The decision compares, per mode, the estimated cost of producing a model
//! with a better fair loss (ECF), and gates mitigation on a projected
//! post-mitigation loss beating the best fair loss so far. All statistics
//! are estimated online from the trial history, so a string of failures in
//! one mode raises that mode's estimate and the policy drifts to the other.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hpsearch::{HpSearcher, TrialConfig};

/// One completed trial. `loss` and `disparity` are infinite for failed
/// evaluations, which keeps `fair == (disparity <= delta)` consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub iteration: u64,
    pub config: TrialConfig,
    /// Mitigation flag m.
    pub mitigated: bool,
    /// Resource cost of the trial (always > 0).
    pub cost: f64,
    pub loss: f64,
    pub disparity: f64,
    pub fair: bool,
    pub failed: bool,
}

impl TrialRecord {
    pub fn valid_loss(&self) -> Option<f64> {
        (!self.failed && self.loss.is_finite()).then_some(self.loss)
    }
}

/// Append-only trial log with the derived views the scheduler needs.
#[derive(Debug, Clone, Default)]
pub struct TrialHistory {
    records: Vec<TrialRecord>,
    mitigated_keys: std::collections::HashSet<String>,
}

impl TrialHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TrialRecord) {
        if let Some(last) = self.records.last() {
            assert!(
                record.iteration > last.iteration,
                "iteration indices must be strictly increasing"
            );
        }
        if record.mitigated {
            self.mitigated_keys.insert(record.config.key());
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Unmitigated view H0.
    pub fn h0(&self) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(|r| !r.mitigated)
    }

    /// Mitigated view H1.
    pub fn h1(&self) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(|r| r.mitigated)
    }

    pub fn is_mitigated(&self, key: &str) -> bool {
        self.mitigated_keys.contains(key)
    }

    /// Earliest unmitigated record of a configuration, used for pairing
    /// degradations and cost ratios.
    pub fn base_record(&self, key: &str) -> Option<&TrialRecord> {
        self.h0().find(|r| r.config.key() == key)
    }
}

/// Candidate for mitigation: the lowest-loss evaluated-but-unmitigated
/// configuration that does not satisfy the fairness constraint. Ties break
/// toward the earliest iteration.
pub fn select_candidate(h: &TrialHistory) -> Option<&TrialRecord> {
    static EMPTY: std::sync::OnceLock<std::collections::HashSet<String>> =
        std::sync::OnceLock::new();
    select_candidate_excluding(h, EMPTY.get_or_init(Default::default))
}

/// Same selection with an extra exclusion set (configurations whose
/// mitigation is already in flight on another worker).
pub fn select_candidate_excluding<'h>(
    h: &'h TrialHistory,
    exclude: &std::collections::HashSet<String>,
) -> Option<&'h TrialRecord> {
    h.h0()
        .filter(|r| {
            !r.fair
                && !r.failed
                && !h.is_mitigated(&r.config.key())
                && !exclude.contains(&r.config.key())
        })
        .min_by(|a, b| {
            a.loss
                .total_cmp(&b.loss)
                .then(a.iteration.cmp(&b.iteration))
        })
}

/// Per-mode bookkeeping behind the ECF estimate: total resource, and the
/// resource totals and fair losses at the last two fair-loss improvements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeStats {
    pub resource: f64,
    pub resource_at_best: f64,
    pub resource_at_second: f64,
    pub best_fair_loss: f64,
    pub second_fair_loss: f64,
    pub improvements: usize,
}

impl Default for ModeStats {
    fn default() -> Self {
        ModeStats {
            resource: 0.0,
            resource_at_best: 0.0,
            resource_at_second: 0.0,
            best_fair_loss: f64::INFINITY,
            second_fair_loss: f64::INFINITY,
            improvements: 0,
        }
    }
}

/// ECF state for both modes plus the global best fair loss.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EcfState {
    pub modes: [ModeStats; 2],
    pub best_fair_loss: f64,
}

impl EcfState {
    pub fn new() -> Self {
        EcfState {
            modes: [ModeStats::default(), ModeStats::default()],
            best_fair_loss: f64::INFINITY,
        }
    }

    /// Estimated cost for mode `m` to produce a model with a better fair
    /// loss:
    /// max{R - R_1st, R_1st - R_2nd, 2 (L_1st - L*) / s} with
    /// s = (L_2nd - L_1st) / (R_1st - R_2nd).
    /// Cold starts: an untried mode scores 0; before the second fair
    /// improvement the speed term is omitted and missing resource markers
    /// are 0.
    pub fn ecf(&self, m: usize) -> f64 {
        let s = &self.modes[m];
        if s.resource <= 0.0 {
            return 0.0;
        }
        let t1 = s.resource - s.resource_at_best;
        let t2 = s.resource_at_best - s.resource_at_second;
        let mut value = t1.max(t2);
        if s.improvements >= 2 {
            let gap = s.resource_at_best - s.resource_at_second;
            if gap > 0.0 {
                let speed = (s.second_fair_loss - s.best_fair_loss) / gap;
                if speed > 0.0 && self.best_fair_loss.is_finite() {
                    value = value.max(2.0 * (s.best_fair_loss - self.best_fair_loss) / speed);
                }
            }
        }
        value
    }

    fn observe(&mut self, record: &TrialRecord) {
        let m = usize::from(record.mitigated);
        let stats = &mut self.modes[m];
        stats.resource += record.cost;
        if record.fair && !record.failed && record.loss < stats.best_fair_loss {
            stats.second_fair_loss = stats.best_fair_loss;
            stats.resource_at_second = stats.resource_at_best;
            stats.best_fair_loss = record.loss;
            stats.resource_at_best = stats.resource;
            stats.improvements += 1;
        }
        if record.fair && !record.failed && record.loss < self.best_fair_loss {
            self.best_fair_loss = record.loss;
        }
    }
}

/// Online statistics about past mitigations: loss degradations, cost
/// ratios, and the success rate.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MitigationStats {
    pub degradations: Vec<f64>,
    pub cost_ratios: Vec<f64>,
    pub attempts: usize,
    pub successes: usize,
}

/// Default cost ratio assumed before any mitigation evidence exists;
/// mitigation is commonly an order of magnitude more expensive than plain
/// training.
pub const COLD_START_COST_RATIO: f64 = 10.0;

impl MitigationStats {
    /// Mean loss degradation; 0 with fewer than two observations.
    pub fn eta(&self) -> f64 {
        if self.degradations.len() < 2 {
            return 0.0;
        }
        self.degradations.iter().sum::<f64>() / self.degradations.len() as f64
    }

    /// 95% confidence radius 1.96 sd / sqrt(n) (sample standard deviation);
    /// 0 with fewer than two observations.
    pub fn radius(&self) -> f64 {
        let n = self.degradations.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.eta();
        let var = self
            .degradations
            .iter()
            .map(|d| (d - mean) * (d - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        1.96 * var.sqrt() / (n as f64).sqrt()
    }

    /// Success rate of past mitigations; 1 before any attempt, floored at
    /// 1/(attempts+1) when every attempt failed.
    pub fn q_mitigation(&self) -> f64 {
        if self.attempts == 0 {
            return 1.0;
        }
        if self.successes == 0 {
            return 1.0 / (self.attempts as f64 + 1.0);
        }
        self.successes as f64 / self.attempts as f64
    }

    /// Mean observed cost ratio kappa1/kappa0, defaulting to the cold-start
    /// ratio with no evidence.
    pub fn mean_cost_ratio(&self) -> f64 {
        if self.cost_ratios.is_empty() {
            return COLD_START_COST_RATIO;
        }
        self.cost_ratios.iter().sum::<f64>() / self.cost_ratios.len() as f64
    }

    fn observe(&mut self, record: &TrialRecord, base: &TrialRecord) {
        self.attempts += 1;
        if record.fair && !record.failed {
            self.successes += 1;
        }
        if let (Some(l1), Some(l0)) = (record.valid_loss(), base.valid_loss()) {
            self.degradations.push(l1 - l0);
        }
        if base.cost > 0.0 {
            self.cost_ratios.push(record.cost / base.cost);
        }
    }
}

/// Projected loss after mitigating `c`: its unmitigated loss plus the
/// estimated degradation zeta. Eq-style branch: when plain search is still
/// cheap relative to mitigation (eci < tau) and both fit in the remaining
/// budget, project the mean degradation; otherwise project optimistically
/// (mean minus the confidence radius).
pub fn projected_loss(
    base_loss: f64,
    stats: &MitigationStats,
    eci_value: f64,
    tau: f64,
    budget_left: f64,
) -> f64 {
    let zeta = if eci_value < tau && eci_value + tau < budget_left {
        stats.eta()
    } else {
        stats.eta() - stats.radius()
    };
    base_loss + zeta
}

/// Projected resource for one successful mitigation of a configuration with
/// unmitigated cost `base_cost`: the historical mean cost ratio applied to
/// the base cost, penalized by the mitigation success rate.
pub fn projected_mitigation_cost(base_cost: f64, stats: &MitigationStats) -> f64 {
    (base_cost / stats.q_mitigation()) * stats.mean_cost_ratio()
}

/// Which branch a suggestion took, with the gate values that drove it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateDiagnostics {
    pub ecf_hpo: f64,
    pub ecf_mitigation: f64,
    pub candidate: Option<String>,
    pub projected_loss: Option<f64>,
    pub tau: Option<f64>,
    pub zeta: Option<f64>,
    pub branch: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Mitigate,
    Hpo,
}

/// Decide the next trial: mitigate the candidate when mitigation looks
/// cheaper than plain search (ecf(1) < ecf(0)) and the projected loss beats
/// the best fair loss so far; otherwise take a fresh suggestion. With no
/// fair model yet, the projected-loss gate passes vacuously.
pub fn fairsearcher_suggest(
    h: &TrialHistory,
    state: &EcfState,
    stats: &MitigationStats,
    hp: &mut HpSearcher,
    budget_left: f64,
) -> (TrialConfig, u8, GateDiagnostics) {
    let ecf_hpo = state.ecf(0);
    let ecf_mit = state.ecf(1);
    let candidate = select_candidate(h);
    let mut diag = GateDiagnostics {
        ecf_hpo,
        ecf_mitigation: ecf_mit,
        candidate: candidate.map(|r| r.config.key()),
        projected_loss: None,
        tau: None,
        zeta: None,
        branch: Branch::Hpo,
    };
    if let Some(cand) = candidate {
        if ecf_mit < ecf_hpo {
            // A candidate implies at least one unmitigated trial, so ECI is
            // defined.
            let eci_value = hp.eci().unwrap_or(0.0);
            let tau = projected_mitigation_cost(cand.cost, stats);
            let lbar = projected_loss(cand.loss, stats, eci_value, tau, budget_left);
            diag.tau = Some(tau);
            diag.projected_loss = Some(lbar);
            diag.zeta = Some(lbar - cand.loss);
            if lbar < state.best_fair_loss {
                diag.branch = Branch::Mitigate;
                return (cand.config.clone(), 1, diag);
            }
        }
    }
    (hp.suggest(), 0, diag)
}

/// Fold the newest record (already appended to the history) into the ECF
/// state and mitigation statistics, and forward unmitigated records to the
/// hyperparameter searcher.
pub fn fairsearcher_update(
    h: &TrialHistory,
    newest: &TrialRecord,
    state: &mut EcfState,
    stats: &mut MitigationStats,
    hp: &mut HpSearcher,
) -> Result<()> {
    state.observe(newest);
    if newest.mitigated {
        let base = h
            .base_record(&newest.config.key())
            .ok_or_else(|| Error::NoBaseRecord(newest.config.key()))?;
        stats.observe(newest, base);
    } else {
        hp.update(&newest.config, newest.valid_loss(), newest.cost);
    }
    Ok(())
}
