//! The budgeted trial loop: obtain (configuration, mitigation-flag)
//! suggestions from the active strategy, evaluate them against real data or
//! a simulation table, audit costs, and keep the best fair and best
//! unconstrained models.
//!
//! Sequential runs are deterministic given the seed (byte-identical logs
//! with table or proxy costs). Parallel runs trade that determinism for
//! throughput: workers evaluate concurrently against a mutex-guarded
//! scheduler, suggestions may be computed from a snapshot missing in-flight
//! results, and results are applied in completion order with issue-index
//! tiebreaks.

use std::collections::VecDeque;
use std::sync::{mpsc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::SplitDataset;
use crate::error::{Error, Result};
use crate::fairness::{self, FairnessSpec};
use crate::hpsearch::{FeasRank, HpSearcher, MashpSearcher, SearcherKind, TrialConfig};
use crate::learners::{self, default_space, SpaceMode};
use crate::mitigation::{mitigate, Mitigator};
use crate::scheduler::{
    fairsearcher_suggest, fairsearcher_update, select_candidate_excluding, Branch, EcfState,
    GateDiagnostics, MitigationStats, TrialHistory, TrialRecord,
};
use crate::sim::SimTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Fair,
    #[serde(rename = "hpo")]
    HpoOnly,
    #[serde(rename = "malways")]
    MitigateAlways,
    #[serde(rename = "mashp")]
    MitigateAsHp,
    #[serde(rename = "mpost")]
    MitigatePost,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fair" => Ok(Strategy::Fair),
            "hpo" => Ok(Strategy::HpoOnly),
            "malways" => Ok(Strategy::MitigateAlways),
            "mashp" => Ok(Strategy::MitigateAsHp),
            "mpost" => Ok(Strategy::MitigatePost),
            other => Err(Error::BadRunParam(format!(
                "unknown strategy '{other}' (expected fair|hpo|malways|mashp|mpost)"
            ))),
        }
    }
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Fair => "fair",
            Strategy::HpoOnly => "hpo",
            Strategy::MitigateAlways => "malways",
            Strategy::MitigateAsHp => "mashp",
            Strategy::MitigatePost => "mpost",
        }
    }
}

/// How real-mode trial cost is measured: wall-clock seconds, or the
/// deterministic proxy units from `learners::proxy_cost` (reproducible
/// logs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostModel {
    Wallclock,
    Proxy,
}

#[derive(Debug, Clone)]
pub struct RunParams {
    pub strategy: Strategy,
    pub searcher: SearcherKind,
    pub space: SpaceMode,
    pub budget: f64,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Debug)]
pub enum Workload {
    Real {
        split: SplitDataset,
        spec: FairnessSpec,
        mitigator: Mitigator,
        cost_model: CostModel,
    },
    Sim {
        table: SimTable,
        delta: f64,
    },
}

/// One log line worth of trial output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub gate: Option<GateDiagnostics>,
    pub issue_order: u64,
    pub completion_order: u64,
    /// Best fair loss over the run after applying this trial.
    pub best_fair_so_far: Option<f64>,
}

/// Resource totals per trial class: plain search, mitigation trials that
/// improved the then-current best fair loss, and mitigation trials that did
/// not. The three bins partition the consumed budget exactly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceBreakdown {
    pub hpo: f64,
    pub effective_mitigation: f64,
    pub wasted_mitigation: f64,
}

impl ResourceBreakdown {
    pub fn total(&self) -> f64 {
        self.hpo + self.effective_mitigation + self.wasted_mitigation
    }
}

/// Classify each record by replaying the log in order: unmitigated trials
/// are plain search; a mitigated trial is effective when it is fair and
/// improves (or establishes) the best fair loss at that point.
pub fn breakdown(trials: &[TrialOutcome]) -> ResourceBreakdown {
    let mut bins = ResourceBreakdown::default();
    let mut best_fair: Option<f64> = None;
    for t in trials {
        let r = &t.record;
        if !r.mitigated {
            bins.hpo += r.cost;
        } else {
            let improving = r.fair
                && !r.failed
                && best_fair.map_or(true, |b| r.loss < b);
            if improving {
                bins.effective_mitigation += r.cost;
            } else {
                bins.wasted_mitigation += r.cost;
            }
        }
        if r.fair && !r.failed && best_fair.map_or(true, |b| r.loss < b) {
            best_fair = Some(r.loss);
        }
    }
    bins
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestModel {
    pub key: String,
    pub loss: f64,
    pub disparity: f64,
    pub iteration: u64,
    /// Serialized model (real runs only).
    pub model_json: Option<String>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub trials: Vec<TrialOutcome>,
    pub breakdown: ResourceBreakdown,
    pub consumed: f64,
    /// Best model satisfying the fairness constraint, if any was found.
    pub best_fair: Option<BestModel>,
    /// Best model by loss regardless of fairness.
    pub best_plain: Option<BestModel>,
}

enum Evaluation {
    Ok {
        loss: f64,
        disparity: f64,
        fair: bool,
        model: Option<learners::TrainedModel>,
    },
    Failed,
}

fn evaluate(workload: &Workload, config: &TrialConfig, m: u8) -> (Evaluation, f64) {
    match workload {
        Workload::Sim { table, delta } => {
            let key = config.key();
            match table.lookup(&key, m == 1) {
                Ok((loss, disparity, cost)) => (
                    Evaluation::Ok {
                        loss,
                        disparity,
                        fair: disparity <= *delta,
                        model: None,
                    },
                    cost,
                ),
                Err(_) => (Evaluation::Failed, 1e-6),
            }
        }
        Workload::Real {
            split,
            spec,
            mitigator,
            cost_model,
        } => {
            let c = match config.as_real() {
                Some(c) => c,
                None => return (Evaluation::Failed, 1e-6),
            };
            let started = Instant::now();
            let trained = if m == 1 {
                mitigate(mitigator, c, &split.train, spec).map(|o| (o.model, o.oracle_calls))
            } else {
                learners::train(c, &split.train, None, None).map(|model| (model, 1))
            };
            let outcome = trained.and_then(|(model, calls)| {
                let loss = fairness::loss(&model, &split.val)?;
                let report = fairness::assess(&model, &split.val, spec)?;
                Ok((model, calls, loss, report))
            });
            let elapsed = started.elapsed().as_secs_f64().max(1e-9);
            match outcome {
                Ok((model, calls, loss, report)) => {
                    let cost = match cost_model {
                        CostModel::Wallclock => elapsed,
                        CostModel::Proxy => learners::proxy_cost(c) * calls as f64,
                    };
                    (
                        Evaluation::Ok {
                            loss,
                            disparity: report.disparity,
                            fair: report.fair,
                            model: Some(model),
                        },
                        cost,
                    )
                }
                Err(_) => {
                    let cost = match cost_model {
                        CostModel::Wallclock => elapsed,
                        CostModel::Proxy => learners::proxy_cost(c),
                    };
                    (Evaluation::Failed, cost)
                }
            }
        }
    }
}

/// The strategy state machine plus all run bookkeeping, guarded by one
/// mutex in parallel mode.
struct Engine {
    strategy: Strategy,
    history: TrialHistory,
    hp: HpSearcher,
    mashp: Option<MashpSearcher>,
    ecf: EcfState,
    stats: MitigationStats,
    pending: VecDeque<(TrialConfig, u8)>,
    budget_total: f64,
    /// Sum of completed trial costs.
    consumed: f64,
    issued: u64,
    completed: u64,
    /// Mitigations suggested but not yet applied (parallel runs).
    inflight_mitigation: std::collections::HashSet<String>,
    best_fair: Option<BestModel>,
    best_plain: Option<BestModel>,
    outcomes: Vec<TrialOutcome>,
}

impl Engine {
    fn new(workload: &Workload, params: &RunParams) -> Result<Engine> {
        if params.budget <= 0.0 {
            return Err(Error::BadRunParam("budget must be > 0".into()));
        }
        if params.workers == 0 {
            return Err(Error::BadRunParam("workers must be >= 1".into()));
        }
        if let Workload::Real {
            split, mitigator, ..
        } = workload
        {
            if matches!(mitigator, Mitigator::GridSearch { .. })
                && split.train.group_count() != 2
            {
                return Err(Error::NonBinaryAttribute(split.train.group_count()));
            }
        }
        let hp = match workload {
            Workload::Real { .. } => {
                HpSearcher::for_kind(params.searcher, default_space(params.space), params.seed)
            }
            Workload::Sim { table, .. } => match &table.order {
                Some(order) => HpSearcher::scripted(order.clone()),
                None => HpSearcher::seeded_ids(table.ids(), params.seed),
            },
        };
        let mashp = if params.strategy == Strategy::MitigateAsHp {
            Some(match workload {
                Workload::Real { .. } if params.searcher == SearcherKind::Local => {
                    MashpSearcher::local(
                        default_space(params.space),
                        params.seed,
                        crate::hpsearch::LocalParams::default(),
                    )
                }
                Workload::Real { .. } => MashpSearcher::random(
                    HpSearcher::random(default_space(params.space), params.seed),
                    params.seed,
                ),
                Workload::Sim { table, .. } => {
                    let inner = match &table.order {
                        Some(order) => HpSearcher::scripted(order.clone()),
                        None => HpSearcher::seeded_ids(table.ids(), params.seed),
                    };
                    MashpSearcher::random(inner, params.seed)
                }
            })
        } else {
            None
        };
        Ok(Engine {
            strategy: params.strategy,
            history: TrialHistory::new(),
            hp,
            mashp,
            ecf: EcfState::new(),
            stats: MitigationStats::default(),
            pending: VecDeque::new(),
            budget_total: params.budget,
            consumed: 0.0,
            issued: 0,
            completed: 0,
            inflight_mitigation: std::collections::HashSet::new(),
            best_fair: None,
            best_plain: None,
            outcomes: Vec::new(),
        })
    }

    /// Next (configuration, mitigation-flag) for the active strategy.
    /// `spent` is the budget-relevant progress (consumed cost when
    /// sequential, wall-clock elapsed when parallel).
    fn suggest(&mut self, spent: f64) -> (TrialConfig, u8, Option<GateDiagnostics>) {
        let budget_left = (self.budget_total - spent).max(0.0);
        let (config, m, gate) = match self.strategy {
            Strategy::Fair => {
                let (c, m, diag) = fairsearcher_suggest_guarded(
                    &self.history,
                    &self.ecf,
                    &self.stats,
                    &mut self.hp,
                    budget_left,
                    &self.inflight_mitigation,
                );
                (c, m, Some(diag))
            }
            Strategy::HpoOnly => (self.hp.suggest(), 0, None),
            Strategy::MitigateAlways => {
                // Every suggestion is evaluated twice: (c, 0) now and (c, 1)
                // as the immediately following trial.
                if let Some((c, m)) = self.pending.pop_front() {
                    (c, m, None)
                } else {
                    let c = self.hp.suggest();
                    self.pending.push_back((c.clone(), 1));
                    (c, 0, None)
                }
            }
            Strategy::MitigateAsHp => {
                let (c, m) = self.mashp.as_mut().expect("mashp searcher").suggest();
                (c, m, None)
            }
            Strategy::MitigatePost => {
                if spent < self.budget_total / 2.0 {
                    (self.hp.suggest(), 0, None)
                } else if let Some(c) = self.mpost_candidate() {
                    (c, 1, None)
                } else {
                    // No evaluated unfair configuration left: keep searching.
                    (self.hp.suggest(), 0, None)
                }
            }
        };
        if m == 1 {
            self.inflight_mitigation.insert(config.key());
        }
        self.issued += 1;
        (config, m, gate)
    }

    fn mpost_candidate(&self) -> Option<TrialConfig> {
        self.history
            .h0()
            .filter(|r| {
                !r.failed
                    && !r.fair
                    && !self.history.is_mitigated(&r.config.key())
                    && !self.inflight_mitigation.contains(&r.config.key())
            })
            .min_by(|a, b| {
                a.loss
                    .total_cmp(&b.loss)
                    .then(a.iteration.cmp(&b.iteration))
            })
            .map(|r| r.config.clone())
    }

    fn apply(
        &mut self,
        config: TrialConfig,
        m: u8,
        evaluation: Evaluation,
        cost: f64,
        gate: Option<GateDiagnostics>,
        issue_order: u64,
    ) -> Result<()> {
        let completion_order = self.completed;
        self.completed += 1;
        self.consumed += cost;
        if m == 1 {
            self.inflight_mitigation.remove(&config.key());
        }
        let record = match &evaluation {
            Evaluation::Ok {
                loss,
                disparity,
                fair,
                ..
            } => TrialRecord {
                iteration: completion_order,
                config,
                mitigated: m == 1,
                cost,
                loss: *loss,
                disparity: *disparity,
                fair: *fair,
                failed: false,
            },
            Evaluation::Failed => TrialRecord {
                iteration: completion_order,
                config,
                mitigated: m == 1,
                cost,
                loss: f64::INFINITY,
                disparity: f64::INFINITY,
                fair: false,
                failed: true,
            },
        };
        self.history.push(record.clone());

        // Best-model tracking.
        if let Evaluation::Ok {
            loss,
            disparity,
            fair,
            model,
        } = &evaluation
        {
            let better_plain = self.best_plain.as_ref().map_or(true, |b| *loss < b.loss);
            if better_plain {
                self.best_plain = Some(BestModel {
                    key: record.config.key(),
                    loss: *loss,
                    disparity: *disparity,
                    iteration: record.iteration,
                    model_json: model.as_ref().map(|m| m.to_json()),
                });
            }
            if *fair {
                let better_fair = self.best_fair.as_ref().map_or(true, |b| *loss < b.loss);
                if better_fair {
                    self.best_fair = Some(BestModel {
                        key: record.config.key(),
                        loss: *loss,
                        disparity: *disparity,
                        iteration: record.iteration,
                        model_json: model.as_ref().map(|m| m.to_json()),
                    });
                }
            }
        }

        // Strategy updates.
        match self.strategy {
            Strategy::Fair => {
                fairsearcher_update(
                    &self.history,
                    &record,
                    &mut self.ecf,
                    &mut self.stats,
                    &mut self.hp,
                )?;
            }
            Strategy::MitigateAsHp => {
                let rank = record.valid_loss().map(|loss| FeasRank {
                    fair: record.fair,
                    loss,
                    disparity: record.disparity,
                    iteration: record.iteration,
                });
                self.mashp
                    .as_mut()
                    .expect("mashp searcher")
                    .update(&record.config, m, rank, cost);
            }
            Strategy::HpoOnly | Strategy::MitigateAlways | Strategy::MitigatePost => {
                if !record.mitigated {
                    self.hp
                        .update(&record.config, record.valid_loss(), record.cost);
                }
            }
        }

        self.outcomes.push(TrialOutcome {
            best_fair_so_far: self.best_fair.as_ref().map(|b| b.loss),
            record,
            gate,
            issue_order,
            completion_order,
        });
        Ok(())
    }

    fn mean_cost(&self) -> f64 {
        if self.completed == 0 {
            0.0
        } else {
            self.consumed / self.completed as f64
        }
    }

    fn finish(self) -> RunOutcome {
        let bins = breakdown(&self.outcomes);
        RunOutcome {
            breakdown: bins,
            consumed: self.consumed,
            best_fair: self.best_fair,
            best_plain: self.best_plain,
            trials: self.outcomes,
        }
    }
}

/// Candidate selection that skips configurations with an in-flight
/// mitigation; identical to the plain gate in sequential runs.
fn fairsearcher_suggest_guarded(
    h: &TrialHistory,
    state: &EcfState,
    stats: &MitigationStats,
    hp: &mut HpSearcher,
    budget_left: f64,
    inflight: &std::collections::HashSet<String>,
) -> (TrialConfig, u8, GateDiagnostics) {
    if inflight.is_empty() {
        return fairsearcher_suggest(h, state, stats, hp, budget_left);
    }
    let candidate = select_candidate_excluding(h, inflight);
    let ecf_hpo = state.ecf(0);
    let ecf_mit = state.ecf(1);
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
            let eci_value = hp.eci().unwrap_or(0.0);
            let tau = crate::scheduler::projected_mitigation_cost(cand.cost, stats);
            let lbar =
                crate::scheduler::projected_loss(cand.loss, stats, eci_value, tau, budget_left);
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

/// Execute the trial loop under the budget. Sequential when `workers == 1`
/// or the workload is a table (lookups have no latency to parallelize);
/// otherwise spawns evaluation workers against the guarded scheduler.
pub fn run(workload: &Workload, params: &RunParams) -> Result<RunOutcome> {
    if params.workers >= 2 && matches!(workload, Workload::Real { .. }) {
        return run_parallel(workload, params);
    }
    let mut engine = Engine::new(workload, params)?;
    // Alg-style loop: check the remaining budget before each trial, so at
    // most one trial overshoots.
    while engine.budget_total - engine.consumed > 0.0 {
        let spent = engine.consumed;
        let (config, m, gate) = engine.suggest(spent);
        let issue = engine.issued - 1;
        let (evaluation, cost) = evaluate(workload, &config, m);
        engine.apply(config, m, evaluation, cost, gate, issue)?;
    }
    Ok(engine.finish())
}

struct WorkerResult {
    issue: u64,
    config: TrialConfig,
    m: u8,
    gate: Option<GateDiagnostics>,
    evaluation: Evaluation,
    cost: f64,
}

fn run_parallel(workload: &Workload, params: &RunParams) -> Result<RunOutcome> {
    let engine = Mutex::new(Engine::new(workload, params)?);
    let start = Instant::now();
    let total = params.budget;
    let (tx, rx) = mpsc::channel::<WorkerResult>();
    let apply_error: Mutex<Option<Error>> = Mutex::new(None);

    std::thread::scope(|scope| {
        // Applier: drains completed results, applying batches in issue-index
        // order so simultaneous completions resolve deterministically.
        let engine_ref = &engine;
        let error_ref = &apply_error;
        scope.spawn(move || {
            while let Ok(first) = rx.recv() {
                let mut batch = vec![first];
                while let Ok(next) = rx.try_recv() {
                    batch.push(next);
                }
                batch.sort_by_key(|r| r.issue);
                let mut eng = engine_ref.lock().unwrap();
                for r in batch {
                    if let Err(e) = eng.apply(r.config, r.m, r.evaluation, r.cost, r.gate, r.issue)
                    {
                        *error_ref.lock().unwrap() = Some(e);
                    }
                }
            }
        });

        for _ in 0..params.workers {
            let tx = tx.clone();
            let engine_ref = &engine;
            scope.spawn(move || loop {
                let job = {
                    let mut eng = engine_ref.lock().unwrap();
                    let elapsed = start.elapsed().as_secs_f64();
                    // Budget check on consumed wall-clock plus an in-flight
                    // estimate: expect the next trial to take about the mean
                    // completed cost; always admit work when idle.
                    let outstanding = eng.issued - eng.completed;
                    let fits = elapsed < total
                        && (outstanding == 0 || elapsed + eng.mean_cost() < total);
                    if !fits {
                        None
                    } else {
                        let (c, m, gate) = eng.suggest(elapsed);
                        Some((c, m, gate, eng.issued - 1))
                    }
                };
                let Some((config, m, gate, issue)) = job else {
                    break;
                };
                let (evaluation, cost) = evaluate(workload, &config, m);
                if tx
                    .send(WorkerResult {
                        issue,
                        config,
                        m,
                        gate,
                        evaluation,
                        cost,
                    })
                    .is_err()
                {
                    break;
                }
            });
        }
        drop(tx);
    });

    if let Some(e) = apply_error.into_inner().unwrap().take() {
        return Err(e);
    }
    Ok(engine.into_inner().unwrap().finish())
}

/// Convenience wrapper for real data.
pub fn run_real(
    split: SplitDataset,
    spec: FairnessSpec,
    mitigator: Mitigator,
    cost_model: CostModel,
    params: &RunParams,
) -> Result<RunOutcome> {
    let workload = Workload::Real {
        split,
        spec,
        mitigator,
        cost_model,
    };
    run(&workload, params)
}

/// Convenience wrapper for table-driven runs.
pub fn run_sim(table: SimTable, delta: f64, params: &RunParams) -> Result<RunOutcome> {
    table.validate()?;
    let workload = Workload::Sim { table, delta };
    run(&workload, params)
}
