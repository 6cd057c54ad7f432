//! Hyperparameter searchers behind a suggest/update interface: a random
//! searcher, a cost-frugal local searcher that starts from the cheapest
//! point of the space, and a scripted searcher that replays a fixed id
//! order for table-driven runs. All searchers keep the bookkeeping needed
//! for the ECI statistic (estimated cost for a plain-loss improvement).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{ConfigPoint, LearnerSpace, ParamRange, ParamValue, Scale, SearchSpace};

/// A configuration under trial: a real hyperparameter point, or an entry id
/// from a simulation table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrialConfig {
    Real(ConfigPoint),
    Sim(String),
}

impl TrialConfig {
    pub fn key(&self) -> String {
        match self {
            TrialConfig::Real(c) => c.key(),
            TrialConfig::Sim(id) => id.clone(),
        }
    }

    pub fn as_real(&self) -> Option<&ConfigPoint> {
        match self {
            TrialConfig::Real(c) => Some(c),
            TrialConfig::Sim(_) => None,
        }
    }
}

pub fn normalize_param(range: &ParamRange, v: f64) -> f64 {
    let u = match range.scale {
        Scale::Linear => (v - range.lo) / (range.hi - range.lo),
        Scale::Log => (v.ln() - range.lo.ln()) / (range.hi.ln() - range.lo.ln()),
    };
    u.clamp(0.0, 1.0)
}

pub fn denormalize_param(range: &ParamRange, u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    let v = match range.scale {
        Scale::Linear => range.lo + u * (range.hi - range.lo),
        Scale::Log => (range.lo.ln() + u * (range.hi.ln() - range.lo.ln())).exp(),
    };
    if range.integer {
        v.round().clamp(range.lo, range.hi)
    } else {
        v.clamp(range.lo, range.hi)
    }
}

fn param_value(range: &ParamRange, v: f64) -> ParamValue {
    if range.integer {
        ParamValue::Int(v as i64)
    } else {
        ParamValue::Float(v)
    }
}

/// Build a configuration from unit-cube coordinates (one per parameter).
pub fn config_from_unit(lspace: &LearnerSpace, unit: &[f64]) -> ConfigPoint {
    let mut params = std::collections::BTreeMap::new();
    for (range, &u) in lspace.params.iter().zip(unit) {
        let v = denormalize_param(range, u);
        params.insert(range.name.clone(), param_value(range, v));
    }
    ConfigPoint {
        learner: lspace.kind,
        params,
    }
}

pub fn unit_from_config(lspace: &LearnerSpace, c: &ConfigPoint) -> Vec<f64> {
    lspace
        .params
        .iter()
        .map(|r| normalize_param(r, c.get_f64(&r.name).unwrap_or(r.lo)))
        .collect()
}

/// Low-cost initialization: cost-driving parameters at their minimum, all
/// others at the midpoint of their scaled range.
pub fn low_cost_unit(lspace: &LearnerSpace) -> Vec<f64> {
    lspace
        .params
        .iter()
        .map(|r| if r.cost_driving { 0.0 } else { 0.5 })
        .collect()
}

/// Bookkeeping for the estimated cost of achieving a plain-loss improvement:
/// total resource spent, and the resource totals at the first- and
/// second-best plain losses.
#[derive(Debug, Clone)]
pub struct EciTracker {
    trials: usize,
    total: f64,
    at_best: f64,
    at_second: f64,
    best_loss: f64,
    second_loss: f64,
}

impl Default for EciTracker {
    fn default() -> Self {
        EciTracker {
            trials: 0,
            total: 0.0,
            at_best: 0.0,
            at_second: 0.0,
            best_loss: f64::INFINITY,
            second_loss: f64::INFINITY,
        }
    }
}

impl EciTracker {
    /// Record a finished trial; `loss` is None for failed evaluations.
    pub fn record(&mut self, cost: f64, loss: Option<f64>) {
        self.trials += 1;
        self.total += cost;
        if let Some(l) = loss {
            if l < self.best_loss {
                self.second_loss = self.best_loss;
                self.at_second = self.at_best;
                self.best_loss = l;
                self.at_best = self.total;
            }
        }
    }

    /// max{R - R_1st, R_1st - R_2nd}; missing terms are 0 before the second
    /// improvement. Errors with no trials recorded.
    pub fn eci(&self) -> Result<f64> {
        if self.trials == 0 {
            return Err(Error::EciUndefined);
        }
        Ok((self.total - self.at_best).max(self.at_best - self.at_second))
    }

    pub fn best_loss(&self) -> Option<f64> {
        (self.best_loss.is_finite()).then_some(self.best_loss)
    }
}

/// Local-search step parameters.
#[derive(Debug, Clone)]
pub struct LocalParams {
    pub init_step: f64,
    pub shrink: f64,
    pub restart_threshold: f64,
}

impl Default for LocalParams {
    fn default() -> Self {
        LocalParams {
            init_step: 0.2,
            shrink: 0.5,
            restart_threshold: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearcherKind {
    Random,
    Local,
}

impl std::str::FromStr for SearcherKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SearcherKind::Random),
            "local" => Ok(SearcherKind::Local),
            other => Err(Error::BadRunParam(format!(
                "unknown searcher '{other}' (expected random|local)"
            ))),
        }
    }
}

const LEARNER_RESAMPLE_PROB: f64 = 0.1;

#[derive(Debug)]
pub struct RandomSearcher {
    space: SearchSpace,
    rng: ChaCha8Rng,
    last_key: Option<String>,
    eci: EciTracker,
    best: Option<(TrialConfig, f64)>,
}

impl RandomSearcher {
    fn suggest(&mut self) -> TrialConfig {
        for _ in 0..16 {
            let li = self.rng.gen_range(0..self.space.learners.len());
            let lspace = &self.space.learners[li];
            let unit: Vec<f64> = (0..lspace.params.len())
                .map(|_| self.rng.gen::<f64>())
                .collect();
            let c = config_from_unit(lspace, &unit);
            if Some(c.key()) != self.last_key {
                self.last_key = Some(c.key());
                return TrialConfig::Real(c);
            }
        }
        // Space too small to avoid a repeat; accept it.
        let lspace = &self.space.learners[0];
        let c = config_from_unit(lspace, &vec![0.5; lspace.params.len()]);
        self.last_key = Some(c.key());
        TrialConfig::Real(c)
    }
}

#[derive(Debug)]
pub struct LocalSearcher {
    space: SearchSpace,
    rng: ChaCha8Rng,
    params: LocalParams,
    sigma: f64,
    learner_idx: usize,
    /// Per-learner incumbent coordinates in the unit cube.
    unit: Vec<Vec<f64>>,
    incumbent_loss: f64,
    pending_restart: bool,
    first: bool,
    eci: EciTracker,
    best: Option<(TrialConfig, f64)>,
}

impl LocalSearcher {
    fn sphere_direction(&mut self, dims: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dims).map(|_| self.rng.sample(StandardNormal)).collect();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }

    fn suggest(&mut self) -> TrialConfig {
        if self.first {
            self.first = false;
            let c = config_from_unit(&self.space.learners[self.learner_idx], &self.unit[self.learner_idx]);
            return TrialConfig::Real(c);
        }
        if self.pending_restart {
            self.pending_restart = false;
            self.sigma = self.params.init_step;
            self.learner_idx = self.rng.gen_range(0..self.space.learners.len());
            let dims = self.space.learners[self.learner_idx].params.len();
            self.unit[self.learner_idx] = (0..dims).map(|_| self.rng.gen::<f64>()).collect();
            self.incumbent_loss = f64::INFINITY;
            let c = config_from_unit(
                &self.space.learners[self.learner_idx],
                &self.unit[self.learner_idx],
            );
            return TrialConfig::Real(c);
        }
        let li = if self.space.learners.len() > 1 && self.rng.gen_bool(LEARNER_RESAMPLE_PROB) {
            self.rng.gen_range(0..self.space.learners.len())
        } else {
            self.learner_idx
        };
        let dims = self.space.learners[li].params.len();
        let dir = self.sphere_direction(dims);
        let proposal: Vec<f64> = self.unit[li]
            .iter()
            .zip(&dir)
            .map(|(u, d)| (u + self.sigma * d).clamp(0.0, 1.0))
            .collect();
        TrialConfig::Real(config_from_unit(&self.space.learners[li], &proposal))
    }

    fn observe(&mut self, config: &TrialConfig, loss: Option<f64>) {
        let improved = loss.is_some_and(|l| l < self.incumbent_loss);
        if improved {
            if let TrialConfig::Real(c) = config {
                if let Some(li) = self.space.learners.iter().position(|l| l.kind == c.learner) {
                    self.learner_idx = li;
                    self.unit[li] = unit_from_config(&self.space.learners[li], c);
                    self.incumbent_loss = loss.unwrap();
                    self.sigma = (self.sigma * 2.0).min(1.0);
                    return;
                }
            }
        }
        self.sigma *= self.params.shrink;
        if self.sigma < self.params.restart_threshold {
            self.pending_restart = true;
        }
    }
}

#[derive(Debug)]
pub struct ScriptedSearcher {
    ids: Vec<String>,
    pos: usize,
    /// Some(rng) draws ids uniformly at random instead of replaying order.
    rng: Option<ChaCha8Rng>,
    last: Option<String>,
    eci: EciTracker,
    best: Option<(TrialConfig, f64)>,
}

impl ScriptedSearcher {
    fn suggest(&mut self) -> TrialConfig {
        let id = match &mut self.rng {
            None => {
                let id = self.ids[self.pos % self.ids.len()].clone();
                self.pos += 1;
                id
            }
            Some(rng) => {
                let mut pick = self.ids[rng.gen_range(0..self.ids.len())].clone();
                for _ in 0..16 {
                    if Some(&pick) != self.last.as_ref() || self.ids.len() == 1 {
                        break;
                    }
                    pick = self.ids[rng.gen_range(0..self.ids.len())].clone();
                }
                pick
            }
        };
        self.last = Some(id.clone());
        TrialConfig::Sim(id)
    }
}

/// The searcher handle held by the runner; a single mutable state machine.
#[derive(Debug)]
pub enum HpSearcher {
    Random(RandomSearcher),
    Local(LocalSearcher),
    Scripted(ScriptedSearcher),
}

impl HpSearcher {
    pub fn random(space: SearchSpace, seed: u64) -> Self {
        HpSearcher::Random(RandomSearcher {
            space,
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_key: None,
            eci: EciTracker::default(),
            best: None,
        })
    }

    pub fn local(space: SearchSpace, seed: u64, params: LocalParams) -> Self {
        let unit: Vec<Vec<f64>> = space.learners.iter().map(low_cost_unit).collect();
        HpSearcher::Local(LocalSearcher {
            sigma: params.init_step,
            space,
            rng: ChaCha8Rng::seed_from_u64(seed),
            params,
            learner_idx: 0,
            unit,
            incumbent_loss: f64::INFINITY,
            pending_restart: false,
            first: true,
            eci: EciTracker::default(),
            best: None,
        })
    }

    pub fn for_kind(kind: SearcherKind, space: SearchSpace, seed: u64) -> Self {
        match kind {
            SearcherKind::Random => Self::random(space, seed),
            SearcherKind::Local => Self::local(space, seed, LocalParams::default()),
        }
    }

    /// Replay a fixed id order (cycling when exhausted).
    pub fn scripted(ids: Vec<String>) -> Self {
        assert!(!ids.is_empty(), "scripted searcher needs at least one id");
        HpSearcher::Scripted(ScriptedSearcher {
            ids,
            pos: 0,
            rng: None,
            last: None,
            eci: EciTracker::default(),
            best: None,
        })
    }

    /// Seeded-uniform draws over the given ids.
    pub fn seeded_ids(ids: Vec<String>, seed: u64) -> Self {
        assert!(!ids.is_empty(), "seeded searcher needs at least one id");
        HpSearcher::Scripted(ScriptedSearcher {
            ids,
            pos: 0,
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
            last: None,
            eci: EciTracker::default(),
            best: None,
        })
    }

    pub fn suggest(&mut self) -> TrialConfig {
        match self {
            HpSearcher::Random(s) => s.suggest(),
            HpSearcher::Local(s) => s.suggest(),
            HpSearcher::Scripted(s) => s.suggest(),
        }
    }

    /// Feed one unmitigated trial result back; `loss` is None for failed
    /// evaluations (counted as non-improvements).
    pub fn update(&mut self, config: &TrialConfig, loss: Option<f64>, cost: f64) {
        let (eci, best) = match self {
            HpSearcher::Random(s) => {
                if let TrialConfig::Real(c) = config {
                    s.last_key = Some(c.key());
                }
                (&mut s.eci, &mut s.best)
            }
            HpSearcher::Local(s) => {
                s.observe(config, loss);
                (&mut s.eci, &mut s.best)
            }
            HpSearcher::Scripted(s) => (&mut s.eci, &mut s.best),
        };
        eci.record(cost, loss);
        if let Some(l) = loss {
            if best.as_ref().map_or(true, |(_, bl)| l < *bl) {
                *best = Some((config.clone(), l));
            }
        }
    }

    pub fn eci(&self) -> Result<f64> {
        match self {
            HpSearcher::Random(s) => s.eci.eci(),
            HpSearcher::Local(s) => s.eci.eci(),
            HpSearcher::Scripted(s) => s.eci.eci(),
        }
    }

    /// Global best plain-loss observation; never lost across restarts.
    pub fn best_plain(&self) -> Option<&(TrialConfig, f64)> {
        match self {
            HpSearcher::Random(s) => s.best.as_ref(),
            HpSearcher::Local(s) => s.best.as_ref(),
            HpSearcher::Scripted(s) => s.best.as_ref(),
        }
    }
}

/// Feasibility-first comparison key for treating the mitigation flag as one
/// more categorical hyperparameter: fair beats unfair; among fair, lower
/// loss wins; among unfair, lower disparity wins; ties break toward the
/// earlier iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasRank {
    pub fair: bool,
    pub loss: f64,
    pub disparity: f64,
    pub iteration: u64,
}

impl FeasRank {
    pub fn better_than(&self, other: &FeasRank) -> bool {
        if self.fair != other.fair {
            return self.fair;
        }
        let (a, b) = if self.fair {
            (self.loss, other.loss)
        } else {
            (self.disparity, other.disparity)
        };
        if a != b {
            return a < b;
        }
        self.iteration < other.iteration
    }
}

/// Searcher over the joint (configuration, mitigation-flag) space.
#[derive(Debug)]
pub enum MashpSearcher {
    Random {
        inner: HpSearcher,
        rng: ChaCha8Rng,
    },
    Local {
        space: SearchSpace,
        rng: ChaCha8Rng,
        params: LocalParams,
        sigma: f64,
        learner_idx: usize,
        unit: Vec<Vec<f64>>,
        m_coord: u8,
        incumbent: Option<FeasRank>,
        pending_restart: bool,
        first: bool,
    },
}

impl MashpSearcher {
    pub fn random(inner: HpSearcher, seed: u64) -> Self {
        MashpSearcher::Random {
            inner,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6d61_7368_70),
        }
    }

    pub fn local(space: SearchSpace, seed: u64, params: LocalParams) -> Self {
        let unit: Vec<Vec<f64>> = space.learners.iter().map(low_cost_unit).collect();
        MashpSearcher::Local {
            sigma: params.init_step,
            space,
            rng: ChaCha8Rng::seed_from_u64(seed),
            params,
            learner_idx: 0,
            unit,
            m_coord: 0,
            incumbent: None,
            pending_restart: false,
            first: true,
        }
    }

    pub fn suggest(&mut self) -> (TrialConfig, u8) {
        match self {
            MashpSearcher::Random { inner, rng } => {
                let m = u8::from(rng.gen_bool(0.5));
                (inner.suggest(), m)
            }
            MashpSearcher::Local {
                space,
                rng,
                params,
                sigma,
                learner_idx,
                unit,
                m_coord,
                incumbent,
                pending_restart,
                first,
            } => {
                if *first {
                    *first = false;
                    let c = config_from_unit(&space.learners[*learner_idx], &unit[*learner_idx]);
                    return (TrialConfig::Real(c), *m_coord);
                }
                if *pending_restart {
                    *pending_restart = false;
                    *sigma = params.init_step;
                    *learner_idx = rng.gen_range(0..space.learners.len());
                    let dims = space.learners[*learner_idx].params.len();
                    unit[*learner_idx] = (0..dims).map(|_| rng.gen::<f64>()).collect();
                    *m_coord = u8::from(rng.gen_bool(0.5));
                    *incumbent = None;
                    let c = config_from_unit(&space.learners[*learner_idx], &unit[*learner_idx]);
                    return (TrialConfig::Real(c), *m_coord);
                }
                let li = if space.learners.len() > 1 && rng.gen_bool(LEARNER_RESAMPLE_PROB) {
                    rng.gen_range(0..space.learners.len())
                } else {
                    *learner_idx
                };
                let m = if rng.gen_bool(LEARNER_RESAMPLE_PROB) {
                    1 - *m_coord
                } else {
                    *m_coord
                };
                let dims = space.learners[li].params.len();
                let dir: Vec<f64> = {
                    let mut v: Vec<f64>;
                    loop {
                        v = (0..dims).map(|_| rng.sample(StandardNormal)).collect();
                        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                        if norm > 1e-12 {
                            v.iter_mut().for_each(|x| *x /= norm);
                            break;
                        }
                    }
                    v
                };
                let proposal: Vec<f64> = unit[li]
                    .iter()
                    .zip(&dir)
                    .map(|(u, d)| (u + *sigma * d).clamp(0.0, 1.0))
                    .collect();
                (
                    TrialConfig::Real(config_from_unit(&space.learners[li], &proposal)),
                    m,
                )
            }
        }
    }

    pub fn update(&mut self, config: &TrialConfig, m: u8, rank: Option<FeasRank>, cost: f64) {
        match self {
            MashpSearcher::Random { inner, .. } => {
                inner.update(config, rank.map(|r| r.loss), cost);
            }
            MashpSearcher::Local {
                space,
                params,
                sigma,
                learner_idx,
                unit,
                m_coord,
                incumbent,
                pending_restart,
                ..
            } => {
                let improved = match (&rank, &incumbent) {
                    (Some(r), Some(inc)) => r.better_than(inc),
                    (Some(_), None) => true,
                    (None, _) => false,
                };
                if improved {
                    if let TrialConfig::Real(c) = config {
                        if let Some(li) = space.learners.iter().position(|l| l.kind == c.learner) {
                            *learner_idx = li;
                            unit[li] = unit_from_config(&space.learners[li], c);
                            *m_coord = m;
                            *incumbent = rank;
                            *sigma = (*sigma * 2.0).min(1.0);
                            return;
                        }
                    }
                }
                *sigma *= params.shrink;
                if *sigma < params.restart_threshold {
                    *pending_restart = true;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{default_space, SpaceMode};

    #[test]
    fn low_cost_init_matches_declared_point() {
        // Single-GBT mode: estimators 4, learning_rate at the log midpoint
        // (0.1), max_depth 1, min_leaf at the log midpoint (8).
        let space = default_space(SpaceMode::SingleGbt);
        let c = config_from_unit(&space.learners[0], &low_cost_unit(&space.learners[0]));
        assert_eq!(c.get_usize("estimators"), Some(4));
        assert_eq!(c.get_usize("max_depth"), Some(1));
        assert_eq!(c.get_usize("min_leaf"), Some(8));
        let lr = c.get_f64("learning_rate").unwrap();
        assert!((lr - 0.1).abs() < 1e-9, "learning rate {lr}");
    }

    #[test]
    fn perturbation_arithmetic() {
        // Incumbent (0.5, 0.5), sigma 0.1, direction (1, 0): proposal (0.6, 0.5).
        let u = [0.5, 0.5];
        let dir = [1.0, 0.0];
        let sigma = 0.1;
        let prop: Vec<f64> = u
            .iter()
            .zip(&dir)
            .map(|(a, d)| (a + sigma * d).clamp(0.0, 1.0))
            .collect();
        assert_eq!(prop, vec![0.6, 0.5]);
        // Boundary clamp: incumbent (0.98, 0.5) moves to (1.0, 0.5).
        let u = [0.98, 0.5];
        let prop: Vec<f64> = u
            .iter()
            .zip(&dir)
            .map(|(a, d)| (a + sigma * d).clamp(0.0, 1.0))
            .collect();
        assert!((prop[0] - 1.0).abs() < 1e-12);
        assert_eq!(prop[1], 0.5);
    }

    #[test]
    fn sigma_dynamics() {
        let space = default_space(SpaceMode::SingleGbt);
        let mut s = HpSearcher::local(
            space.clone(),
            1,
            LocalParams {
                init_step: 0.1,
                shrink: 0.5,
                restart_threshold: 0.0001,
            },
        );
        let first = s.suggest();
        // Improvement doubles sigma.
        s.update(&first, Some(0.4), 1.0);
        if let HpSearcher::Local(l) = &s {
            assert!((l.sigma - 0.2).abs() < 1e-12);
        }
        // Three consecutive non-improvements with shrink 0.5: 0.2 -> 0.025.
        for _ in 0..3 {
            let c = s.suggest();
            s.update(&c, Some(0.9), 1.0);
        }
        if let HpSearcher::Local(l) = &s {
            assert!((l.sigma - 0.025).abs() < 1e-12);
        }
    }

    #[test]
    fn restart_returns_fresh_point_and_keeps_best() {
        let space = default_space(SpaceMode::SingleGbt);
        let mut s = HpSearcher::local(
            space,
            3,
            LocalParams {
                init_step: 0.1,
                shrink: 0.5,
                restart_threshold: 0.09,
            },
        );
        let first = s.suggest();
        s.update(&first, Some(0.3), 1.0);
        // One non-improvement drops sigma below the threshold.
        let c = s.suggest();
        s.update(&c, Some(0.9), 1.0);
        if let HpSearcher::Local(l) = &s {
            assert!(l.pending_restart);
        }
        let fresh = s.suggest();
        assert_ne!(fresh.key(), first.key());
        assert_eq!(s.best_plain().unwrap().1, 0.3);
    }

    #[test]
    fn eci_worked_examples() {
        // R = 100, R_1st = 60, R_2nd = 30 -> max{40, 30} = 40.
        let t = EciTracker {
            trials: 5,
            total: 100.0,
            at_best: 60.0,
            at_second: 30.0,
            best_loss: 0.2,
            second_loss: 0.3,
        };
        assert_eq!(t.eci().unwrap(), 40.0);
        // Exactly one trial of cost 5 which is the best: max{0, 5} = 5.
        let mut t = EciTracker::default();
        t.record(5.0, Some(0.4));
        assert_eq!(t.eci().unwrap(), 5.0);
        // No trials: undefined.
        assert!(matches!(
            EciTracker::default().eci(),
            Err(Error::EciUndefined)
        ));
    }

    #[test]
    fn eci_non_decreasing_between_improvements() {
        let mut t = EciTracker::default();
        t.record(2.0, Some(0.5));
        let mut prev = t.eci().unwrap();
        for i in 0..10 {
            t.record(1.0 + f64::from(i), Some(0.9));
            let e = t.eci().unwrap();
            assert!(e >= prev);
            prev = e;
        }
    }

    #[test]
    fn feasibility_first_ordering_examples() {
        let fair_slow = FeasRank {
            fair: true,
            loss: 0.3,
            disparity: 0.2,
            iteration: 5,
        };
        let unfair_fast = FeasRank {
            fair: false,
            loss: 0.1,
            disparity: 0.08,
            iteration: 2,
        };
        assert!(fair_slow.better_than(&unfair_fast));
        let a = FeasRank {
            fair: false,
            loss: 0.2,
            disparity: 0.02,
            iteration: 9,
        };
        let b = FeasRank {
            fair: false,
            loss: 0.1,
            disparity: 0.05,
            iteration: 1,
        };
        assert!(a.better_than(&b));
        let t3 = FeasRank {
            fair: true,
            loss: 0.2,
            disparity: 0.0,
            iteration: 3,
        };
        let t7 = FeasRank {
            fair: true,
            loss: 0.2,
            disparity: 0.0,
            iteration: 7,
        };
        assert!(t3.better_than(&t7));
        assert!(!t7.better_than(&t3));
    }

    #[test]
    fn suggestions_stay_in_space_and_are_deterministic() {
        for mode in [SpaceMode::SingleGbt, SpaceMode::Multi] {
            let space = default_space(mode);
            for kind in [SearcherKind::Random, SearcherKind::Local] {
                let mut a = HpSearcher::for_kind(kind, space.clone(), 42);
                let mut b = HpSearcher::for_kind(kind, space.clone(), 42);
                for i in 0..2500 {
                    let ca = a.suggest();
                    let cb = b.suggest();
                    assert_eq!(ca.key(), cb.key(), "determinism at step {i}");
                    let c = ca.as_real().unwrap();
                    c.validate(&space).unwrap_or_else(|e| {
                        panic!("suggestion outside space at step {i}: {e}")
                    });
                    let loss = 0.5 + 0.4 * ((i % 7) as f64 / 7.0) - 0.3 * f64::from(i % 13 == 0);
                    a.update(&ca, Some(loss), 1.0);
                    b.update(&cb, Some(loss), 1.0);
                }
            }
        }
    }

    #[test]
    fn local_never_loses_global_best() {
        let space = default_space(SpaceMode::Multi);
        let mut s = HpSearcher::local(space, 17, LocalParams::default());
        let mut seen_best = f64::INFINITY;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let c = s.suggest();
            let loss: f64 = rng.gen_range(0.0..1.0);
            seen_best = seen_best.min(loss);
            s.update(&c, Some(loss), rng.gen_range(0.1..2.0));
            assert_eq!(s.best_plain().unwrap().1, seen_best);
        }
    }

    #[test]
    fn scripted_order_cycles() {
        let mut s = HpSearcher::scripted(vec!["a".into(), "b".into()]);
        let keys: Vec<String> = (0..5).map(|_| s.suggest().key()).collect();
        assert_eq!(keys, vec!["a", "b", "a", "b", "a"]);
    }
}
