//! Hyperparameter search spaces and configuration points.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Logistic,
    Tree,
    Gbt,
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerKind::Logistic => write!(f, "logistic"),
            LearnerKind::Tree => write!(f, "tree"),
            LearnerKind::Gbt => write!(f, "gbt"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Linear,
    Log,
}

/// One tunable parameter with its range and scaling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub scale: Scale,
    pub integer: bool,
    /// Whether this parameter drives training cost; low-cost initialization
    /// starts such parameters at their minimum.
    pub cost_driving: bool,
}

impl ParamRange {
    fn new(name: &str, lo: f64, hi: f64, scale: Scale, integer: bool, cost_driving: bool) -> Self {
        assert!(lo < hi, "empty range for {name}");
        if scale == Scale::Log {
            assert!(lo > 0.0, "log-scaled range must be strictly positive");
        }
        ParamRange {
            name: name.to_string(),
            lo,
            hi,
            scale,
            integer,
            cost_driving,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo - 1e-12 && v <= self.hi + 1e-12 && (!self.integer || v.fract() == 0.0)
    }
}

/// Parameter ranges for a single learner family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnerSpace {
    pub kind: LearnerKind,
    pub params: Vec<ParamRange>,
}

/// The full space: learner choice plus per-learner ranges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSpace {
    pub learners: Vec<LearnerSpace>,
}

impl SearchSpace {
    pub fn learner(&self, kind: LearnerKind) -> Option<&LearnerSpace> {
        self.learners.iter().find(|l| l.kind == kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceMode {
    SingleGbt,
    Multi,
}

impl std::str::FromStr for SpaceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(SpaceMode::SingleGbt),
            "multi" => Ok(SpaceMode::Multi),
            other => Err(Error::BadRunParam(format!(
                "unknown space mode '{other}' (expected single|multi)"
            ))),
        }
    }
}

fn gbt_space() -> LearnerSpace {
    LearnerSpace {
        kind: LearnerKind::Gbt,
        params: vec![
            ParamRange::new("estimators", 4.0, 512.0, Scale::Log, true, true),
            ParamRange::new("learning_rate", 0.01, 1.0, Scale::Log, false, false),
            ParamRange::new("max_depth", 1.0, 10.0, Scale::Linear, true, true),
            ParamRange::new("min_leaf", 1.0, 64.0, Scale::Log, true, false),
        ],
    }
}

fn logistic_space() -> LearnerSpace {
    LearnerSpace {
        kind: LearnerKind::Logistic,
        params: vec![
            ParamRange::new("l2_reg", 1e-6, 1e2, Scale::Log, false, false),
            ParamRange::new("iterations", 50.0, 2000.0, Scale::Log, true, true),
        ],
    }
}

fn tree_space() -> LearnerSpace {
    LearnerSpace {
        kind: LearnerKind::Tree,
        params: vec![
            ParamRange::new("max_depth", 1.0, 12.0, Scale::Linear, true, true),
            ParamRange::new("min_leaf", 1.0, 64.0, Scale::Log, true, false),
        ],
    }
}

/// The built-in spaces: a single gradient-boosted-trees learner, or three
/// learner families with the learner choice as an extra categorical
/// dimension.
pub fn default_space(mode: SpaceMode) -> SearchSpace {
    match mode {
        SpaceMode::SingleGbt => SearchSpace {
            learners: vec![gbt_space()],
        },
        SpaceMode::Multi => SearchSpace {
            learners: vec![gbt_space(), logistic_space(), tree_space()],
        },
    }
}

/// A parameter assignment; integers are stored as `Int` so that the
/// canonical key is exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
}

impl ParamValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            ParamValue::Int(v) => *v as f64,
            ParamValue::Float(v) => *v,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v:?}"),
        }
    }
}

/// A concrete hyperparameter configuration.
///
/// Identity is the canonical key: learner kind plus name-sorted parameter
/// values rendered with shortest-roundtrip float formatting, so key equality
/// coincides with semantic equality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigPoint {
    pub learner: LearnerKind,
    pub params: BTreeMap<String, ParamValue>,
}

impl ConfigPoint {
    pub fn key(&self) -> String {
        let body: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("{}({})", self.learner, body.join(","))
    }

    pub fn get_f64(&self, name: &str) -> Option<f64> {
        self.params.get(name).map(ParamValue::as_f64)
    }

    pub fn get_usize(&self, name: &str) -> Option<usize> {
        self.params.get(name).map(|v| v.as_f64().round() as usize)
    }

    pub fn gbt(estimators: usize, learning_rate: f64, max_depth: usize, min_leaf: usize) -> Self {
        let mut params = BTreeMap::new();
        params.insert("estimators".into(), ParamValue::Int(estimators as i64));
        params.insert("learning_rate".into(), ParamValue::Float(learning_rate));
        params.insert("max_depth".into(), ParamValue::Int(max_depth as i64));
        params.insert("min_leaf".into(), ParamValue::Int(min_leaf as i64));
        ConfigPoint {
            learner: LearnerKind::Gbt,
            params,
        }
    }

    pub fn logistic(l2_reg: f64, iterations: usize) -> Self {
        let mut params = BTreeMap::new();
        params.insert("l2_reg".into(), ParamValue::Float(l2_reg));
        params.insert("iterations".into(), ParamValue::Int(iterations as i64));
        ConfigPoint {
            learner: LearnerKind::Logistic,
            params,
        }
    }

    pub fn tree(max_depth: usize, min_leaf: usize) -> Self {
        let mut params = BTreeMap::new();
        params.insert("max_depth".into(), ParamValue::Int(max_depth as i64));
        params.insert("min_leaf".into(), ParamValue::Int(min_leaf as i64));
        ConfigPoint {
            learner: LearnerKind::Tree,
            params,
        }
    }

    /// Check that every parameter lies in its declared range.
    pub fn validate(&self, space: &SearchSpace) -> Result<()> {
        let lspace = space
            .learner(self.learner)
            .ok_or_else(|| Error::BadRunParam(format!("learner {} not in space", self.learner)))?;
        for range in &lspace.params {
            let v = self
                .get_f64(&range.name)
                .ok_or_else(|| Error::BadRunParam(format!("missing parameter {}", range.name)))?;
            if !range.contains(v) {
                return Err(Error::BadRunParam(format!(
                    "parameter {}={} outside [{}, {}]",
                    range.name, v, range.lo, range.hi
                )));
            }
        }
        Ok(())
    }
}

impl PartialEq for ConfigPoint {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for ConfigPoint {}

impl std::hash::Hash for ConfigPoint {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_has_one_learner() {
        let s = default_space(SpaceMode::SingleGbt);
        assert_eq!(s.learners.len(), 1);
        assert_eq!(s.learners[0].kind, LearnerKind::Gbt);
    }

    #[test]
    fn multi_mode_has_three_learners_with_ranges() {
        let s = default_space(SpaceMode::Multi);
        assert_eq!(s.learners.len(), 3);
        for l in &s.learners {
            assert!(!l.params.is_empty());
        }
    }

    #[test]
    fn log_ranges_are_positive() {
        for mode in [SpaceMode::SingleGbt, SpaceMode::Multi] {
            for l in default_space(mode).learners {
                for p in l.params {
                    if p.scale == Scale::Log {
                        assert!(p.lo > 0.0, "{} log lower bound", p.name);
                    }
                }
            }
        }
    }

    #[test]
    fn key_is_canonical() {
        let a = ConfigPoint::gbt(16, 0.1, 3, 2);
        let b = ConfigPoint::gbt(16, 0.1, 3, 2);
        let c = ConfigPoint::gbt(16, 0.1000001, 3, 2);
        assert_eq!(a, b);
        assert_eq!(a.key(), b.key());
        assert_ne!(a, c);
    }

    #[test]
    fn validate_flags_out_of_range() {
        let space = default_space(SpaceMode::SingleGbt);
        assert!(ConfigPoint::gbt(16, 0.1, 3, 2).validate(&space).is_ok());
        assert!(ConfigPoint::gbt(1000, 0.1, 3, 2).validate(&space).is_err());
    }
}
