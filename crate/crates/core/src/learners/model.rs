//! Trained model representation: base learners, probability mixtures
//! produced by reduction-based mitigation, and per-group decision rules
//! produced by threshold post-processing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::gbt::GbtModel;
use crate::learners::logistic::LogisticModel;
use crate::learners::space::LearnerKind;
use crate::learners::tree::DecisionTree;
use crate::matrix::Matrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Decision rule applied to base scores for one sensitive group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum GroupRule {
    /// Deterministic: decide 1 iff score >= threshold.
    Threshold(f64),
    /// Randomized mixture of two thresholds, evaluated in expectation:
    /// weight * 1{s >= low} + (1 - weight) * 1{s >= high}.
    Randomized { low: f64, high: f64, weight: f64 },
}

impl GroupRule {
    pub fn expected_decision(&self, score: f64) -> f64 {
        match self {
            GroupRule::Threshold(t) => f64::from(score >= *t),
            GroupRule::Randomized { low, high, weight } => {
                weight * f64::from(score >= *low) + (1.0 - weight) * f64::from(score >= *high)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ModelCore {
    /// Constant predictor returned for degenerate single-class training.
    Constant { score: f64 },
    Logistic(LogisticModel),
    Tree(DecisionTree),
    Gbt(GbtModel),
    /// Probability mixture over member models; weights sum to 1.
    Mixture {
        weights: Vec<f64>,
        members: Vec<ModelCore>,
    },
    /// Base model plus a per-group decision rule (indexed by group id).
    GroupThreshold {
        base: Box<ModelCore>,
        rules: Vec<GroupRule>,
    },
}

impl ModelCore {
    /// Raw score in [0,1]. For mixtures this is the weight-averaged member
    /// decision (the expected positive probability of the randomized
    /// classifier). Group-rule models need group metadata and fail here.
    fn score_row(&self, row: &[f64]) -> Result<f64> {
        match self {
            ModelCore::Constant { score } => Ok(*score),
            ModelCore::Logistic(m) => Ok(m.score_row(row)),
            ModelCore::Tree(t) => Ok(t.predict_row(row)),
            ModelCore::Gbt(m) => Ok(m.score_row(row)),
            ModelCore::Mixture { weights, members } => {
                let mut s = 0.0;
                for (w, m) in weights.iter().zip(members) {
                    s += w * f64::from(m.score_row(row)? >= 0.5);
                }
                Ok(s)
            }
            ModelCore::GroupThreshold { .. } => Err(Error::NeedsGroups),
        }
    }

    /// Expected decision at the default 0.5 threshold: hard 0/1 for
    /// deterministic models, fractional for randomized ones.
    fn expected_row(&self, row: &[f64], group: Option<usize>) -> Result<f64> {
        match self {
            ModelCore::Mixture { .. } => self.score_row(row),
            ModelCore::GroupThreshold { base, rules } => {
                let g = group.ok_or(Error::NeedsGroups)?;
                let s = base.score_row(row)?;
                Ok(rules
                    .get(g)
                    .ok_or(Error::EmptyGroup { group: g })?
                    .expected_decision(s))
            }
            _ => Ok(f64::from(self.score_row(row)? >= 0.5)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub core: ModelCore,
    pub learner: LearnerKind,
    /// Mitigation flag m: true when produced by an unfairness-mitigation
    /// procedure.
    pub mitigated: bool,
    /// Set when training collapsed to a single effective class.
    pub degenerate: bool,
    /// Feature count seen at training time.
    pub features: usize,
}

impl TrainedModel {
    fn check_dims(&self, x: &Matrix) -> Result<()> {
        if x.rows() > 0 && x.cols() != self.features {
            return Err(Error::DimensionMismatch {
                expected: self.features,
                got: x.cols(),
            });
        }
        Ok(())
    }

    /// Score in [0,1] per row.
    pub fn predict_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        x.iter_rows()
            .take(x.rows())
            .map(|row| self.core.score_row(row))
            .collect()
    }

    /// Hard decisions: 1 iff score >= threshold (ties go to class 1).
    pub fn predict(&self, x: &Matrix, threshold: f64) -> Result<Vec<u8>> {
        Ok(self
            .predict_scores(x)?
            .into_iter()
            .map(|s| u8::from(s >= threshold))
            .collect())
    }

    /// Expected decisions at threshold 0.5; randomized classifiers are
    /// evaluated in expectation, never by sampling. Group metadata is
    /// required by per-group rule models.
    pub fn expected_decisions(&self, x: &Matrix, groups: Option<&[usize]>) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        if let Some(g) = groups {
            if g.len() != x.rows() {
                return Err(Error::LengthMismatch(
                    "groups length must match feature rows".into(),
                ));
            }
        }
        (0..x.rows())
            .map(|r| self.core.expected_row(x.row(r), groups.map(|g| g[r])))
            .collect()
    }

    /// Versioned structured-text serialization.
    pub fn to_json(&self) -> String {
        let envelope = serde_json::json!({
            "version": MODEL_FORMAT_VERSION,
            "model": self,
        });
        serde_json::to_string(&envelope).expect("model serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Envelope {
            version: u32,
            model: TrainedModel,
        }
        let env: Envelope = serde_json::from_str(text)?;
        if env.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion(env.version));
        }
        Ok(env.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(score: f64) -> ModelCore {
        ModelCore::Constant { score }
    }

    #[test]
    fn mixture_scores_average_member_decisions() {
        let m = TrainedModel {
            core: ModelCore::Mixture {
                weights: vec![0.5, 0.5],
                members: vec![constant(1.0), constant(0.0)],
            },
            learner: LearnerKind::Logistic,
            mitigated: true,
            degenerate: false,
            features: 1,
        };
        let x = Matrix::from_rows(&[vec![0.0]]);
        assert_eq!(m.predict_scores(&x).unwrap(), vec![0.5]);
    }

    #[test]
    fn threshold_tie_goes_to_one() {
        let m = TrainedModel {
            core: constant(0.5),
            learner: LearnerKind::Logistic,
            mitigated: false,
            degenerate: false,
            features: 1,
        };
        let x = Matrix::from_rows(&[vec![0.0]]);
        assert_eq!(m.predict(&x, 0.5).unwrap(), vec![1]);
        // Threshold above any attainable score selects nothing.
        assert_eq!(m.predict(&x, 1.1).unwrap(), vec![0]);
    }

    #[test]
    fn empty_matrix_gives_empty_scores() {
        let m = TrainedModel {
            core: constant(0.3),
            learner: LearnerKind::Logistic,
            mitigated: false,
            degenerate: false,
            features: 2,
        };
        let x = Matrix::zeros(0, 2);
        assert!(m.predict_scores(&x).unwrap().is_empty());
    }

    #[test]
    fn group_rules_need_groups() {
        let m = TrainedModel {
            core: ModelCore::GroupThreshold {
                base: Box::new(constant(0.6)),
                rules: vec![GroupRule::Threshold(0.5), GroupRule::Threshold(0.7)],
            },
            learner: LearnerKind::Logistic,
            mitigated: true,
            degenerate: false,
            features: 1,
        };
        let x = Matrix::from_rows(&[vec![0.0], vec![0.0]]);
        assert!(matches!(m.predict_scores(&x), Err(Error::NeedsGroups)));
        let e = m.expected_decisions(&x, Some(&[0, 1])).unwrap();
        assert_eq!(e, vec![1.0, 0.0]);
    }

    #[test]
    fn randomized_rule_is_evaluated_in_expectation() {
        let rule = GroupRule::Randomized {
            low: 0.3,
            high: 0.8,
            weight: 0.25,
        };
        assert_eq!(rule.expected_decision(0.5), 0.25);
        assert_eq!(rule.expected_decision(0.9), 1.0);
        assert_eq!(rule.expected_decision(0.1), 0.0);
    }

    #[test]
    fn json_roundtrip_preserves_decisions() {
        let m = TrainedModel {
            core: ModelCore::Mixture {
                weights: vec![0.25, 0.75],
                members: vec![constant(1.0), constant(0.0)],
            },
            learner: LearnerKind::Gbt,
            mitigated: true,
            degenerate: false,
            features: 1,
        };
        let back = TrainedModel::from_json(&m.to_json()).unwrap();
        let x = Matrix::from_rows(&[vec![0.0]]);
        assert_eq!(
            m.predict_scores(&x).unwrap(),
            back.predict_scores(&x).unwrap()
        );
    }
}
