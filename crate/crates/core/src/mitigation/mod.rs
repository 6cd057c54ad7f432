//! Unfairness mitigation: procedures that take a configuration, training
//! data, and a fairness target and produce a fairness-pushed model.
//!
//! Three methods are provided: the exponentiated-gradient reduction, a
//! grid-search reduction, and threshold post-processing. None of them can
//! guarantee a fair model on every dataset; callers must tolerate mitigated
//! models that remain unfair, especially on held-out validation data.

pub mod eg;
pub mod grid;
pub mod post;
pub(crate) mod reduction;

pub use eg::eg_reduce;
pub use grid::grid_reduce;
pub use post::threshold_postprocess;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fairness::FairnessSpec;
use crate::learners::{ConfigPoint, TrainedModel};

/// Slack added to the threshold when deciding whether a candidate model
/// qualifies on training data.
pub const SLACK_NU: f64 = 0.01;

/// Mitigation method with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Mitigator {
    ExponentiatedGradient {
        rounds: usize,
        bound: f64,
        learning_rate: f64,
    },
    GridSearch {
        grid_size: usize,
        bound: f64,
    },
    ThresholdPostprocess {
        resolution: f64,
    },
}

impl Mitigator {
    pub fn eg_default() -> Self {
        Mitigator::ExponentiatedGradient {
            rounds: 50,
            bound: 100.0,
            learning_rate: 2.0,
        }
    }

    pub fn grid_default() -> Self {
        Mitigator::GridSearch {
            grid_size: 21,
            bound: 2.0,
        }
    }

    pub fn post_default() -> Self {
        Mitigator::ThresholdPostprocess { resolution: 0.02 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mitigator::ExponentiatedGradient { .. } => "eg",
            Mitigator::GridSearch { .. } => "grid",
            Mitigator::ThresholdPostprocess { .. } => "post",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Mitigator::ExponentiatedGradient {
                rounds,
                bound,
                learning_rate,
            } => {
                if rounds < 1 {
                    return Err(Error::BadMitigatorParam("rounds must be >= 1".into()));
                }
                if bound <= 0.0 || learning_rate <= 0.0 {
                    return Err(Error::BadMitigatorParam(
                        "bound and learning rate must be > 0".into(),
                    ));
                }
            }
            Mitigator::GridSearch { grid_size, bound } => {
                if grid_size < 3 || grid_size % 2 == 0 {
                    return Err(Error::BadMitigatorParam(
                        "grid size must be odd and >= 3".into(),
                    ));
                }
                if bound <= 0.0 {
                    return Err(Error::BadMitigatorParam("bound must be > 0".into()));
                }
            }
            Mitigator::ThresholdPostprocess { resolution } => {
                if !(resolution > 0.0 && resolution <= 0.5) {
                    return Err(Error::BadMitigatorParam(
                        "resolution must be in (0, 0.5]".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for Mitigator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eg" => Ok(Mitigator::eg_default()),
            "grid" => Ok(Mitigator::grid_default()),
            "post" => Ok(Mitigator::post_default()),
            other => Err(Error::BadRunParam(format!(
                "unknown mitigator '{other}' (expected eg|grid|post)"
            ))),
        }
    }
}

/// Result of one mitigation call.
#[derive(Debug)]
pub struct MitigationOutcome {
    /// The fairness-pushed model, with its mitigated flag set.
    pub model: TrainedModel,
    /// Disparity of the returned model on the training data.
    pub train_violation: f64,
    /// Number of cost-sensitive oracle (training) calls made.
    pub oracle_calls: usize,
    /// False when no candidate met delta + nu and the minimal-violation
    /// fallback was returned.
    pub met_constraint: bool,
}

/// Dispatch to the selected mitigation procedure. Deterministic given the
/// inputs; mitigation failures to reach the threshold are not errors.
pub fn mitigate(
    kind: &Mitigator,
    c: &ConfigPoint,
    d_train: &Dataset,
    spec: &FairnessSpec,
) -> Result<MitigationOutcome> {
    kind.validate()?;
    match *kind {
        Mitigator::ExponentiatedGradient {
            rounds,
            bound,
            learning_rate,
        } => eg_reduce(c, d_train, spec, rounds, bound, learning_rate),
        Mitigator::GridSearch { grid_size, bound } => {
            grid_reduce(c, d_train, spec, grid_size, bound)
        }
        Mitigator::ThresholdPostprocess { resolution } => {
            threshold_postprocess(c, d_train, spec, resolution)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_synthetic_biased;
    use crate::fairness::{assess, Metric};

    #[test]
    fn validate_rejects_bad_params() {
        assert!(Mitigator::ExponentiatedGradient {
            rounds: 0,
            bound: 1.0,
            learning_rate: 1.0
        }
        .validate()
        .is_err());
        assert!(Mitigator::GridSearch {
            grid_size: 4,
            bound: 1.0
        }
        .validate()
        .is_err());
        assert!(Mitigator::ThresholdPostprocess { resolution: 0.6 }
            .validate()
            .is_err());
        assert!(Mitigator::eg_default().validate().is_ok());
    }

    #[test]
    fn parse_names() {
        assert_eq!("eg".parse::<Mitigator>().unwrap(), Mitigator::eg_default());
        assert_eq!(
            "grid".parse::<Mitigator>().unwrap(),
            Mitigator::grid_default()
        );
        assert_eq!(
            "post".parse::<Mitigator>().unwrap(),
            Mitigator::post_default()
        );
        assert!("xyz".parse::<Mitigator>().is_err());
    }

    #[test]
    fn already_fair_data_stays_fair() {
        // Unbiased fixture: the unmitigated model is already fair, so every
        // mitigator returns a model no worse than disparity + nu.
        let d = make_synthetic_biased(400, 0.0, 7).unwrap();
        let spec = FairnessSpec::new(Metric::Dp, "s", 0.05).unwrap();
        let c = ConfigPoint::logistic(1e-4, 300);
        let plain = crate::learners::train(&c, &d, None, None).unwrap();
        let base = assess(&plain, &d, &spec).unwrap();
        for kind in [
            Mitigator::ExponentiatedGradient {
                rounds: 10,
                bound: 100.0,
                learning_rate: 2.0,
            },
            Mitigator::grid_default(),
            Mitigator::post_default(),
        ] {
            let out = mitigate(&kind, &c, &d, &spec).unwrap();
            assert!(
                out.train_violation <= base.disparity + SLACK_NU + 1e-9,
                "{}: {} vs base {}",
                kind.name(),
                out.train_violation,
                base.disparity
            );
            assert!(out.model.mitigated);
        }
    }

    #[test]
    fn eo_with_empty_cell_errors() {
        let mut d = make_synthetic_biased(200, 0.1, 3).unwrap();
        // Erase all positive labels in group 1.
        for i in 0..d.rows() {
            if d.sensitive[i] == 1 {
                d.labels[i] = 0;
            }
        }
        let spec = FairnessSpec::new(Metric::Eo, "s", 0.05).unwrap();
        let c = ConfigPoint::logistic(1e-4, 100);
        assert!(mitigate(&Mitigator::eg_default(), &c, &d, &spec).is_err());
    }
}
