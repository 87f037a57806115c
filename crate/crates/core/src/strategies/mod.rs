//! Ensemble strategies behind one interface: CAMO plus six baselines.

mod meta;
mod voting;

pub use meta::{cross_fit_predict, MetaModel, MetaParams, TrainingInfo};
pub use voting::{
    class_balanced, confidence_weighted, dynamic_threshold, entropy_weight, majority_vote,
    uncertainty_aware,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::CamoConfig;
use crate::engine::{CamoEngine, Decision};
use crate::error::{Error, Result};
use crate::model::{ClassRegistry, PredictionRecord};
use crate::stats::EnsembleStats;

pub const DEFAULT_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyId {
    MajorityVote,
    ConfidenceWeighted,
    ClassBalanced,
    DynamicThreshold,
    UncertaintyAware,
    MetaEnsemble,
    Camo,
}

impl StrategyId {
    pub const ALL: [StrategyId; 7] = [
        StrategyId::MajorityVote,
        StrategyId::ConfidenceWeighted,
        StrategyId::ClassBalanced,
        StrategyId::DynamicThreshold,
        StrategyId::UncertaintyAware,
        StrategyId::MetaEnsemble,
        StrategyId::Camo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyId::MajorityVote => "majority_vote",
            StrategyId::ConfidenceWeighted => "confidence_weighted",
            StrategyId::ClassBalanced => "class_balanced",
            StrategyId::DynamicThreshold => "dynamic_threshold",
            StrategyId::UncertaintyAware => "uncertainty_aware",
            StrategyId::MetaEnsemble => "meta_ensemble",
            StrategyId::Camo => "camo",
        }
    }

    pub fn valid_ids() -> String {
        Self::ALL.map(StrategyId::as_str).join(", ")
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                Error::UnknownKey(format!("strategy '{s}' (valid: {})", Self::valid_ids()))
            })
    }
}

/// A strategy with its parameters, as listed in a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub id: StrategyId,
    /// `dynamic_threshold` margin per ensemble member.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<MetaParams>,
    /// Path of a fitted meta model; without it the meta-ensemble is cross-fitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

impl StrategySpec {
    pub fn new(id: StrategyId) -> Self {
        StrategySpec {
            id,
            margin: None,
            meta: None,
            model: None,
        }
    }

    pub fn margin(&self) -> f64 {
        self.margin.unwrap_or(DEFAULT_MARGIN)
    }

    pub fn meta_params(&self) -> MetaParams {
        self.meta.unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.margin {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::InvariantViolation(format!(
                    "margin must be >= 0, got {m}"
                )));
            }
            if self.id != StrategyId::DynamicThreshold {
                return Err(Error::UnknownKey(format!(
                    "margin is not a parameter of {}",
                    self.id
                )));
            }
        }
        if (self.meta.is_some() || self.model.is_some()) && self.id != StrategyId::MetaEnsemble {
            return Err(Error::UnknownKey(format!(
                "meta parameters given for {}",
                self.id
            )));
        }
        if let Some(p) = self.meta {
            if !(p.learning_rate.is_finite() && p.learning_rate > 0.0) {
                return Err(Error::InvariantViolation(
                    "meta learning_rate must be > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A ready-to-run strategy.
#[derive(Debug, Clone)]
pub enum Strategy {
    MajorityVote,
    ConfidenceWeighted,
    ClassBalanced,
    DynamicThreshold { margin: f64 },
    UncertaintyAware,
    MetaEnsemble(Option<MetaModel>),
    Camo(Box<CamoEngine>),
}

impl Strategy {
    pub fn id(&self) -> StrategyId {
        match self {
            Strategy::MajorityVote => StrategyId::MajorityVote,
            Strategy::ConfidenceWeighted => StrategyId::ConfidenceWeighted,
            Strategy::ClassBalanced => StrategyId::ClassBalanced,
            Strategy::DynamicThreshold { .. } => StrategyId::DynamicThreshold,
            Strategy::UncertaintyAware => StrategyId::UncertaintyAware,
            Strategy::MetaEnsemble(_) => StrategyId::MetaEnsemble,
            Strategy::Camo(_) => StrategyId::Camo,
        }
    }

    /// Builds the strategy for `spec`. The meta-ensemble comes back unfitted.
    pub fn from_spec(
        spec: &StrategySpec,
        registry: &ClassRegistry,
        camo: &CamoConfig,
    ) -> Result<Strategy> {
        spec.validate()?;
        Ok(match spec.id {
            StrategyId::MajorityVote => Strategy::MajorityVote,
            StrategyId::ConfidenceWeighted => Strategy::ConfidenceWeighted,
            StrategyId::ClassBalanced => {
                if registry.priors().is_none() {
                    return Err(Error::MissingPriors);
                }
                Strategy::ClassBalanced
            }
            StrategyId::DynamicThreshold => Strategy::DynamicThreshold {
                margin: spec.margin(),
            },
            StrategyId::UncertaintyAware => Strategy::UncertaintyAware,
            StrategyId::MetaEnsemble => Strategy::MetaEnsemble(None),
            StrategyId::Camo => {
                Strategy::Camo(Box::new(CamoEngine::new(registry.clone(), camo.clone())?))
            }
        })
    }

    pub fn decide(
        &self,
        record: &PredictionRecord,
        stats: &EnsembleStats,
        registry: &ClassRegistry,
    ) -> Result<Decision> {
        match self {
            Strategy::MajorityVote => Ok(majority_vote(record, stats, registry)),
            Strategy::ConfidenceWeighted => Ok(confidence_weighted(record, stats, registry)),
            Strategy::ClassBalanced => class_balanced(record, stats, registry),
            Strategy::DynamicThreshold { margin } => {
                Ok(dynamic_threshold(record, stats, registry, *margin))
            }
            Strategy::UncertaintyAware => uncertainty_aware(record, stats, registry),
            Strategy::MetaEnsemble(Some(m)) => m.predict(record, registry),
            Strategy::MetaEnsemble(None) => Err(Error::UnfittedMeta),
            Strategy::Camo(engine) => Ok(engine.decide(record, stats)),
        }
    }
}
