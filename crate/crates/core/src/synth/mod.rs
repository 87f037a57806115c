//! Seeded synthetic ensembles and an independent decision oracle.
//!
//! Each record draws a gold label from the class distribution; each model
//! is right with its per-class accuracy, otherwise it picks a wrong class
//! by the confusion weights (class priors of the other classes unless
//! given). Confidences are uniform within the correct-vote or wrong-vote
//! range. All draws come from one [`SeededRng`] stream in a fixed order,
//! so a spec and seed pin the output exactly.

pub mod arbitrary;
mod oracle;

pub use oracle::oracle_decide;

use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassLabel, ClassRegistry, ModelId, ModelPrediction, PredictionRecord};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AccuracySpec {
    /// One accuracy table shared by every model.
    Shared(IndexMap<ClassLabel, f64>),
    /// One table per model.
    PerModel(Vec<IndexMap<ClassLabel, f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfidenceRegimes {
    pub correct: [f64; 2],
    pub incorrect: [f64; 2],
}

impl Default for ConfidenceRegimes {
    fn default() -> Self {
        ConfidenceRegimes {
            correct: [0.6, 0.99],
            incorrect: [0.3, 0.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub registry: ClassRegistry,
    pub models: usize,
    pub instances: usize,
    pub class_distribution: IndexMap<ClassLabel, f64>,
    pub accuracy: AccuracySpec,
    #[serde(default)]
    pub confidence: ConfidenceRegimes,
    /// Relative weights of wrong labels per gold class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<IndexMap<ClassLabel, IndexMap<ClassLabel, f64>>>,
    /// Emit a full probability distribution with every prediction.
    #[serde(default)]
    pub distributions: bool,
    pub seed: u64,
}

fn probability(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

fn class_vector(
    registry: &ClassRegistry,
    map: &IndexMap<ClassLabel, f64>,
    what: &str,
    required: bool,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; registry.len()];
    let mut seen = vec![false; registry.len()];
    for (k, &v) in map {
        let i = registry
            .index_of(k.as_str())
            .ok_or_else(|| Error::InvariantViolation(format!("{what}: unknown class '{k}'")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvariantViolation(format!(
                "{what}: bad value {v} for '{k}'"
            )));
        }
        out[i] = v;
        seen[i] = true;
    }
    if required {
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InvariantViolation(format!(
                "{what}: no value for class '{}'",
                registry.label(i)
            )));
        }
    }
    Ok(out)
}

/// A validated spec with every table resolved to class indices.
#[derive(Debug, Clone)]
struct Plan {
    class_weights: Vec<f64>,
    accuracy: Vec<Vec<f64>>,
    confusion: Vec<Vec<f64>>,
    model_ids: Vec<ModelId>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        self.plan().map(|_| ())
    }

    fn plan(&self) -> Result<Plan> {
        let r = &self.registry;
        let k = r.len();
        if self.models == 0 {
            return Err(Error::InvariantViolation("models must be >= 1".into()));
        }
        let class_weights = class_vector(r, &self.class_distribution, "class_distribution", false)?;
        let sum: f64 = class_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvariantViolation(format!(
                "class_distribution sums to {sum}"
            )));
        }

        let tables: Vec<&IndexMap<ClassLabel, f64>> = match &self.accuracy {
            AccuracySpec::Shared(t) => vec![t; self.models],
            AccuracySpec::PerModel(ts) => {
                if ts.len() != self.models {
                    return Err(Error::InvariantViolation(format!(
                        "accuracy lists {} models, spec has {}",
                        ts.len(),
                        self.models
                    )));
                }
                ts.iter().collect()
            }
        };
        let accuracy = tables
            .into_iter()
            .map(|t| class_vector(r, t, "accuracy", true))
            .collect::<Result<Vec<_>>>()?;
        if accuracy.iter().flatten().any(|&a| !probability(a)) {
            return Err(Error::InvariantViolation(
                "accuracy values must lie in [0, 1]".into(),
            ));
        }

        for (name, [lo, hi]) in [
            ("correct", self.confidence.correct),
            ("incorrect", self.confidence.incorrect),
        ] {
            if !(probability(lo) && probability(hi) && lo <= hi) {
                return Err(Error::InvariantViolation(format!(
                    "{name} confidence range [{lo}, {hi}] is invalid"
                )));
            }
        }

        let mut confusion = Vec::with_capacity(k);
        for g in 0..k {
            let given = match &self.confusion {
                Some(c) => c
                    .get(r.label(g))
                    .map(|m| class_vector(r, m, "confusion", false))
                    .transpose()?,
                None => None,
            };
            let mut w = given.unwrap_or_else(|| class_weights.clone());
            w[g] = 0.0;
            if w.iter().all(|&x| x == 0.0) {
                w = vec![1.0; k];
                w[g] = 0.0;
            }
            confusion.push(w);
        }
        if let Some(c) = &self.confusion {
            for key in c.keys() {
                if r.index_of(key.as_str()).is_none() {
                    return Err(Error::InvariantViolation(format!(
                        "confusion: unknown class '{key}'"
                    )));
                }
            }
        }

        Ok(Plan {
            class_weights,
            accuracy,
            confusion,
            model_ids: (1..=self.models)
                .map(|i| ModelId::new(Arc::<str>::from(format!("m{i}"))))
                .collect(),
        })
    }

    /// Streams the records without materializing them all.
    pub fn stream(&self) -> Result<SynthStream<'_>> {
        Ok(SynthStream {
            spec: self,
            plan: self.plan()?,
            rng: SeededRng::new(self.seed),
            next: 0,
        })
    }
}

/// Iterator over generated records.
pub struct SynthStream<'a> {
    spec: &'a SynthSpec,
    plan: Plan,
    rng: SeededRng,
    next: usize,
}

impl SynthStream<'_> {
    fn record(&mut self, index: usize) -> PredictionRecord {
        let registry = &self.spec.registry;
        let k = registry.len();
        let plan = &self.plan;
        let rng = &mut self.rng;
        let gold = rng
            .categorical(&plan.class_weights)
            .expect("distribution has mass");

        let mut predictions = Vec::with_capacity(self.spec.models);
        for (m, model) in plan.model_ids.iter().enumerate() {
            let correct = rng.unit() < plan.accuracy[m][gold];
            let label = if correct {
                gold
            } else {
                rng.categorical(&plan.confusion[gold])
                    .expect("confusion row has mass")
            };
            let [lo, hi] = if correct {
                self.spec.confidence.correct
            } else {
                self.spec.confidence.incorrect
            };
            let confidence = rng.uniform(lo, hi);
            let distribution = self.spec.distributions.then(|| {
                let raw: Vec<f64> = (0..k)
                    .map(|c| if c == label { 0.0 } else { rng.unit() })
                    .collect();
                let total: f64 = raw.iter().sum();
                let rest = 1.0 - confidence;
                (0..k)
                    .map(|c| {
                        let p = if c == label {
                            confidence
                        } else if total > 0.0 {
                            rest * raw[c] / total
                        } else {
                            rest / (k - 1) as f64
                        };
                        (registry.label(c).clone(), p)
                    })
                    .collect()
            });
            predictions.push(ModelPrediction {
                model: model.clone(),
                label: registry.label(label).clone(),
                confidence,
                distribution,
            });
        }
        PredictionRecord {
            instance_id: format!("x{index}"),
            gold: Some(registry.label(gold).clone()),
            predictions,
        }
    }
}

impl Iterator for SynthStream<'_> {
    type Item = PredictionRecord;

    fn next(&mut self) -> Option<PredictionRecord> {
        if self.next >= self.spec.instances {
            return None;
        }
        let r = self.record(self.next);
        self.next += 1;
        Some(r)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.spec.instances - self.next;
        (left, Some(left))
    }
}

/// Generates every record of `spec`.
pub fn generate(spec: &SynthSpec) -> Result<Vec<PredictionRecord>> {
    Ok(spec.stream()?.collect())
}
