//! Domain vocabulary: class labels, the class registry, and per-instance
//! ensemble predictions.

use std::borrow::Borrow;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of class priors.
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-9;
/// Tolerance on distribution sums and on `confidence == distribution[label]`.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

/// A class name. Equality is exact string equality.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(Arc<str>);

impl ClassLabel {
    pub fn new(name: impl Into<Arc<str>>) -> Self {
        ClassLabel(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for ClassLabel {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ClassLabel {
    fn from(s: &str) -> Self {
        ClassLabel::new(s)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

/// Identifier of an ensemble member.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelId(Arc<str>);

impl ModelId {
    pub fn new(name: impl Into<Arc<str>>) -> Self {
        ModelId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ModelId {
    fn from(s: &str) -> Self {
        ModelId::new(s)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

/// Serialized form of a [`ClassRegistry`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryDoc {
    pub classes: Vec<ClassLabel>,
    #[serde(default)]
    pub minority: Vec<ClassLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<IndexMap<ClassLabel, f64>>,
}

/// The ordered class set, its minority subset and optional class priors.
///
/// Classes are addressed by their index in registry order everywhere in the
/// hot path; labels are resolved once per prediction.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "RegistryDoc", into = "RegistryDoc")]
pub struct ClassRegistry {
    classes: Vec<ClassLabel>,
    minority: Vec<bool>,
    priors: Option<Vec<f64>>,
    index: HashMap<ClassLabel, usize>,
    rarity: Vec<usize>,
}

impl ClassRegistry {
    /// Builds a registry. `priors` must name every class exactly once.
    pub fn new<L: Into<ClassLabel>>(
        classes: impl IntoIterator<Item = L>,
        minority: impl IntoIterator<Item = L>,
        priors: Option<Vec<(ClassLabel, f64)>>,
    ) -> Result<Self> {
        let classes: Vec<ClassLabel> = classes.into_iter().map(Into::into).collect();
        if classes.len() < 2 {
            return Err(Error::InvalidRegistry(format!(
                "need at least 2 classes, got {}",
                classes.len()
            )));
        }
        let mut index = HashMap::with_capacity(classes.len());
        for (i, c) in classes.iter().enumerate() {
            if c.as_str().is_empty() {
                return Err(Error::InvalidRegistry("empty class name".into()));
            }
            if index.insert(c.clone(), i).is_some() {
                return Err(Error::InvalidRegistry(format!("duplicate class '{c}'")));
            }
        }

        let mut is_minority = vec![false; classes.len()];
        for m in minority {
            let m: ClassLabel = m.into();
            let i = *index.get(&m).ok_or_else(|| {
                Error::InvalidRegistry(format!("minority class '{m}' is not a registered class"))
            })?;
            if is_minority[i] {
                return Err(Error::InvalidRegistry(format!(
                    "minority class '{m}' listed twice"
                )));
            }
            is_minority[i] = true;
        }
        if is_minority.iter().all(|&m| m) {
            return Err(Error::InvalidRegistry(
                "at least one class must be a majority class".into(),
            ));
        }

        let priors = match priors {
            None => None,
            Some(entries) => {
                let mut values = vec![f64::NAN; classes.len()];
                for (label, p) in entries {
                    let i = *index.get(&label).ok_or_else(|| {
                        Error::InvalidRegistry(format!("prior given for unknown class '{label}'"))
                    })?;
                    if !values[i].is_nan() {
                        return Err(Error::InvalidRegistry(format!(
                            "prior for '{label}' given twice"
                        )));
                    }
                    if !(p.is_finite() && p > 0.0 && p <= 1.0) {
                        return Err(Error::InvalidRegistry(format!(
                            "prior for '{label}' must lie in (0, 1], got {p}"
                        )));
                    }
                    values[i] = p;
                }
                if let Some(i) = values.iter().position(|p| p.is_nan()) {
                    return Err(Error::InvalidRegistry(format!(
                        "no prior given for class '{}'",
                        classes[i]
                    )));
                }
                let sum: f64 = values.iter().sum();
                if (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE {
                    return Err(Error::InvalidRegistry(format!(
                        "priors sum to {sum}, not 1"
                    )));
                }
                Some(values)
            }
        };

        let mut rarity: Vec<usize> = (0..classes.len()).collect();
        if let Some(p) = &priors {
            rarity.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
        }

        Ok(ClassRegistry {
            classes,
            minority: is_minority,
            priors,
            index,
            rarity,
        })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    pub fn label(&self, idx: usize) -> &ClassLabel {
        &self.classes[idx]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// The registry's own copy of `label`, so records can share one allocation per class.
    pub fn intern(&self, label: &str) -> Option<ClassLabel> {
        self.index_of(label).map(|i| self.classes[i].clone())
    }

    pub fn is_minority(&self, idx: usize) -> bool {
        self.minority[idx]
    }

    pub fn minority_mask(&self) -> &[bool] {
        &self.minority
    }

    pub fn minority(&self) -> impl Iterator<Item = &ClassLabel> {
        self.classes
            .iter()
            .zip(&self.minority)
            .filter_map(|(c, &m)| m.then_some(c))
    }

    pub fn has_minority(&self) -> bool {
        self.minority.iter().any(|&m| m)
    }

    pub fn priors(&self) -> Option<&[f64]> {
        self.priors.as_deref()
    }

    /// Every class index, rarest first: ascending prior, ties (and the
    /// no-prior case) in registry order.
    pub fn rarity_order(&self) -> &[usize] {
        &self.rarity
    }

    /// Minority class indices, rarest first.
    pub fn minority_rarest_first(&self) -> Vec<usize> {
        self.rarity
            .iter()
            .copied()
            .filter(|&i| self.minority[i])
            .collect()
    }

    pub fn to_doc(&self) -> RegistryDoc {
        RegistryDoc {
            classes: self.classes.clone(),
            minority: self.minority().cloned().collect(),
            priors: self.priors.as_ref().map(|p| {
                self.classes
                    .iter()
                    .cloned()
                    .zip(p.iter().copied())
                    .collect()
            }),
        }
    }

    /// Same registry with the given minority set.
    pub fn with_minority<L: Into<ClassLabel>>(
        &self,
        minority: impl IntoIterator<Item = L>,
    ) -> Result<Self> {
        ClassRegistry::new(
            self.classes.clone(),
            minority.into_iter().map(Into::into).collect::<Vec<_>>(),
            self.priors.as_ref().map(|p| {
                self.classes
                    .iter()
                    .cloned()
                    .zip(p.iter().copied())
                    .collect()
            }),
        )
    }
}

impl TryFrom<RegistryDoc> for ClassRegistry {
    type Error = Error;

    fn try_from(doc: RegistryDoc) -> Result<Self> {
        ClassRegistry::new(
            doc.classes,
            doc.minority,
            doc.priors.map(|p| p.into_iter().collect()),
        )
    }
}

impl From<ClassRegistry> for RegistryDoc {
    fn from(r: ClassRegistry) -> Self {
        r.to_doc()
    }
}

impl PartialEq for ClassRegistry {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes
            && self.minority == other.minority
            && self.priors == other.priors
    }
}

impl fmt::Debug for ClassRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassRegistry")
            .field("classes", &self.classes)
            .field("minority", &self.minority().collect::<Vec<_>>())
            .field("priors", &self.priors)
            .finish()
    }
}

/// One ensemble member's output for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPrediction {
    pub model: ModelId,
    pub label: ClassLabel,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<IndexMap<ClassLabel, f64>>,
}

impl ModelPrediction {
    pub fn new(model: impl Into<ModelId>, label: impl Into<ClassLabel>, confidence: f64) -> Self {
        ModelPrediction {
            model: model.into(),
            label: label.into(),
            confidence,
            distribution: None,
        }
    }

    pub fn with_distribution(mut self, distribution: IndexMap<ClassLabel, f64>) -> Self {
        self.distribution = Some(distribution);
        self
    }
}

/// All ensemble members' predictions for one instance, plus the gold label when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub instance_id: String,
    #[serde(default)]
    pub gold: Option<ClassLabel>,
    pub predictions: Vec<ModelPrediction>,
}

impl PredictionRecord {
    pub fn new(instance_id: impl Into<String>, predictions: Vec<ModelPrediction>) -> Self {
        PredictionRecord {
            instance_id: instance_id.into(),
            gold: None,
            predictions,
        }
    }

    pub fn with_gold(mut self, gold: impl Into<ClassLabel>) -> Self {
        self.gold = Some(gold.into());
        self
    }

    pub fn ensemble_size(&self) -> usize {
        self.predictions.len()
    }

    /// Checks every record invariant against `registry`.
    pub fn validate(&self, registry: &ClassRegistry) -> Result<()> {
        if self.predictions.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if let Some(gold) = &self.gold {
            if registry.index_of(gold.as_str()).is_none() {
                return Err(Error::UnknownLabel(gold.to_string()));
            }
        }
        let mut seen = HashSet::with_capacity(self.predictions.len());
        for p in &self.predictions {
            if !seen.insert(p.model.as_str()) {
                return Err(Error::DuplicateModel(p.model.to_string()));
            }
            if registry.index_of(p.label.as_str()).is_none() {
                return Err(Error::UnknownLabel(p.label.to_string()));
            }
            if !(0.0..=1.0).contains(&p.confidence) {
                return Err(Error::ConfidenceOutOfRange {
                    model: p.model.to_string(),
                    value: p.confidence,
                });
            }
            if let Some(dist) = &p.distribution {
                validate_distribution(p, dist, registry)?;
            }
        }
        Ok(())
    }

    /// Replaces label allocations with the registry's shared copies.
    pub fn intern_labels(&mut self, registry: &ClassRegistry) {
        let intern = |l: &mut ClassLabel| {
            if let Some(shared) = registry.intern(l.as_str()) {
                *l = shared;
            }
        };
        if let Some(g) = self.gold.as_mut() {
            intern(g);
        }
        for p in &mut self.predictions {
            intern(&mut p.label);
        }
    }
}

fn validate_distribution(
    p: &ModelPrediction,
    dist: &IndexMap<ClassLabel, f64>,
    registry: &ClassRegistry,
) -> Result<()> {
    let bad = |reason: String| Error::BadDistribution {
        model: p.model.to_string(),
        reason,
    };
    for key in dist.keys() {
        if registry.index_of(key.as_str()).is_none() {
            return Err(bad(format!("unknown class '{key}'")));
        }
    }
    if dist.len() != registry.len() {
        return Err(bad(format!(
            "covers {} of {} classes",
            dist.len(),
            registry.len()
        )));
    }
    if let Some((k, v)) = dist.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(bad(format!("probability {v} for '{k}' outside [0, 1]")));
    }
    let sum: f64 = dist.values().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(bad(format!("probabilities sum to {sum}")));
    }
    let at_label = dist[&p.label];
    if (at_label - p.confidence).abs() > DISTRIBUTION_TOLERANCE {
        return Err(bad(format!(
            "confidence {} disagrees with distribution[{}] = {at_label}",
            p.confidence, p.label
        )));
    }
    Ok(())
}

/// Returns `record` unchanged when it satisfies every invariant against `registry`.
pub fn validate_record(
    record: PredictionRecord,
    registry: &ClassRegistry,
) -> Result<PredictionRecord> {
    record.validate(registry)?;
    Ok(record)
}
