//! Per-instance vote and confidence statistics shared by every strategy.

use crate::error::{Error, Result};
use crate::model::{ClassRegistry, PredictionRecord};

/// Aggregate statistics of one record, indexed by registry class order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    /// Number of ensemble members `M`.
    pub ensemble_size: usize,
    /// `V(c)`.
    pub votes: Vec<usize>,
    /// Sum of voter confidences per class, in record order.
    pub conf_sum: Vec<f64>,
    /// Max voter confidence per class; 0 without voters.
    pub max_conf: Vec<f64>,
    /// `p̄`, mean confidence over all members.
    pub mean_conf: f64,
    /// `σ_p`, population standard deviation of member confidences.
    pub conf_std: f64,
    /// Class index predicted by each member, in record order.
    pub labels: Vec<usize>,
}

impl EnsembleStats {
    /// `p̄_c`: mean confidence of the voters for `class`, 0 without voters.
    pub fn class_mean_conf(&self, class: usize) -> f64 {
        match self.votes[class] {
            0 => 0.0,
            v => self.conf_sum[class] / v as f64,
        }
    }

    /// `p_c^max`.
    pub fn class_max_conf(&self, class: usize) -> f64 {
        self.max_conf[class]
    }

    pub fn max_votes(&self) -> usize {
        self.votes.iter().copied().max().unwrap_or(0)
    }

    /// `(class, p̄_c, p_c^max)` for each minority class in registry order.
    pub fn minority_summary(&self, registry: &ClassRegistry) -> Vec<(usize, f64, f64)> {
        (0..registry.len())
            .filter(|&c| registry.is_minority(c))
            .map(|c| (c, self.class_mean_conf(c), self.class_max_conf(c)))
            .collect()
    }
}

/// Computes [`EnsembleStats`] for a record already validated against `registry`.
pub fn compute_stats(record: &PredictionRecord, registry: &ClassRegistry) -> Result<EnsembleStats> {
    let k = registry.len();
    let m = record.predictions.len();
    if m == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let mut votes = vec![0usize; k];
    let mut conf_sum = vec![0.0; k];
    let mut max_conf = vec![0.0f64; k];
    let mut labels = Vec::with_capacity(m);
    let mut total = 0.0;

    for p in &record.predictions {
        let c = registry
            .index_of(p.label.as_str())
            .ok_or_else(|| Error::UnknownLabel(p.label.to_string()))?;
        votes[c] += 1;
        conf_sum[c] += p.confidence;
        max_conf[c] = max_conf[c].max(p.confidence);
        labels.push(c);
        total += p.confidence;
    }

    let mean_conf = total / m as f64;
    let variance = record
        .predictions
        .iter()
        .map(|p| (p.confidence - mean_conf).powi(2))
        .sum::<f64>()
        / m as f64;

    Ok(EnsembleStats {
        ensemble_size: m,
        votes,
        conf_sum,
        max_conf,
        mean_conf,
        conf_std: variance.sqrt(),
        labels,
    })
}
