//! Stacked generalization: a multinomial logistic combiner over the
//! members' confidence-scaled one-hot votes.
//!
//! Features are laid out model by model in sorted model-id order, `K`
//! slots per model, plus a trailing bias. Training is full-batch gradient
//! descent on softmax cross-entropy from zero weights.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::engine::Decision;
use crate::error::{Error, Result};
use crate::model::{ClassLabel, ClassRegistry, ModelId, PredictionRecord};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaParams {
    #[serde(default = "MetaParams::default_epochs")]
    pub epochs: usize,
    #[serde(default = "MetaParams::default_learning_rate")]
    pub learning_rate: f64,
    /// Folds used when predictions are cross-fitted on the evaluation set.
    #[serde(default = "MetaParams::default_folds")]
    pub folds: usize,
}

impl MetaParams {
    fn default_epochs() -> usize {
        500
    }
    fn default_learning_rate() -> f64 {
        0.1
    }
    fn default_folds() -> usize {
        5
    }
}

impl Default for MetaParams {
    fn default() -> Self {
        MetaParams {
            epochs: Self::default_epochs(),
            learning_rate: Self::default_learning_rate(),
            folds: Self::default_folds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub records: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub final_loss: f64,
}

/// A fitted combiner. `weights[k]` holds class `k`'s coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaModel {
    pub classes: Vec<ClassLabel>,
    pub models: Vec<ModelId>,
    pub weights: Vec<Vec<f64>>,
    pub training: TrainingInfo,
}

struct FeatureLayout<'a> {
    models: &'a [ModelId],
    classes: usize,
}

impl FeatureLayout<'_> {
    fn width(&self) -> usize {
        self.models.len() * self.classes + 1
    }

    fn encode(
        &self,
        record: &PredictionRecord,
        registry: &ClassRegistry,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        if record.predictions.len() != self.models.len() {
            return Err(Error::InconsistentEnsembleSize {
                expected: self.models.len(),
                found: record.predictions.len(),
            });
        }
        out.clear();
        out.resize(self.width(), 0.0);
        for p in &record.predictions {
            let slot = self
                .models
                .binary_search(&p.model)
                .map_err(|_| Error::ModelMismatch(format!("unexpected model '{}'", p.model)))?;
            let c = registry
                .index_of(p.label.as_str())
                .ok_or_else(|| Error::UnknownLabel(p.label.to_string()))?;
            out[slot * self.classes + c] = p.confidence;
        }
        *out.last_mut().unwrap() = 1.0;
        Ok(())
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

fn sorted_model_ids(record: &PredictionRecord) -> Result<Vec<ModelId>> {
    let mut ids: Vec<ModelId> = record.predictions.iter().map(|p| p.model.clone()).collect();
    ids.sort();
    let unique: HashSet<_> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(Error::ModelMismatch("duplicate model id".into()));
    }
    Ok(ids)
}

impl MetaModel {
    /// Fits the combiner on records that all carry gold labels and the same model set.
    pub fn fit(
        training: &[PredictionRecord],
        registry: &ClassRegistry,
        params: &MetaParams,
        seed: u64,
    ) -> Result<Self> {
        let first = training.first().ok_or(Error::NoGoldLabels)?;
        if training.iter().all(|r| r.gold.is_none()) {
            return Err(Error::NoGoldLabels);
        }
        let models = sorted_model_ids(first)?;
        let k = registry.len();
        let layout = FeatureLayout {
            models: &models,
            classes: k,
        };
        let width = layout.width();

        let mut features = Vec::with_capacity(training.len() * width);
        let mut targets = Vec::with_capacity(training.len());
        let mut row = Vec::with_capacity(width);
        for r in training {
            let gold = r
                .gold
                .as_ref()
                .ok_or_else(|| Error::MissingGold(r.instance_id.clone()))?;
            let g = registry
                .index_of(gold.as_str())
                .ok_or_else(|| Error::UnknownLabel(gold.to_string()))?;
            layout.encode(r, registry, &mut row)?;
            features.extend_from_slice(&row);
            targets.push(g);
        }

        let n = targets.len();
        let mut weights = vec![vec![0.0; width]; k];
        let mut grad = vec![vec![0.0; width]; k];
        let mut probs = vec![0.0; k];
        let mut loss = 0.0;
        for _ in 0..params.epochs {
            for g in grad.iter_mut() {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            loss = 0.0;
            for (x, &y) in features.chunks_exact(width).zip(&targets) {
                for (p, w) in probs.iter_mut().zip(&weights) {
                    *p = w.iter().zip(x).map(|(a, b)| a * b).sum();
                }
                softmax_in_place(&mut probs);
                loss -= probs[y].max(f64::MIN_POSITIVE).ln();
                for (c, g) in grad.iter_mut().enumerate() {
                    let err = probs[c] - if c == y { 1.0 } else { 0.0 };
                    if err != 0.0 {
                        for (gv, xv) in g.iter_mut().zip(x) {
                            *gv += err * xv;
                        }
                    }
                }
            }
            let step = params.learning_rate / n as f64;
            for (w, g) in weights.iter_mut().zip(&grad) {
                for (wv, gv) in w.iter_mut().zip(g) {
                    *wv -= step * gv;
                }
            }
            loss /= n as f64;
        }

        Ok(MetaModel {
            classes: registry.classes().to_vec(),
            models,
            weights,
            training: TrainingInfo {
                records: n,
                epochs: params.epochs,
                learning_rate: params.learning_rate,
                seed,
                final_loss: loss,
            },
        })
    }

    /// Combiner output for one record; scores are the class probabilities.
    pub fn predict(&self, record: &PredictionRecord, registry: &ClassRegistry) -> Result<Decision> {
        if registry.classes() != self.classes.as_slice() {
            return Err(Error::ModelMismatch(
                "meta model was fitted on another class registry".into(),
            ));
        }
        let layout = FeatureLayout {
            models: &self.models,
            classes: registry.len(),
        };
        let mut x = Vec::with_capacity(layout.width());
        layout.encode(record, registry, &mut x)?;
        let mut probs: Vec<f64> = self
            .weights
            .iter()
            .map(|w| w.iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        softmax_in_place(&mut probs);
        let mut best = 0;
        for c in 1..probs.len() {
            if probs[c] > probs[best] {
                best = c;
            }
        }
        Ok(Decision::with_scores(
            registry.label(best).clone(),
            registry,
            &probs,
        ))
    }
}

/// Predicts every record with a combiner that never saw it: records are
/// shuffled into `params.folds` folds under `seed`, and each fold is
/// predicted by a model fitted on the others. With fewer than two records
/// the single model is fitted and evaluated in-sample.
pub fn cross_fit_predict(
    records: &[PredictionRecord],
    registry: &ClassRegistry,
    params: &MetaParams,
    seed: u64,
) -> Result<Vec<Decision>> {
    let n = records.len();
    let folds = params.folds.min(n);
    if folds < 2 {
        let model = MetaModel::fit(records, registry, params, seed)?;
        return records.iter().map(|r| model.predict(r, registry)).collect();
    }
    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::new(seed).shuffle(&mut order);
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }

    let mut out: Vec<Option<Decision>> = vec![None; n];
    for f in 0..folds {
        let train: Vec<PredictionRecord> = (0..n)
            .filter(|&i| fold_of[i] != f)
            .map(|i| records[i].clone())
            .collect();
        let model = MetaModel::fit(&train, registry, params, seed)?;
        for i in (0..n).filter(|&i| fold_of[i] == f) {
            out[i] = Some(model.predict(&records[i], registry)?);
        }
    }
    Ok(out
        .into_iter()
        .map(|d| d.expect("every record belongs to a fold"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelPrediction;

    fn abc() -> ClassRegistry {
        ClassRegistry::new(["A", "B", "C"], ["C"], None).unwrap()
    }

    fn rec(id: usize, gold: &str, preds: [(&str, f64); 3]) -> PredictionRecord {
        PredictionRecord::new(
            format!("r{id}"),
            preds
                .iter()
                .enumerate()
                .map(|(i, &(l, c))| ModelPrediction::new(format!("m{i}").as_str(), l, c))
                .collect(),
        )
        .with_gold(gold)
    }

    fn oracle_model_data() -> Vec<PredictionRecord> {
        // m0 is always right; m1 and m2 echo a rotating wrong class
        let names = ["A", "B", "C"];
        (0..60)
            .map(|i| {
                let g = names[i % 3];
                let w = names[(i + 1 + i / 3 % 2) % 3];
                rec(i, g, [(g, 0.6), (w, 0.9), (w, 0.8)])
            })
            .collect()
    }

    #[test]
    fn learns_the_reliable_member() {
        let data = oracle_model_data();
        let r = abc();
        let m = MetaModel::fit(&data, &r, &MetaParams::default(), 1).unwrap();
        let correct = data
            .iter()
            .filter(|x| m.predict(x, &r).unwrap().label == *x.gold.as_ref().unwrap())
            .count();
        assert_eq!(correct, data.len());
    }

    #[test]
    fn single_class_training_predicts_that_class() {
        let r = abc();
        let data: Vec<_> = (0..10)
            .map(|i| rec(i, "B", [("A", 0.9), ("C", 0.7), ("A", 0.5)]))
            .collect();
        let m = MetaModel::fit(&data, &r, &MetaParams::default(), 0).unwrap();
        let probe = rec(99, "A", [("C", 1.0), ("C", 1.0), ("A", 0.2)]);
        assert_eq!(m.predict(&probe, &r).unwrap().label.as_str(), "B");
    }

    #[test]
    fn fit_errors() {
        let r = abc();
        assert_eq!(
            MetaModel::fit(&[], &r, &MetaParams::default(), 0),
            Err(Error::NoGoldLabels)
        );
        let mut x = rec(0, "A", [("A", 0.5); 3]);
        x.gold = None;
        assert_eq!(
            MetaModel::fit(&[x], &r, &MetaParams::default(), 0),
            Err(Error::NoGoldLabels)
        );
        let a = rec(0, "A", [("A", 0.5); 3]);
        let mut b = rec(1, "A", [("A", 0.5); 3]);
        b.predictions.pop();
        assert!(matches!(
            MetaModel::fit(&[a, b], &r, &MetaParams::default(), 0),
            Err(Error::InconsistentEnsembleSize { .. })
        ));
    }

    #[test]
    fn model_order_does_not_matter() {
        let data = oracle_model_data();
        let r = abc();
        let m = MetaModel::fit(&data, &r, &MetaParams::default(), 1).unwrap();
        for x in &data {
            let mut y = x.clone();
            y.predictions.reverse();
            assert_eq!(m.predict(x, &r).unwrap(), m.predict(&y, &r).unwrap());
        }
    }

    #[test]
    fn cross_fit_is_deterministic() {
        let data = oracle_model_data();
        let r = abc();
        let p = MetaParams {
            epochs: 100,
            ..MetaParams::default()
        };
        let a = cross_fit_predict(&data, &r, &p, 9).unwrap();
        let b = cross_fit_predict(&data, &r, &p, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), data.len());
    }

    #[test]
    fn serializes() {
        let r = abc();
        let m = MetaModel::fit(
            &oracle_model_data(),
            &r,
            &MetaParams {
                epochs: 5,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<MetaModel>(&s).unwrap(), m);
    }
}
