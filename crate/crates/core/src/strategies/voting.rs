//! Single-pass voting baselines.

use crate::engine::Decision;
use crate::error::{Error, Result};
use crate::model::{ClassRegistry, PredictionRecord};
use crate::stats::EnsembleStats;

/// Class indices ordered best first: score descending, then mean voter
/// confidence descending, then registry order.
fn ranked(scores: &[f64], stats: &EnsembleStats) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(
                stats
                    .class_mean_conf(b)
                    .total_cmp(&stats.class_mean_conf(a)),
            )
            .then(a.cmp(&b))
    });
    order
}

fn best(scores: &[f64], stats: &EnsembleStats) -> usize {
    let mut best = 0;
    for c in 1..scores.len() {
        let better = match scores[c].total_cmp(&scores[best]) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Equal => stats.class_mean_conf(c) > stats.class_mean_conf(best),
            std::cmp::Ordering::Less => false,
        };
        if better {
            best = c;
        }
    }
    best
}

fn decision(registry: &ClassRegistry, scores: &[f64], stats: &EnsembleStats) -> Decision {
    let c = best(scores, stats);
    Decision::with_scores(registry.label(c).clone(), registry, scores)
}

/// Plurality vote.
pub fn majority_vote(
    _record: &PredictionRecord,
    stats: &EnsembleStats,
    registry: &ClassRegistry,
) -> Decision {
    let scores: Vec<f64> = stats.votes.iter().map(|&v| v as f64).collect();
    decision(registry, &scores, stats)
}

/// Confidence-sum vote using the supplied confidences as weights.
pub fn confidence_weighted(
    _record: &PredictionRecord,
    stats: &EnsembleStats,
    registry: &ClassRegistry,
) -> Decision {
    decision(registry, &stats.conf_sum, stats)
}

/// Confidence-sum vote divided by each class's prior.
pub fn class_balanced(
    _record: &PredictionRecord,
    stats: &EnsembleStats,
    registry: &ClassRegistry,
) -> Result<Decision> {
    let priors = registry.priors().ok_or(Error::MissingPriors)?;
    let scores: Vec<f64> = stats
        .conf_sum
        .iter()
        .zip(priors)
        .map(|(s, p)| s / p)
        .collect();
    Ok(decision(registry, &scores, stats))
}

/// Confidence-weighted vote whose boundary shifts toward a minority
/// runner-up: when a majority class leads a voted minority class by less
/// than `margin` per ensemble member, the minority class wins.
pub fn dynamic_threshold(
    _record: &PredictionRecord,
    stats: &EnsembleStats,
    registry: &ClassRegistry,
    margin: f64,
) -> Decision {
    let scores = &stats.conf_sum;
    let order = ranked(scores, stats);
    let (top, runner_up) = (order[0], order[1]);
    let flip = !registry.is_minority(top)
        && registry.is_minority(runner_up)
        && stats.votes[runner_up] > 0
        && (scores[top] - scores[runner_up]) / (stats.ensemble_size as f64) < margin;
    let c = if flip { runner_up } else { top };
    Decision::with_scores(registry.label(c).clone(), registry, scores)
}

/// `1 - H(p)/ln K` for a distribution over `K` classes, natural log.
pub fn entropy_weight<'a>(probabilities: impl IntoIterator<Item = &'a f64>, classes: usize) -> f64 {
    let h: f64 = probabilities
        .into_iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    (1.0 - h / (classes as f64).ln()).clamp(0.0, 1.0)
}

/// Confidence-sum vote with each member weighted by its normalized
/// distribution entropy. Every prediction must carry a distribution.
pub fn uncertainty_aware(
    record: &PredictionRecord,
    stats: &EnsembleStats,
    registry: &ClassRegistry,
) -> Result<Decision> {
    let mut scores = vec![0.0; registry.len()];
    for (p, &c) in record.predictions.iter().zip(&stats.labels) {
        let dist = p
            .distribution
            .as_ref()
            .ok_or_else(|| Error::MissingDistribution(p.model.to_string()))?;
        scores[c] += entropy_weight(dist.values(), registry.len()) * p.confidence;
    }
    Ok(decision(registry, &scores, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassLabel, ModelPrediction};
    use crate::stats::compute_stats;
    use indexmap::IndexMap;

    fn ab() -> ClassRegistry {
        ClassRegistry::new(["A", "B"], ["B"], None).unwrap()
    }

    fn rec(preds: &[(&str, f64)]) -> PredictionRecord {
        PredictionRecord::new(
            "x",
            preds
                .iter()
                .enumerate()
                .map(|(i, &(l, c))| ModelPrediction::new(format!("m{i}").as_str(), l, c))
                .collect(),
        )
    }

    fn label(d: Decision) -> String {
        d.label.to_string()
    }

    #[test]
    fn majority_vote_cases() {
        let r = ab();
        let go = |p: &[(&str, f64)]| {
            let x = rec(p);
            label(majority_vote(&x, &compute_stats(&x, &r).unwrap(), &r))
        };
        assert_eq!(go(&[("A", 0.5), ("A", 0.5), ("B", 0.9)]), "A");
        assert_eq!(go(&[("A", 0.9), ("B", 0.6)]), "A");
        assert_eq!(go(&[("A", 0.6), ("B", 0.9)]), "B");
        assert_eq!(go(&[("B", 0.1), ("B", 0.2)]), "B");
        // full tie falls back to registry order
        assert_eq!(go(&[("B", 0.5), ("A", 0.5)]), "A");
    }

    #[test]
    fn confidence_weighted_cases() {
        let r = ab();
        let x = rec(&[("A", 0.9), ("B", 0.5), ("B", 0.5)]);
        assert_eq!(
            label(confidence_weighted(&x, &compute_stats(&x, &r).unwrap(), &r)),
            "B"
        );
        let x = rec(&[("B", 0.3)]);
        assert_eq!(
            label(confidence_weighted(&x, &compute_stats(&x, &r).unwrap(), &r)),
            "B"
        );
    }

    #[test]
    fn class_balanced_cases() {
        let r = ClassRegistry::new(
            ["A", "B"],
            ["B"],
            Some(vec![("A".into(), 0.8), ("B".into(), 0.2)]),
        )
        .unwrap();
        let x = rec(&[("A", 0.8), ("B", 0.3)]);
        let d = class_balanced(&x, &compute_stats(&x, &r).unwrap(), &r).unwrap();
        let s = d.scores.clone().unwrap();
        assert!((s["A"] - 1.0).abs() < 1e-12 && (s["B"] - 1.5).abs() < 1e-12);
        assert_eq!(label(d), "B");
        let r = ab();
        assert_eq!(
            class_balanced(&x, &compute_stats(&x, &r).unwrap(), &r),
            Err(Error::MissingPriors)
        );
    }

    #[test]
    fn dynamic_threshold_cases() {
        let r = ab();
        let x = rec(&[("A", 0.9), ("A", 0.9), ("A", 0.9), ("B", 0.1)]);
        assert_eq!(
            label(dynamic_threshold(
                &x,
                &compute_stats(&x, &r).unwrap(),
                &r,
                0.1
            )),
            "A"
        );
        // 1.02 vs 0.98 over 5 members
        let x = rec(&[
            ("A", 0.52),
            ("A", 0.50),
            ("B", 0.49),
            ("B", 0.49),
            ("A", 0.0),
        ]);
        assert_eq!(
            label(dynamic_threshold(
                &x,
                &compute_stats(&x, &r).unwrap(),
                &r,
                0.1
            )),
            "B"
        );
        let x = rec(&[("B", 0.9), ("A", 0.85)]);
        assert_eq!(
            label(dynamic_threshold(
                &x,
                &compute_stats(&x, &r).unwrap(),
                &r,
                0.1
            )),
            "B"
        );
        // an unvoted minority class is never promoted
        let x = rec(&[("A", 0.05), ("A", 0.05)]);
        assert_eq!(
            label(dynamic_threshold(
                &x,
                &compute_stats(&x, &r).unwrap(),
                &r,
                0.1
            )),
            "A"
        );
    }

    fn dist(pairs: &[(&str, f64)]) -> IndexMap<ClassLabel, f64> {
        pairs
            .iter()
            .map(|&(k, v)| (ClassLabel::from(k), v))
            .collect()
    }

    #[test]
    fn entropy_weights() {
        let w = entropy_weight(&[0.7, 0.2, 0.1], 3);
        let h = -(0.7f64 * 0.7f64.ln() + 0.2 * 0.2f64.ln() + 0.1 * 0.1f64.ln());
        assert!((h - 0.8018).abs() < 1e-4);
        assert!((w - (1.0 - h / 3f64.ln())).abs() < 1e-12);
        assert!((w - 0.2702).abs() < 1e-4);
        assert_eq!(entropy_weight(&[1.0, 0.0, 0.0], 3), 1.0);
        assert!(entropy_weight(&[1.0 / 3.0; 3], 3) < 1e-12);
    }

    #[test]
    fn uncertain_voter_contributes_nothing() {
        let r = ab();
        let x = PredictionRecord::new(
            "x",
            vec![
                ModelPrediction::new("m1", "A", 0.5)
                    .with_distribution(dist(&[("A", 0.5), ("B", 0.5)])),
                ModelPrediction::new("m2", "B", 0.2)
                    .with_distribution(dist(&[("A", 0.8), ("B", 0.2)])),
            ],
        );
        let d = uncertainty_aware(&x, &compute_stats(&x, &r).unwrap(), &r).unwrap();
        assert_eq!(d.scores.as_ref().unwrap()["A"], 0.0);
        assert_eq!(label(d), "B");
        let bare = rec(&[("A", 0.5)]);
        assert_eq!(
            uncertainty_aware(&bare, &compute_stats(&bare, &r).unwrap(), &r),
            Err(Error::MissingDistribution("m0".into()))
        );
    }
}
