//! Shared fixtures for the aggregation benchmarks.

use camo_core::synth::{generate, AccuracySpec, ConfidenceRegimes, SynthSpec};
use camo_core::{ClassLabel, ClassRegistry, PredictionRecord};

/// A skewed three-class workload: priors 0.79 / 0.14 / 0.07, `models`
/// models at 80% accuracy, distributions included.
pub fn workload(
    models: usize,
    instances: usize,
    seed: u64,
) -> (ClassRegistry, Vec<PredictionRecord>) {
    let priors = [("Yes", 0.79), ("No", 0.14), ("To some extent", 0.07)];
    let registry = ClassRegistry::new(
        priors.iter().map(|p| p.0),
        ["To some extent"],
        Some(
            priors
                .iter()
                .map(|&(c, p)| (ClassLabel::from(c), p))
                .collect(),
        ),
    )
    .expect("valid registry");
    let spec = SynthSpec {
        class_distribution: priors
            .iter()
            .map(|&(c, p)| (ClassLabel::from(c), p))
            .collect(),
        accuracy: AccuracySpec::Shared(
            priors
                .iter()
                .map(|&(c, _)| (ClassLabel::from(c), 0.8))
                .collect(),
        ),
        registry: registry.clone(),
        models,
        instances,
        confidence: ConfidenceRegimes::default(),
        confusion: None,
        distributions: true,
        seed,
    };
    (registry, generate(&spec).expect("valid spec"))
}
