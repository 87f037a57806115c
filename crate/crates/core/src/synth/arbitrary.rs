//! Adversarial inputs for cross-checking: random records and configs that
//! often land exactly on thresholds, and exhaustive grids of small records.

use crate::config::{CamoConfig, ClassParam};
use crate::model::{ClassLabel, ClassRegistry, ModelPrediction, PredictionRecord};
use crate::rng::SeededRng;

/// A confidence that is a multiple of 0.05 about a third of the time, so
/// default thresholds and boost triggers are hit exactly.
fn confidence(rng: &mut SeededRng) -> f64 {
    if rng.below(3) == 0 {
        rng.below(21) as f64 / 20.0
    } else {
        rng.unit()
    }
}

/// A random distribution with `confidence` on `label`.
fn distribution(
    rng: &mut SeededRng,
    registry: &ClassRegistry,
    label: usize,
    conf: f64,
) -> Vec<(ClassLabel, f64)> {
    let k = registry.len();
    let raw: Vec<f64> = (0..k).map(|_| rng.unit()).collect();
    let others: f64 = (0..k).filter(|&c| c != label).map(|c| raw[c]).sum();
    (0..k)
        .map(|c| {
            let p = if c == label {
                conf
            } else if others > 0.0 {
                (1.0 - conf) * raw[c] / others
            } else {
                (1.0 - conf) / (k - 1) as f64
            };
            (registry.label(c).clone(), p)
        })
        .collect()
}

/// A valid record with `models` members and uniformly random labels.
pub fn random_record(
    rng: &mut SeededRng,
    registry: &ClassRegistry,
    models: usize,
    with_distributions: bool,
) -> PredictionRecord {
    let predictions = (0..models)
        .map(|m| {
            let label = rng.below(registry.len());
            let conf = confidence(rng);
            let mut p = ModelPrediction::new(
                format!("m{m}").as_str(),
                registry.label(label).clone(),
                conf,
            );
            if with_distributions {
                p = p.with_distribution(
                    distribution(rng, registry, label, conf)
                        .into_iter()
                        .collect(),
                );
            }
            p
        })
        .collect();
    let gold = registry.label(rng.below(registry.len())).clone();
    PredictionRecord::new(format!("r{}", rng.below(1 << 30)), predictions).with_gold(gold)
}

fn threshold(rng: &mut SeededRng) -> f64 {
    confidence(rng)
}

fn class_param<T: Copy>(
    rng: &mut SeededRng,
    registry: &ClassRegistry,
    mut draw: impl FnMut(&mut SeededRng) -> T,
) -> ClassParam<T> {
    let mut p = ClassParam::global(draw(rng));
    for c in registry.minority() {
        if rng.below(2) == 0 {
            p.set(c.clone(), draw(rng));
        }
    }
    p
}

/// A random configuration that passes [`CamoConfig::validate`] for `registry`.
pub fn random_config(rng: &mut SeededRng, registry: &ClassRegistry) -> CamoConfig {
    let theta1 = class_param(rng, registry, |r| 1 + r.below(3) as u32);
    let mut theta2 = class_param(rng, registry, |r| 1 + r.below(4) as u32);
    // keep theta2 >= theta1 for every class
    theta2.default = theta2.default.max(theta1.default);
    for c in registry.minority() {
        let lo = theta1.get(c.as_str());
        if theta2.get(c.as_str()) < lo {
            theta2.set(c.clone(), lo);
        }
    }
    let beta_base = class_param(rng, registry, |r| 1.0 + r.below(7) as f64 * 0.25);
    let top = beta_base
        .per_class
        .values()
        .copied()
        .fold(beta_base.default, f64::max);
    CamoConfig {
        theta1,
        theta2,
        tau1: class_param(rng, registry, threshold),
        tau2: class_param(rng, registry, threshold),
        tau3: class_param(rng, registry, threshold),
        tau4: class_param(rng, registry, threshold),
        tau5: class_param(rng, registry, threshold),
        tau6: threshold(rng),
        tau7: threshold(rng) * 0.5,
        tau8: class_param(rng, registry, threshold),
        tau9: class_param(rng, registry, threshold),
        beta_max: top + rng.below(5) as f64 * 0.25,
        beta_base,
        alpha: [0; 4].map(|_| rng.below(5) as f64 * 0.125),
        literal_c4: rng.below(2) == 0,
    }
}

/// Every record with 1..=`max_models` members, every label assignment and
/// every confidence on the grid `0, 1/steps, ..., 1`.
pub fn grid_records(
    registry: &ClassRegistry,
    max_models: usize,
    steps: usize,
) -> impl Iterator<Item = PredictionRecord> + '_ {
    let k = registry.len();
    let per_model = k * (steps + 1);
    (1..=max_models).flat_map(move |m| {
        let total = per_model.pow(m as u32);
        (0..total).map(move |mut code| {
            let predictions = (0..m)
                .map(|i| {
                    let slot = code % per_model;
                    code /= per_model;
                    let label = registry.label(slot % k).clone();
                    let conf = (slot / k) as f64 / steps as f64;
                    ModelPrediction::new(format!("m{i}").as_str(), label, conf)
                })
                .collect();
            PredictionRecord::new("grid", predictions)
        })
    })
}
