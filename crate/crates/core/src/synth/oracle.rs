//! A deliberately plain restatement of the staged CAMO rule, kept apart
//! from the engine: string lookups, no precomputed thresholds or orders.
//! Used to cross-check the engine.

use crate::config::CamoConfig;
use crate::engine::{Decision, Stage};
use crate::model::{ClassLabel, ClassRegistry, PredictionRecord};

struct ClassView {
    name: ClassLabel,
    position: usize,
    prior: f64,
    minority: bool,
    votes: usize,
    conf_sum: f64,
    mean: f64,
    max: f64,
}

fn rarer(a: &ClassView, b: &ClassView) -> std::cmp::Ordering {
    a.prior
        .total_cmp(&b.prior)
        .then(a.position.cmp(&b.position))
}

fn boost(config: &CamoConfig, class: &str, votes: usize, mean: f64) -> f64 {
    let conditions = [votes >= 2, votes >= 3, mean < 0.7, mean < 0.6];
    let mut bonus = 0.0;
    for (holds, alpha) in conditions.iter().zip(config.alpha) {
        if *holds {
            bonus += alpha;
        }
    }
    (config.beta_base.get(class) + bonus).min(config.beta_max)
}

/// Decides `record` from first principles. Assumes a validated record.
pub fn oracle_decide(
    record: &PredictionRecord,
    registry: &ClassRegistry,
    config: &CamoConfig,
) -> Decision {
    let m = record.predictions.len();
    let mut total = 0.0;
    for p in &record.predictions {
        total += p.confidence;
    }
    let mean = total / m as f64;
    let mut squares = 0.0;
    for p in &record.predictions {
        let d = p.confidence - mean;
        squares += d * d;
    }
    let spread = (squares / m as f64).sqrt();

    let mut classes: Vec<ClassView> = Vec::new();
    for (position, name) in registry.classes().iter().enumerate() {
        let mut votes = 0;
        let mut conf_sum = 0.0;
        let mut max: f64 = 0.0;
        for p in &record.predictions {
            if p.label.as_str() == name.as_str() {
                votes += 1;
                conf_sum += p.confidence;
                if p.confidence > max {
                    max = p.confidence;
                }
            }
        }
        classes.push(ClassView {
            name: name.clone(),
            position,
            prior: registry.priors().map_or(0.0, |p| p[position]),
            minority: registry.minority().any(|c| c == name),
            votes,
            conf_sum,
            mean: if votes == 0 {
                0.0
            } else {
                conf_sum / votes as f64
            },
            max,
        });
    }
    let mut minority: Vec<&ClassView> = classes.iter().filter(|c| c.minority).collect();
    minority.sort_by(|a, b| rarer(a, b));

    let done = |c: &ClassView, stage| Decision {
        label: c.name.clone(),
        stage: Some(stage),
        scores: None,
        trace: Vec::new(),
    };

    if let Some(c) = classes.iter().find(|c| c.votes == m) {
        return done(c, Stage::C1);
    }

    for c in &minority {
        let n = c.name.as_str();
        let theta1 = config.theta1.get(n) as usize;
        let theta2 = config.theta2.get(n) as usize;
        if c.votes >= theta1
            && (c.mean > config.tau1.get(n)
                || (c.votes >= theta2 && c.mean > config.tau2.get(n))
                || c.max > config.tau3.get(n))
        {
            return done(c, Stage::C2);
        }
    }

    for c in &minority {
        let n = c.name.as_str();
        if c.votes == 1 && c.max > config.tau4.get(n) && mean < config.tau5.get(n) {
            return done(c, Stage::C3);
        }
    }

    if mean < config.tau6 || spread > config.tau7 {
        let mut eligible: Vec<&ClassView> = minority
            .iter()
            .copied()
            .filter(|c| {
                c.votes >= 1 || (config.literal_c4 && mean < config.tau8.get(c.name.as_str()))
            })
            .collect();
        eligible.sort_by(|a, b| b.max.total_cmp(&a.max).then(rarer(a, b)));
        if let Some(c) = eligible.first() {
            return done(c, Stage::C4);
        }
    }

    let score = |c: &ClassView| {
        if c.minority {
            c.conf_sum * boost(config, c.name.as_str(), c.votes, mean)
        } else {
            c.conf_sum
        }
    };

    let top = classes.iter().map(|c| c.votes).max().unwrap_or(0);
    for c in &minority {
        if c.votes == top && c.max > config.tau9.get(c.name.as_str()) {
            return done(c, Stage::C6);
        }
    }

    let mut ranked: Vec<&ClassView> = classes.iter().collect();
    ranked.sort_by(|a, b| {
        score(b)
            .total_cmp(&score(a))
            .then(b.minority.cmp(&a.minority))
            .then(rarer(a, b))
    });
    done(ranked[0], Stage::C7)
}
