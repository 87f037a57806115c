//! The CAMO decision procedure: seven prioritized stages, the first one
//! whose condition holds determines the label.
//!
//! | stage | condition |
//! |-------|-----------|
//! | C1 | all members agree |
//! | C2 | a minority class has `V >= θ₁` and enough voter confidence |
//! | C3 | a single high-confidence minority vote in an unsure ensemble |
//! | C4 | the ensemble is uncertain and some minority class was voted for |
//! | C5 | boosted score `S(c)` is computed (never terminal) |
//! | C6 | a minority class ties for the most votes with a confident voter |
//! | C7 | `argmax S(c)` |
//!
//! Minority classes are scanned rarest-first wherever several could fire.
//! Ties in C7 prefer minority classes, then rarer classes, then registry order.

mod boost;

pub use boost::boost_value;

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::config::CamoConfig;
use crate::error::{Error, Result};
use crate::model::{ClassLabel, ClassRegistry, PredictionRecord};
use crate::stats::EnsembleStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::C1,
        Stage::C2,
        Stage::C3,
        Stage::C4,
        Stage::C5,
        Stage::C6,
        Stage::C7,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub stage: Stage,
    pub fired: bool,
    pub detail: String,
}

/// A final label with provenance.
///
/// `stage` and `trace` are only populated by CAMO; baseline strategies
/// report their class scores and leave both empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub label: ClassLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<IndexMap<ClassLabel, f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceStep>,
}

impl Decision {
    pub fn with_scores(label: ClassLabel, registry: &ClassRegistry, scores: &[f64]) -> Self {
        Decision {
            label,
            stage: None,
            scores: Some(score_map(registry, scores)),
            trace: Vec::new(),
        }
    }
}

pub(crate) fn score_map(registry: &ClassRegistry, scores: &[f64]) -> IndexMap<ClassLabel, f64> {
    registry
        .classes()
        .iter()
        .cloned()
        .zip(scores.iter().copied())
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
struct ClassThresholds {
    theta1: usize,
    theta2: usize,
    tau1: f64,
    tau2: f64,
    tau3: f64,
    tau4: f64,
    tau5: f64,
    tau8: f64,
    tau9: f64,
    beta_base: f64,
}

/// CAMO with its configuration resolved per class.
#[derive(Debug, Clone)]
pub struct CamoEngine {
    registry: ClassRegistry,
    config: CamoConfig,
    thresholds: Vec<ClassThresholds>,
    minority_scan: Vec<usize>,
    tie_order: Vec<usize>,
}

impl CamoEngine {
    pub fn new(registry: ClassRegistry, config: CamoConfig) -> Result<Self> {
        config.validate(&registry)?;
        let thresholds = registry
            .classes()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if !registry.is_minority(i) {
                    return ClassThresholds::default();
                }
                let c = c.as_str();
                ClassThresholds {
                    theta1: config.theta1.get(c) as usize,
                    theta2: config.theta2.get(c) as usize,
                    tau1: config.tau1.get(c),
                    tau2: config.tau2.get(c),
                    tau3: config.tau3.get(c),
                    tau4: config.tau4.get(c),
                    tau5: config.tau5.get(c),
                    tau8: config.tau8.get(c),
                    tau9: config.tau9.get(c),
                    beta_base: config.beta_base.get(c),
                }
            })
            .collect();
        let minority_scan = registry.minority_rarest_first();
        let tie_order = minority_scan
            .iter()
            .copied()
            .chain(
                registry
                    .rarity_order()
                    .iter()
                    .copied()
                    .filter(|&i| !registry.is_minority(i)),
            )
            .collect();
        Ok(CamoEngine {
            registry,
            config,
            thresholds,
            minority_scan,
            tie_order,
        })
    }

    pub fn registry(&self) -> &ClassRegistry {
        &self.registry
    }

    pub fn config(&self) -> &CamoConfig {
        &self.config
    }

    /// `B_c(v, p̄)` for a minority class.
    pub fn boost(&self, class: &str, votes: usize, mean_conf: f64) -> Result<f64> {
        match self.registry.index_of(class) {
            Some(i) if self.registry.is_minority(i) => Ok(self.boost_at(i, votes, mean_conf)),
            _ => Err(Error::NotMinorityClass(class.to_string())),
        }
    }

    fn boost_at(&self, class: usize, votes: usize, mean_conf: f64) -> f64 {
        boost_value(
            self.thresholds[class].beta_base,
            self.config.beta_max,
            &self.config.alpha,
            votes,
            mean_conf,
        )
    }

    /// `S(c)`: voter confidence sum, multiplied by the boost for minority classes.
    pub fn score(&self, stats: &EnsembleStats) -> Vec<f64> {
        (0..self.registry.len())
            .map(|c| {
                if self.registry.is_minority(c) {
                    stats.conf_sum[c] * self.boost_at(c, stats.votes[c], stats.mean_conf)
                } else {
                    stats.conf_sum[c]
                }
            })
            .collect()
    }

    /// Runs the staged decision for a validated record and its statistics.
    pub fn decide(&self, _record: &PredictionRecord, stats: &EnsembleStats) -> Decision {
        let mut trace = Vec::with_capacity(7);
        let finish = |c: usize,
                      stage: Stage,
                      trace: Vec<TraceStep>,
                      scores: Option<IndexMap<ClassLabel, f64>>| Decision {
            label: self.registry.label(c).clone(),
            stage: Some(stage),
            scores,
            trace,
        };

        // C1
        let m = stats.ensemble_size;
        match stats.votes.iter().position(|&v| v == m) {
            Some(c) => {
                trace.push(step(
                    Stage::C1,
                    true,
                    format!("all {m} models vote '{}'", self.registry.label(c)),
                ));
                return finish(c, Stage::C1, trace, None);
            }
            None => trace.push(step(
                Stage::C1,
                false,
                format!("max votes {} of {m}", stats.max_votes()),
            )),
        }

        // C2
        let strong = self.minority_scan.iter().copied().find(|&c| {
            let t = &self.thresholds[c];
            let v = stats.votes[c];
            let mean_c = stats.class_mean_conf(c);
            v >= t.theta1
                && (mean_c > t.tau1
                    || (v >= t.theta2 && mean_c > t.tau2)
                    || stats.max_conf[c] > t.tau3)
        });
        if let Some(c) = strong {
            trace.push(step(Stage::C2, true, self.class_detail(c, stats)));
            return finish(c, Stage::C2, trace, None);
        }
        trace.push(step(Stage::C2, false, "no minority consensus".into()));

        // C3
        let isolated = self.minority_scan.iter().copied().find(|&c| {
            let t = &self.thresholds[c];
            stats.votes[c] == 1 && stats.max_conf[c] > t.tau4 && stats.mean_conf < t.tau5
        });
        if let Some(c) = isolated {
            let mut d = self.class_detail(c, stats);
            let _ = write!(d, ", ensemble mean {}", stats.mean_conf);
            trace.push(step(Stage::C3, true, d));
            return finish(c, Stage::C3, trace, None);
        }
        trace.push(step(
            Stage::C3,
            false,
            "no isolated confident minority vote".into(),
        ));

        // C4
        let uncertain = stats.mean_conf < self.config.tau6 || stats.conf_std > self.config.tau7;
        let gate = format!("mean {}, spread {}", stats.mean_conf, stats.conf_std);
        if uncertain {
            let eligible = |c: usize| {
                stats.votes[c] >= 1
                    || (self.config.literal_c4 && stats.mean_conf < self.thresholds[c].tau8)
            };
            let mut pick: Option<usize> = None;
            for &c in &self.minority_scan {
                if eligible(c) && pick.is_none_or(|p| stats.max_conf[c] > stats.max_conf[p]) {
                    pick = Some(c);
                }
            }
            if let Some(c) = pick {
                trace.push(step(
                    Stage::C4,
                    true,
                    format!("uncertain ({gate}); {}", self.class_detail(c, stats)),
                ));
                return finish(c, Stage::C4, trace, None);
            }
            trace.push(step(
                Stage::C4,
                false,
                format!("uncertain ({gate}) but no eligible minority class"),
            ));
        } else {
            trace.push(step(Stage::C4, false, format!("confident ({gate})")));
        }

        // C5
        let scores = self.score(stats);
        let mut d = String::from("S:");
        for (c, s) in self.registry.classes().iter().zip(&scores) {
            let _ = write!(d, " {c}={s}");
        }
        trace.push(step(Stage::C5, false, d));
        let score_map = score_map(&self.registry, &scores);

        // C6
        let top_votes = stats.max_votes();
        let dominant =
            self.minority_scan.iter().copied().find(|&c| {
                stats.votes[c] == top_votes && stats.max_conf[c] > self.thresholds[c].tau9
            });
        if let Some(c) = dominant {
            trace.push(step(Stage::C6, true, self.class_detail(c, stats)));
            return finish(c, Stage::C6, trace, Some(score_map));
        }
        trace.push(step(
            Stage::C6,
            false,
            format!("no confident minority class at {top_votes} votes"),
        ));

        // C7
        let mut best = self.tie_order[0];
        for &c in &self.tie_order[1..] {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        trace.push(step(
            Stage::C7,
            true,
            format!("argmax S = '{}'", self.registry.label(best)),
        ));
        finish(best, Stage::C7, trace, Some(score_map))
    }

    fn class_detail(&self, c: usize, stats: &EnsembleStats) -> String {
        format!(
            "'{}': votes {}, mean {}, max {}",
            self.registry.label(c),
            stats.votes[c],
            stats.class_mean_conf(c),
            stats.max_conf[c]
        )
    }
}

fn step(stage: Stage, fired: bool, detail: String) -> TraceStep {
    TraceStep {
        stage,
        fired,
        detail,
    }
}
