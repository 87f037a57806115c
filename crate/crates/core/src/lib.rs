//! Class-aware minority-optimized ensemble aggregation.
//!
//! Turns per-model predictions into one label per instance. The staged
//! CAMO rule lives in [`engine`]; the comparison baselines in
//! [`strategies`]; scoring in [`metrics`].

pub mod config;
pub mod engine;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod stats;
pub mod strategies;
pub mod synth;

pub use config::{default_config, CamoConfig, ClassParam};
pub use engine::{CamoEngine, Decision, Stage, TraceStep};
pub use error::{Error, Result};
pub use metrics::{confusion, report, ConfusionMatrix, LenientMap, MetricReport, Variant};
pub use model::{ClassLabel, ClassRegistry, ModelId, ModelPrediction, PredictionRecord};
pub use stats::{compute_stats, EnsembleStats};
pub use strategies::{Strategy, StrategyId, StrategySpec};
