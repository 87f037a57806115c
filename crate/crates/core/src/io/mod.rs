//! Prediction, decision and configuration files.
//!
//! All formats are UTF-8 JSON; predictions and decisions are one object
//! per line. Floats are written in shortest round-trip form.

mod decisions;
mod predictions;
mod run_config;

pub use decisions::{load_decisions, read_decisions, save_decisions, write_decisions};
pub use predictions::{
    load_predictions, read_predictions, read_predictions_csv, save_predictions, write_predictions,
};
pub use run_config::{
    load_config, parse_config, parse_json, RunConfig, RunConfigFile, StrategyEntry,
};
