//! Record-level execution of strategies, sequential or on the rayon pool.
//! Results are collected in input order, so both paths produce the same
//! decisions.

use std::path::Path;

use camo_core::io::parse_json;
use camo_core::metrics::{confusion, report, LenientMap, MetricReport, Variant};
use camo_core::strategies::{cross_fit_predict, MetaModel, MetaParams};
use camo_core::{
    compute_stats, CamoConfig, ClassRegistry, Decision, Error, PredictionRecord, Result, Strategy,
    StrategyId, StrategySpec,
};
use rayon::prelude::*;

/// A strategy ready to run. The meta-ensemble without a saved model is
/// cross-fitted on the records it is asked to decide.
#[derive(Debug, Clone)]
pub enum Prepared {
    Ready(Strategy),
    CrossFit(MetaParams),
}

pub fn load_meta_model(path: &Path) -> Result<MetaModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_json(&text)
}

pub fn prepare(
    specs: &[StrategySpec],
    registry: &ClassRegistry,
    camo: &CamoConfig,
) -> Result<Vec<Prepared>> {
    specs
        .iter()
        .map(|s| match (s.id, &s.model) {
            (StrategyId::MetaEnsemble, Some(path)) => {
                s.validate()?;
                let model = load_meta_model(Path::new(path))?;
                if model.classes != registry.classes() {
                    return Err(Error::ModelMismatch(
                        "meta model was fitted on other classes".into(),
                    ));
                }
                Ok(Prepared::Ready(Strategy::MetaEnsemble(Some(model))))
            }
            (StrategyId::MetaEnsemble, None) => {
                s.validate()?;
                Ok(Prepared::CrossFit(s.meta_params()))
            }
            _ => Strategy::from_spec(s, registry, camo).map(Prepared::Ready),
        })
        .collect()
}

/// Decides every record with every strategy: `result[s][i]` is strategy
/// `s` on record `i`. Statistics are computed once per record.
pub fn decide_all(
    prepared: &[Prepared],
    records: &[PredictionRecord],
    registry: &ClassRegistry,
    seed: u64,
    parallel: bool,
) -> Result<Vec<Vec<Decision>>> {
    let ready: Vec<&Strategy> = prepared
        .iter()
        .filter_map(|p| match p {
            Prepared::Ready(s) => Some(s),
            Prepared::CrossFit(_) => None,
        })
        .collect();

    let per_record = |r: &PredictionRecord| -> Result<Vec<Decision>> {
        let stats = compute_stats(r, registry)?;
        ready
            .iter()
            .map(|s| s.decide(r, &stats, registry))
            .collect()
    };
    let rows: Vec<Vec<Decision>> = if ready.is_empty() {
        Vec::new()
    } else if parallel {
        records.par_iter().map(per_record).collect::<Result<_>>()?
    } else {
        records.iter().map(per_record).collect::<Result<_>>()?
    };

    let mut columns: Vec<Vec<Decision>> = (0..ready.len())
        .map(|_| Vec::with_capacity(records.len()))
        .collect();
    for row in rows {
        for (col, d) in columns.iter_mut().zip(row) {
            col.push(d);
        }
    }

    let mut columns = columns.into_iter();
    prepared
        .iter()
        .map(|p| match p {
            Prepared::Ready(_) => Ok(columns.next().expect("one column per ready strategy")),
            Prepared::CrossFit(params) => cross_fit_predict(records, registry, params, seed),
        })
        .collect()
}

/// Gold labels in record order; every record must carry one.
pub fn gold_labels(records: &[PredictionRecord]) -> Result<Vec<camo_core::ClassLabel>> {
    records
        .iter()
        .map(|r| {
            r.gold
                .clone()
                .ok_or_else(|| Error::MissingGold(r.instance_id.clone()))
        })
        .collect()
}

/// Strict and lenient reports for one strategy's decisions.
pub fn score(
    gold: &[camo_core::ClassLabel],
    decisions: &[Decision],
    registry: &ClassRegistry,
    lenient_map: &LenientMap,
) -> Result<(MetricReport, MetricReport)> {
    let pairs: Vec<_> = gold
        .iter()
        .cloned()
        .zip(decisions.iter().map(|d| d.label.clone()))
        .collect();
    let matrix = confusion(&pairs, registry)?;
    Ok((
        report(&matrix, registry, Variant::Strict, None)?,
        report(&matrix, registry, Variant::Lenient, Some(lenient_map))?,
    ))
}
