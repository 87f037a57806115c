use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ClassLabel, ClassRegistry, ModelId, ModelPrediction, PredictionRecord};

/// Reads line-delimited JSON prediction records, validating each against
/// `registry` and enforcing one ensemble size across the file. Blank lines
/// are skipped.
pub fn read_predictions<R: BufRead>(
    reader: R,
    registry: &ClassRegistry,
) -> Result<Vec<PredictionRecord>> {
    let mut records = Vec::new();
    let mut checker = EnsembleSizeCheck::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut record: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        accept(&mut record, registry, line_no, &mut checker)?;
        records.push(record);
    }
    Ok(records)
}

#[derive(Default)]
struct EnsembleSizeCheck(Option<usize>);

fn accept(
    record: &mut PredictionRecord,
    registry: &ClassRegistry,
    line: usize,
    size: &mut EnsembleSizeCheck,
) -> Result<()> {
    let wrap = |source: Error| Error::Validation {
        line,
        instance_id: record.instance_id.clone(),
        source: Box::new(source),
    };
    record.validate(registry).map_err(wrap)?;
    let m = record.ensemble_size();
    match size.0 {
        None => size.0 = Some(m),
        Some(expected) if expected != m => {
            return Err(wrap(Error::InconsistentEnsembleSize { expected, found: m }));
        }
        Some(_) => {}
    }
    record.intern_labels(registry);
    Ok(())
}

/// Loads a prediction file; `.csv` files go through the CSV importer.
pub fn load_predictions(path: &Path, registry: &ClassRegistry) -> Result<Vec<PredictionRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        read_predictions_csv(file, registry)
    } else {
        read_predictions(BufReader::new(file), registry)
    }
}

pub fn write_predictions<W: Write>(
    mut writer: W,
    records: &[PredictionRecord],
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_predictions(BufWriter::new(file), records).map_err(|e| Error::io(path, e))
}

/// Imports predictions from CSV. The header holds `instance_id`, an
/// optional `gold` column, and a `<model>.label` / `<model>.confidence`
/// column pair per model. Empty gold cells mean no gold label.
pub fn read_predictions_csv<R: Read>(
    reader: R,
    registry: &ClassRegistry,
) -> Result<Vec<PredictionRecord>> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header_err = |message: String| Error::Parse { line: 1, message };
    let headers = csv
        .headers()
        .map_err(|e| header_err(e.to_string()))?
        .clone();

    let mut id_col = None;
    let mut gold_col = None;
    let mut models: Vec<(ModelId, Option<usize>, Option<usize>)> = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        match h {
            "instance_id" => id_col = Some(i),
            "gold" => gold_col = Some(i),
            _ => {
                let (model, field) = h
                    .rsplit_once('.')
                    .ok_or_else(|| header_err(format!("unrecognized column '{h}'")))?;
                let slot = match models.iter().position(|(m, _, _)| m.as_str() == model) {
                    Some(p) => p,
                    None => {
                        models.push((ModelId::from(model), None, None));
                        models.len() - 1
                    }
                };
                match field {
                    "label" => models[slot].1 = Some(i),
                    "confidence" => models[slot].2 = Some(i),
                    _ => return Err(header_err(format!("unrecognized column '{h}'"))),
                }
            }
        }
    }
    let id_col = id_col.ok_or_else(|| header_err("missing 'instance_id' column".into()))?;
    let models: Vec<(ModelId, usize, usize)> = models
        .into_iter()
        .map(|(m, l, c)| match (l, c) {
            (Some(l), Some(c)) => Ok((m, l, c)),
            _ => Err(header_err(format!(
                "model '{m}' needs both .label and .confidence columns"
            ))),
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut checker = EnsembleSizeCheck::default();
    for (i, row) in csv.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let cell = |c: usize| row.get(c).unwrap_or("");
        let mut predictions = Vec::with_capacity(models.len());
        for (model, l, c) in &models {
            let confidence: f64 = cell(*c).parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad confidence '{}' for model '{model}'", cell(*c)),
            })?;
            predictions.push(ModelPrediction {
                model: model.clone(),
                label: ClassLabel::from(cell(*l)),
                confidence,
                distribution: None,
            });
        }
        let gold = gold_col
            .map(cell)
            .filter(|g| !g.is_empty())
            .map(ClassLabel::from);
        let mut record = PredictionRecord {
            instance_id: cell(id_col).to_string(),
            gold,
            predictions,
        };
        accept(&mut record, registry, line, &mut checker)?;
        records.push(record);
    }
    Ok(records)
}
