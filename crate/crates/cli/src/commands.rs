use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use camo_core::io::{
    load_config, load_predictions, parse_json, save_decisions, write_predictions, RunConfig,
};
use camo_core::metrics::{render_table, MetricReport, TableColumn};
use camo_core::strategies::MetaModel;
use camo_core::synth::SynthSpec;
use camo_core::{CamoEngine, Error, PredictionRecord, Stage, Strategy, StrategyId, StrategySpec};
use serde::{Deserialize, Serialize};

use crate::cli::{AggregateArgs, Command, EvaluateArgs, FitMetaArgs, SweepArgs, SynthArgs};
use crate::manifest::{digest, manifest_path, now, sha256_file, Manifest};
use crate::run::{decide_all, gold_labels, prepare, score, Prepared};
use crate::CliError;

/// What a finished command produced, for the manifest and the terminal.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub inputs: Vec<(&'static str, PathBuf)>,
    pub outputs: Vec<PathBuf>,
    pub config: Option<RunConfig>,
    pub strategies: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub id: StrategyId,
    pub strict: MetricReport,
    pub lenient: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub records: usize,
    pub strategies: Vec<StrategyReport>,
    pub table: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub param: String,
    pub metric: String,
    pub points: Vec<SweepPoint>,
}

pub const METRICS: [&str; 7] = [
    "macro_f1",
    "accuracy",
    "weighted_f1",
    "macro_precision",
    "macro_recall",
    "minority_recall",
    "fairness_gap",
];

fn metric_value(name: &str, strict: &MetricReport, lenient: &MetricReport) -> Option<Option<f64>> {
    let (r, base) = match name.strip_prefix("lenient_") {
        Some(b) => (lenient, b),
        None => (strict, name),
    };
    Some(match base {
        "macro_f1" => Some(r.macro_f1),
        "accuracy" => Some(r.accuracy),
        "weighted_f1" => Some(r.weighted_f1),
        "macro_precision" => Some(r.macro_precision),
        "macro_recall" => Some(r.macro_recall),
        "minority_recall" => r.minority_recall(),
        "fairness_gap" => r.fairness_gap,
        _ => return None,
    })
}

/// Parses `v1,v2,...` or `start..end:step` (inclusive of `end`).
pub fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Invalid(format!("--values '{text}': {why}"));
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(&format!("'{s}' is not a number")))
    };
    if let Some((range, step)) = text.split_once(':') {
        let (start, end) = range
            .split_once("..")
            .ok_or_else(|| bad("expected start..end:step"))?;
        let (start, end, step) = (number(start)?, number(end)?, number(step)?);
        if !(step > 0.0 && step.is_finite() && end >= start) {
            return Err(bad("need step > 0 and end >= start"));
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        // rounded to 12 places so 0.5 + 3 * 0.05 prints as 0.65
        Ok((0..=n)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect())
    } else {
        let v = text.split(',').map(number).collect::<Result<Vec<_>, _>>()?;
        if v.is_empty() {
            return Err(bad("no values"));
        }
        Ok(v)
    }
}

fn absolute(path: &Path) -> Result<PathBuf, CliError> {
    std::path::absolute(path).map_err(|e| CliError::io(path, e))
}

/// Loads a run config; relative meta model paths resolve against the
/// config file's directory and are stored absolute so the echo is portable.
fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let mut config = load_config(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for s in &mut config.strategies {
        if let Some(m) = &s.model {
            let p = Path::new(m);
            if p.is_relative() {
                s.model = Some(absolute(&base.join(p))?.display().to_string());
            }
        }
    }
    Ok(config)
}

fn spec_for(config: &RunConfig, id: StrategyId) -> StrategySpec {
    config
        .strategies
        .iter()
        .find(|s| s.id == id)
        .cloned()
        .unwrap_or_else(|| StrategySpec::new(id))
}

fn config_inputs(config_path: &Path, specs: &[StrategySpec]) -> Vec<(&'static str, PathBuf)> {
    let mut inputs = vec![("config", config_path.to_path_buf())];
    for s in specs {
        if let Some(m) = &s.model {
            inputs.push(("model", PathBuf::from(m)));
        }
    }
    inputs
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn non_empty(records: &[PredictionRecord], path: &Path) -> Result<(), CliError> {
    if records.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: no prediction records",
            path.display()
        )));
    }
    Ok(())
}

pub fn aggregate(a: &AggregateArgs, parallel: bool) -> Result<Outcome, CliError> {
    let config = read_config(&a.config)?;
    let id: StrategyId = a.strategy.parse()?;
    let spec = spec_for(&config, id);
    let prepared = prepare(std::slice::from_ref(&spec), &config.registry, &config.camo)?;
    let records = load_predictions(&a.predictions, &config.registry)?;
    let decisions = decide_all(&prepared, &records, &config.registry, config.seed, parallel)?
        .pop()
        .expect("one strategy");

    let mut stages: BTreeMap<Stage, usize> = BTreeMap::new();
    for d in &decisions {
        if let Some(s) = d.stage {
            *stages.entry(s).or_default() += 1;
        }
    }
    let mut stdout = format!(
        "{} decisions ({id}) -> {}\n",
        decisions.len(),
        a.out.display()
    );
    if !stages.is_empty() {
        let parts: Vec<String> = stages.iter().map(|(s, n)| format!("{s:?} {n}")).collect();
        stdout.push_str(&format!("stages: {}\n", parts.join(", ")));
    }

    let pairs: Vec<(String, camo_core::Decision)> = records
        .iter()
        .map(|r| r.instance_id.clone())
        .zip(decisions)
        .collect();
    save_decisions(&a.out, &pairs)?;

    let mut inputs = vec![("predictions", a.predictions.clone())];
    inputs.extend(config_inputs(&a.config, std::slice::from_ref(&spec)));
    Ok(Outcome {
        stdout,
        inputs,
        outputs: vec![a.out.clone()],
        strategies: vec![id.to_string()],
        seed: config.seed,
        config: Some(config),
    })
}

pub fn evaluate(a: &EvaluateArgs, parallel: bool) -> Result<Outcome, CliError> {
    let config = read_config(&a.config)?;
    let specs: Vec<StrategySpec> = match &a.strategies {
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse().map(|id| spec_for(&config, id)))
            .collect::<Result<_, Error>>()?,
        None => config.strategies.clone(),
    };
    let prepared = prepare(&specs, &config.registry, &config.camo)?;
    let records = load_predictions(&a.predictions, &config.registry)?;
    non_empty(&records, &a.predictions)?;
    let gold = gold_labels(&records)?;
    let decisions = decide_all(&prepared, &records, &config.registry, config.seed, parallel)?;

    let mut reports = Vec::with_capacity(specs.len());
    for (spec, d) in specs.iter().zip(&decisions) {
        let (strict, lenient) = score(&gold, d, &config.registry, &config.lenient_map)?;
        reports.push(StrategyReport {
            id: spec.id,
            strict,
            lenient,
        });
    }
    let columns: Vec<TableColumn<'_>> = reports
        .iter()
        .map(|r| TableColumn {
            name: r.id.as_str(),
            strict: &r.strict,
            lenient: &r.lenient,
        })
        .collect();
    let table = render_table(&columns);
    let report = EvaluationReport {
        records: records.len(),
        strategies: reports,
        table: table.clone(),
    };
    write_json(&a.out, &report)?;

    let mut inputs = vec![("predictions", a.predictions.clone())];
    inputs.extend(config_inputs(&a.config, &specs));
    Ok(Outcome {
        stdout: table,
        inputs,
        outputs: vec![a.out.clone()],
        strategies: specs.iter().map(|s| s.id.to_string()).collect(),
        seed: config.seed,
        config: Some(config),
    })
}

pub fn sweep(a: &SweepArgs, parallel: bool) -> Result<Outcome, CliError> {
    let config = read_config(&a.config)?;
    let values = parse_values(&a.values)?;
    let metric_known = |m: &str| METRICS.contains(&m.strip_prefix("lenient_").unwrap_or(m));
    if !metric_known(&a.metric) {
        return Err(CliError::Invalid(format!(
            "unknown metric '{}' (valid: {}, each optionally prefixed with lenient_)",
            a.metric,
            METRICS.join(", ")
        )));
    }
    let mut engines = Vec::with_capacity(values.len());
    for &v in &values {
        let mut camo = config.camo.clone();
        camo.set_param(&a.param, v)?;
        engines.push(CamoEngine::new(config.registry.clone(), camo)?);
    }

    let records = load_predictions(&a.predictions, &config.registry)?;
    non_empty(&records, &a.predictions)?;
    let gold = gold_labels(&records)?;
    let mut points = Vec::with_capacity(values.len());
    for (value, engine) in values.iter().zip(engines) {
        let prepared = [Prepared::Ready(Strategy::Camo(Box::new(engine)))];
        let decisions = decide_all(&prepared, &records, &config.registry, config.seed, parallel)?;
        let (strict, lenient) = score(&gold, &decisions[0], &config.registry, &config.lenient_map)?;
        points.push(SweepPoint {
            value: *value,
            metric: metric_value(&a.metric, &strict, &lenient).expect("metric name checked"),
        });
    }
    let series = SweepSeries {
        param: a.param.clone(),
        metric: a.metric.clone(),
        points,
    };
    let mut outputs = Vec::new();
    if let Some(out) = &a.out {
        write_json(out, &series)?;
        outputs.push(out.clone());
    }
    Ok(Outcome {
        stdout: serde_json::to_string_pretty(&series).expect("series serializes") + "\n",
        inputs: vec![
            ("predictions", a.predictions.clone()),
            ("config", a.config.clone()),
        ],
        outputs,
        strategies: vec![StrategyId::Camo.to_string()],
        seed: config.seed,
        config: Some(config),
    })
}

pub fn synth(a: &SynthArgs) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| CliError::io(&a.spec, e))?;
    let spec: SynthSpec = parse_json(&text)?;
    let stream = spec.stream()?;
    let mut w = create(&a.out)?;
    let mut n = 0usize;
    for r in stream {
        write_predictions(&mut w, std::slice::from_ref(&r)).map_err(|e| CliError::io(&a.out, e))?;
        n += 1;
    }
    w.flush().map_err(|e| CliError::io(&a.out, e))?;
    Ok(Outcome {
        stdout: format!("{n} records -> {}\n", a.out.display()),
        inputs: vec![("spec", a.spec.clone())],
        outputs: vec![a.out.clone()],
        seed: spec.seed,
        ..Outcome::default()
    })
}

pub fn fit_meta(a: &FitMetaArgs) -> Result<Outcome, CliError> {
    let config = read_config(&a.config)?;
    let spec = spec_for(&config, StrategyId::MetaEnsemble);
    let records = load_predictions(&a.predictions, &config.registry)?;
    let model = MetaModel::fit(&records, &config.registry, &spec.meta_params(), config.seed)?;
    write_json(&a.out, &model)?;
    Ok(Outcome {
        stdout: format!(
            "fitted on {} records, final loss {:.6} -> {}\n",
            model.training.records,
            model.training.final_loss,
            a.out.display()
        ),
        inputs: vec![
            ("predictions", a.predictions.clone()),
            ("config", a.config.clone()),
        ],
        outputs: vec![a.out.clone()],
        strategies: vec![StrategyId::MetaEnsemble.to_string()],
        seed: config.seed,
        config: Some(config),
    })
}

fn absolutize(cmd: &mut Command) -> Result<(), CliError> {
    let fix = |p: &mut PathBuf| -> Result<(), CliError> {
        *p = absolute(p)?;
        Ok(())
    };
    match cmd {
        Command::Aggregate(a) => {
            fix(&mut a.predictions)?;
            fix(&mut a.config)?;
            fix(&mut a.out)
        }
        Command::Evaluate(a) => {
            fix(&mut a.predictions)?;
            fix(&mut a.config)?;
            fix(&mut a.out)
        }
        Command::Sweep(a) => {
            fix(&mut a.predictions)?;
            fix(&mut a.config)?;
            a.out.as_mut().map(fix).transpose().map(|_| ())
        }
        Command::Synth(a) => {
            fix(&mut a.spec)?;
            fix(&mut a.out)
        }
        Command::FitMeta(a) => {
            fix(&mut a.predictions)?;
            fix(&mut a.config)?;
            fix(&mut a.out)
        }
        Command::Replay(a) => fix(&mut a.manifest),
    }
}

fn dispatch(cmd: &Command, parallel: bool) -> Result<Outcome, CliError> {
    match cmd {
        Command::Aggregate(a) => aggregate(a, parallel),
        Command::Evaluate(a) => evaluate(a, parallel),
        Command::Sweep(a) => sweep(a, parallel),
        Command::Synth(a) => synth(a),
        Command::FitMeta(a) => fit_meta(a),
        Command::Replay(_) => Err(CliError::Invalid(
            "a replay cannot itself be replayed".into(),
        )),
    }
}

/// Runs a command and writes its manifest next to the first output.
/// Returns the text meant for stdout.
pub fn execute(cmd: Command, parallel: bool) -> Result<String, CliError> {
    let mut cmd = cmd;
    absolutize(&mut cmd)?;
    if let Command::Replay(r) = &cmd {
        return replay(&r.manifest, parallel);
    }
    let started_at = now();
    let outcome = dispatch(&cmd, parallel)?;
    let finished_at = now();
    if let Some(first) = outcome.outputs.first() {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            invocation: cmd.clone(),
            config: outcome.config.as_ref().map(RunConfig::to_doc),
            strategies: outcome.strategies.clone(),
            seed: outcome.seed,
            inputs: outcome
                .inputs
                .iter()
                .map(|(role, p)| digest(role, p))
                .collect::<Result<_, _>>()?,
            outputs: outcome
                .outputs
                .iter()
                .map(|p| digest("output", p))
                .collect::<Result<_, _>>()?,
            started_at,
            finished_at,
        };
        manifest.save(&manifest_path(first))?;
    }
    Ok(outcome.stdout)
}

fn redirect(cmd: &mut Command, dir: &Path, config: Option<&Path>) {
    let move_out = |p: &mut PathBuf| {
        let name = p
            .file_name()
            .map(|n| n.to_owned())
            .unwrap_or_else(|| "output".into());
        *p = dir.join(name);
    };
    let set_config = |p: &mut PathBuf| {
        if let Some(c) = config {
            *p = c.to_path_buf();
        }
    };
    match cmd {
        Command::Aggregate(a) => {
            set_config(&mut a.config);
            move_out(&mut a.out);
        }
        Command::Evaluate(a) => {
            set_config(&mut a.config);
            move_out(&mut a.out);
        }
        Command::Sweep(a) => {
            set_config(&mut a.config);
            if let Some(o) = a.out.as_mut() {
                move_out(o);
            }
        }
        Command::Synth(a) => move_out(&mut a.out),
        Command::FitMeta(a) => {
            set_config(&mut a.config);
            move_out(&mut a.out);
        }
        Command::Replay(_) => {}
    }
}

/// Re-runs the command recorded in a manifest inside a scratch directory,
/// using the echoed configuration, and compares output digests.
pub fn replay(manifest: &Path, parallel: bool) -> Result<String, CliError> {
    let m = Manifest::load(manifest)?;
    for input in m.inputs.iter().filter(|i| i.role != "config") {
        if sha256_file(&input.path)? != input.sha256 {
            return Err(CliError::Invalid(format!(
                "{} input {} changed since the recorded run",
                input.role,
                input.path.display()
            )));
        }
    }
    let dir = tempfile::tempdir().map_err(|e| CliError::io(Path::new("<temp dir>"), e))?;
    let config_path = match &m.config {
        Some(doc) => {
            let p = dir.path().join("config.json");
            write_json(&p, doc)?;
            Some(p)
        }
        None => None,
    };
    let mut cmd = m.invocation.clone();
    redirect(&mut cmd, dir.path(), config_path.as_deref());
    let outcome = dispatch(&cmd, parallel)?;

    if outcome.outputs.len() != m.outputs.len() {
        return Err(CliError::Invalid(format!(
            "replay produced {} outputs, manifest lists {}",
            outcome.outputs.len(),
            m.outputs.len()
        )));
    }
    let mut mismatched = Vec::new();
    for (recorded, fresh) in m.outputs.iter().zip(&outcome.outputs) {
        if sha256_file(fresh)? != recorded.sha256 {
            mismatched.push(recorded.path.display().to_string());
        }
    }
    if !mismatched.is_empty() {
        return Err(CliError::Invalid(format!(
            "replay differs for: {}",
            mismatched.join(", ")
        )));
    }
    Ok(format!(
        "replay ok: {} output(s) bit-identical\n",
        m.outputs.len()
    ))
}
