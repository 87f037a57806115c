use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::Decision;
use crate::error::{Error, Result};

#[derive(Serialize)]
struct LineRef<'a> {
    instance_id: &'a str,
    #[serde(flatten)]
    decision: &'a Decision,
}

#[derive(Deserialize)]
struct Line {
    instance_id: String,
    #[serde(flatten)]
    decision: Decision,
}

/// One JSON object per decision, in input order.
pub fn write_decisions<W: Write>(
    mut writer: W,
    decisions: &[(String, Decision)],
) -> std::io::Result<()> {
    for (id, d) in decisions {
        serde_json::to_writer(
            &mut writer,
            &LineRef {
                instance_id: id,
                decision: d,
            },
        )?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_decisions(path: &Path, decisions: &[(String, Decision)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_decisions(BufWriter::new(file), decisions).map_err(|e| Error::io(path, e))
}

pub fn read_decisions<R: BufRead>(reader: R) -> Result<Vec<(String, Decision)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let parse = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let line = line.map_err(|e| parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        out.push((l.instance_id, l.decision));
    }
    Ok(out)
}

pub fn load_decisions(path: &Path) -> Result<Vec<(String, Decision)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_decisions(BufReader::new(file))
}
