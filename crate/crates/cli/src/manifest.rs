use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use camo_core::io::RunConfigFile;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::cli::Command;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance written next to every output: enough to re-run the command
/// and check the outputs byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub invocation: Command,
    /// Resolved configuration, defaults filled in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfigFile>,
    pub strategies: Vec<String>,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut BufReader::new(file), &mut hasher).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(hasher.finalize()))
}

pub fn digest(role: &str, path: &Path) -> Result<FileDigest, CliError> {
    Ok(FileDigest {
        role: role.to_string(),
        path: path.to_path_buf(),
        sha256: sha256_file(path)?,
    })
}

pub fn now() -> String {
    OffsetDateTime::now_utc()
        .format(&Rfc3339)
        .expect("RFC 3339 formatting of the current time")
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Manifest, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        camo_core::io::parse_json(&text)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(
            manifest_path(Path::new("/tmp/out/decisions.jsonl")),
            PathBuf::from("/tmp/out/decisions.jsonl.manifest.json")
        );
    }

    #[test]
    fn digest_of_known_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(&p, "abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(
            sha256_file(&dir.path().join("missing"))
                .unwrap_err()
                .exit_code(),
            2
        );
    }
}
