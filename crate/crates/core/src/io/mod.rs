//! Configuration, artifact files and plot data.

pub mod artifacts;
pub mod config;
pub mod svg;
pub mod table;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use artifacts::{DeimArtifact, ModelArtifact, PodArtifact};
pub use config::{parse_config, parse_config_str, RunConfig};
pub use table::{read_snapshot_matrix, read_trajectory_csv, write_trajectory_csv, CsvTable};

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&read_artifact(path)?))
}

/// Reads a file produced by an earlier stage.
pub fn read_artifact(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::MissingArtifact {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Per-stage record of inputs, settings and output hashes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub problem: String,
    pub seed: u64,
    /// Input file -> sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output file (relative to the stage directory) -> sha256, in write order.
    pub outputs: Vec<(String, String)>,
    pub settings: BTreeMap<String, String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn new(stage: &str, problem: &str, seed: u64) -> Self {
        Manifest {
            stage: stage.to_string(),
            problem: problem.to_string(),
            seed,
            ..Default::default()
        }
    }

    pub fn setting(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.settings.insert(key.to_string(), value.to_string());
        self
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let hash = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), hash);
        Ok(())
    }

    /// Atomically writes `bytes` to `dir/name` and records its hash.
    pub fn write_output(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = dir.join(name);
        atomic_write(&path, bytes)?;
        self.outputs.retain(|(n, _)| n != name);
        self.outputs.push((name.to_string(), sha256_hex(bytes)));
        Ok(path)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        atomic_write(&path, serde_json::to_string_pretty(self)?.as_bytes())?;
        Ok(path)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = read_artifact(&path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Format {
            path,
            reason: e.to_string(),
        })
    }

    /// Output file names in write order.
    pub fn output_names(&self) -> impl Iterator<Item = &str> {
        self.outputs.iter().map(|(n, _)| n.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/a.txt");
        atomic_write(&path, b"first").unwrap();
        atomic_write(&path, b"second").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"second");
        // no stray temporaries
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("fom", "p4", 3);
        m.setting("dt", 0.03);
        m.write_output(dir.path(), "x.csv", b"1,2\n").unwrap();
        m.save(dir.path()).unwrap();
        let back = Manifest::load(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.output_names().collect::<Vec<_>>(), vec!["x.csv"]);
        assert!(matches!(
            Manifest::load(&dir.path().join("missing")),
            Err(Error::MissingArtifact { .. })
        ));
    }
}
