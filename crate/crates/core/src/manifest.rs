//! Run configuration: the input manifest file, its resolved form, and the
//! run manifest written next to every stage's outputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::frontier::MAX_DISTANCE;
use crate::graph::GraphReport;
use crate::ingest::{IngestReport, DEFAULT_CUTOFF_YEAR};
use crate::stats::{DedupMode, QUANTILE_METHOD};
use crate::{Error, Result};

fn default_cutoff() -> i32 {
    DEFAULT_CUTOFF_YEAR
}

fn default_max_distance() -> u8 {
    MAX_DISTANCE
}

fn yes() -> bool {
    true
}

/// The manifest file as written by users (TOML, or JSON for a `.json` path).
/// Relative paths are taken from the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputManifest {
    pub publications: PathBuf,
    pub citations: PathBuf,
    pub retractions: PathBuf,
    pub journal_if: PathBuf,
    #[serde(default = "default_cutoff")]
    pub cutoff_year: i32,
    #[serde(default = "default_max_distance")]
    pub max_distance: u8,
    #[serde(default)]
    pub dedup: DedupMode,
    #[serde(default = "yes")]
    pub self_exclude: bool,
    /// Leave members with only a publication year out of the pre/post split.
    #[serde(default)]
    pub exclude_year_only: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl InputManifest {
    pub fn with_inputs(dir_relative: [&str; 4], cutoff_year: i32) -> Self {
        let [publications, citations, retractions, journal_if] = dir_relative.map(PathBuf::from);
        Self {
            publications,
            citations,
            retractions,
            journal_if,
            cutoff_year,
            max_distance: MAX_DISTANCE,
            dedup: DedupMode::Both,
            self_exclude: true,
            exclude_year_only: false,
            output: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        let is_json = path.extension().and_then(|e| e.to_str()) == Some("json");
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| Error::Config(format!("manifest {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest fields are plain values")
    }

    /// Resolves paths against `base` and applies no overrides.
    pub fn resolve(&self, base: &Path) -> RunConfig {
        let at = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        RunConfig {
            publications: at(&self.publications),
            citations: at(&self.citations),
            retractions: at(&self.retractions),
            journal_if: at(&self.journal_if),
            cutoff_year: self.cutoff_year,
            max_distance: self.max_distance,
            dedup: self.dedup,
            self_exclude: self.self_exclude,
            exclude_year_only: self.exclude_year_only,
            output: self
                .output
                .as_deref()
                .map_or_else(|| base.join(DEFAULT_OUTPUT), at),
        }
    }
}

pub const DEFAULT_OUTPUT: &str = "harmtrace-out";

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub publications: PathBuf,
    pub citations: PathBuf,
    pub retractions: PathBuf,
    pub journal_if: PathBuf,
    pub cutoff_year: i32,
    pub max_distance: u8,
    pub dedup: DedupMode,
    pub self_exclude: bool,
    pub exclude_year_only: bool,
    pub output: PathBuf,
}

impl RunConfig {
    pub fn inputs(&self) -> [(&'static str, &Path); 4] {
        [
            ("publications", &self.publications),
            ("citations", &self.citations),
            ("retractions", &self.retractions),
            ("journal_if", &self.journal_if),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DISTANCE).contains(&self.max_distance) {
            return Err(Error::Config(format!(
                "max_distance {} outside 1..={MAX_DISTANCE}",
                self.max_distance
            )));
        }
        for (name, path) in self.inputs() {
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "{name} input {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 16, file);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEntry {
    /// File name only, so the manifest does not depend on where data lives.
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHashes(pub BTreeMap<String, InputEntry>);

impl InputHashes {
    pub fn compute(cfg: &RunConfig) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (name, path) in cfg.inputs() {
            let file = path
                .file_name()
                .map_or_else(String::new, |f| f.to_string_lossy().into_owned());
            map.insert(
                name.to_string(),
                InputEntry {
                    file,
                    sha256: sha256_file(path)?,
                },
            );
        }
        Ok(Self(map))
    }

    /// Key for the graph cache: input contents plus the cutoff that decides
    /// the analysis mask.
    pub fn fingerprint(&self, cutoff_year: i32) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for (name, entry) in &self.0 {
            hasher.update(name.as_bytes());
            hasher.update(entry.sha256.as_bytes());
        }
        hasher.update(cutoff_year.to_le_bytes());
        hasher.finalize().into()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DropCounters {
    pub ingest: IngestReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphReport>,
}

/// Written as `run_manifest.json` by every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub stage: String,
    pub inputs: InputHashes,
    pub cutoff_year: i32,
    pub max_distance: u8,
    pub dedup_mode: DedupMode,
    pub self_exclude: bool,
    pub exclude_year_only: bool,
    pub quantile_method: String,
    pub drop_counters: DropCounters,
    /// Files written by this stage, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(stage: &str, cfg: &RunConfig, inputs: InputHashes) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            stage: stage.to_string(),
            inputs,
            cutoff_year: cfg.cutoff_year,
            max_distance: cfg.max_distance,
            dedup_mode: cfg.dedup,
            self_exclude: cfg.self_exclude,
            exclude_year_only: cfg.exclude_year_only,
            quantile_method: QUANTILE_METHOD.to_string(),
            drop_counters: DropCounters::default(),
            outputs: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_defaults_and_resolution() {
        let text = r#"
publications = "p.jsonl"
citations = "c.csv"
retractions = "/abs/r.csv"
journal_if = "if.csv"
dedup = "dedup-only"
"#;
        let m: InputManifest = toml::from_str(text).unwrap();
        assert_eq!(m.cutoff_year, DEFAULT_CUTOFF_YEAR);
        assert_eq!(m.max_distance, 6);
        assert!(m.self_exclude);
        assert_eq!(m.dedup, DedupMode::DedupOnly);
        let cfg = m.resolve(Path::new("/data"));
        assert_eq!(cfg.publications, PathBuf::from("/data/p.jsonl"));
        assert_eq!(cfg.retractions, PathBuf::from("/abs/r.csv"));
        assert_eq!(cfg.output, PathBuf::from("/data/harmtrace-out"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "publications='a'\ncitations='b'\nretractions='c'\njournal_if='d'\ncutof=1";
        assert!(toml::from_str::<InputManifest>(text).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let m = InputManifest::with_inputs(["a.jsonl", "b.csv", "c.csv", "d.csv"], 2010);
        assert_eq!(toml::from_str::<InputManifest>(&m.to_toml()).unwrap(), m);
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg =
            InputManifest::with_inputs(["a", "b", "c", "d"], 2013).resolve(dir.path());
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        for name in ["a", "b", "c", "d"] {
            std::fs::write(dir.path().join(name), "x").unwrap();
        }
        cfg.validate().unwrap();
        cfg.max_distance = 7;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
