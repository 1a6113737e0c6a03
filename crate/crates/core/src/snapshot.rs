//! Whole-process snapshots as a single JSON document.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::elites::{EliteEntry, EliteLedger, TestInputs};
use crate::error::{Error, Result};
use crate::farm::{FarmConfig, FarmState, SeedList, StreamSet};
use crate::fitness::ScoreVector;
use crate::rng::Stream;
use crate::vm::Genome;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotDocument {
    pub version: u32,
    pub config_digest: String,
    pub generation: u64,
    pub population: Vec<Genome>,
    /// Scores of the last evaluated population.
    pub scores: ScoreVector,
    pub seed_list: Vec<Genome>,
    pub elites: Vec<EliteEntry>,
    pub test_inputs: Vec<BitString>,
    pub rng_streams: BTreeMap<String, Stream>,
}

impl SnapshotDocument {
    pub fn from_state(state: &FarmState, config: &FarmConfig) -> Self {
        SnapshotDocument {
            version: FORMAT_VERSION,
            config_digest: config.digest(),
            generation: state.generation,
            population: state.population.clone(),
            scores: state.scores.clone(),
            seed_list: state.seed_list.entries().to_vec(),
            elites: state.elites.entries().to_vec(),
            test_inputs: state.test_inputs.inputs().to_vec(),
            rng_streams: state.streams.to_map(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("snapshot serializes");
        s.push('\n');
        s
    }

    /// Parses a document. The version is checked before the rest of the
    /// structure so old formats report as unsupported rather than malformed.
    pub fn from_json(src: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(src).map_err(json_error)?;
        let version = value
            .get("version")
            .ok_or_else(|| Error::parse("key `version`", "missing"))?
            .as_u64()
            .ok_or_else(|| Error::parse("key `version`", "not an unsigned integer"))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(Error::UnsupportedVersion {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            });
        }
        let doc: SnapshotDocument = serde_json::from_str(src).map_err(json_error)?;
        doc.check_structure()?;
        Ok(doc)
    }

    /// Internal consistency checks that need no config.
    pub fn check_structure(&self) -> Result<()> {
        let n = self.population.len();
        let s = &self.scores;
        if !(s.is_empty() && s.raw.is_empty() && s.differential.is_empty())
            && !(s.raw.len() == n && s.differential.len() == n && s.weak.len() == n)
        {
            return Err(Error::parse(
                "key `scores`",
                "score lists do not match the population",
            ));
        }
        if self.seed_list.len() as u64 != self.generation {
            return Err(Error::parse(
                "key `seed_list`",
                format!(
                    "{} seeds recorded for {} completed generations",
                    self.seed_list.len(),
                    self.generation
                ),
            ));
        }
        EliteLedger::from_entries(self.elites.clone())
            .map_err(|e| Error::parse("key `elites`", e.to_string()))?;
        if self.test_inputs.is_empty() {
            return Err(Error::parse("key `test_inputs`", "must be nonempty"));
        }
        StreamSet::from_map(&self.rng_streams)?;
        Ok(())
    }

    /// Checks the document against `config` and rebuilds the farm state.
    pub fn into_state(self, config: &FarmConfig) -> Result<FarmState> {
        let digest = config.digest();
        if self.config_digest != digest {
            return Err(Error::Incompatible(format!(
                "snapshot was written under config digest {}, current config digest is {digest}",
                self.config_digest
            )));
        }
        if self.population.len() != config.population_size {
            return Err(Error::Incompatible(format!(
                "snapshot population has {} members, config expects {}",
                self.population.len(),
                config.population_size
            )));
        }
        if let Some(g) = self
            .population
            .iter()
            .find(|g| g.len() != config.genome_length)
        {
            return Err(Error::Incompatible(format!(
                "genome of length {} in a config with genome_length {}",
                g.len(),
                config.genome_length
            )));
        }
        let elites = EliteLedger::from_entries(self.elites)
            .map_err(|e| Error::parse("key `elites`", e.to_string()))?;
        let test_inputs = TestInputs::new(self.test_inputs)
            .map_err(|e| Error::parse("key `test_inputs`", e.to_string()))?;
        Ok(FarmState {
            generation: self.generation,
            population: self.population,
            scores: self.scores,
            seed_list: SeedList::from_entries(self.seed_list),
            elites,
            test_inputs,
            streams: StreamSet::from_map(&self.rng_streams)?,
        })
    }
}

fn json_error(e: serde_json::Error) -> Error {
    Error::parse(
        format!("line {} column {}", e.line(), e.column()),
        e.to_string(),
    )
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the snapshot through a temporary file in the destination
/// directory, then renames it into place.
pub fn save_snapshot(state: &FarmState, config: &FarmConfig, destination: &Path) -> Result<()> {
    let json = SnapshotDocument::from_state(state, config).to_json();
    let dir = match destination.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_error(destination))?;
    tmp.write_all(json.as_bytes())
        .map_err(io_error(destination))?;
    tmp.as_file().sync_all().map_err(io_error(destination))?;
    tmp.persist(destination)
        .map_err(|e| io_error(destination)(e.error))?;
    Ok(())
}

pub fn read_document(source: &Path) -> Result<SnapshotDocument> {
    let src = std::fs::read_to_string(source).map_err(io_error(source))?;
    SnapshotDocument::from_json(&src)
}

pub fn load_snapshot(source: &Path, config: &FarmConfig) -> Result<FarmState> {
    read_document(source)?.into_state(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::DatasetConfig;
    use crate::farm::{init_farm, step_generation};

    fn config() -> FarmConfig {
        FarmConfig {
            population_size: 8,
            genome_length: 24,
            step_limit: 128,
            test_input_count: 4,
            master_seed: 21,
            dataset: DatasetConfig {
                num_examples: 3,
                fixed_input_len: 6,
                fixed_output_len: 3,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn document_round_trip() {
        let cfg = config();
        let mut state = init_farm(&cfg).unwrap();
        let fresh = SnapshotDocument::from_state(&state, &cfg);
        assert!(fresh.seed_list.is_empty() && fresh.elites.is_empty());
        for _ in 0..5 {
            step_generation(&mut state, &cfg).unwrap();
        }
        let doc = SnapshotDocument::from_state(&state, &cfg);
        let parsed = SnapshotDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(parsed, doc);
        assert_eq!(parsed.into_state(&cfg).unwrap(), state);
    }

    #[test]
    fn file_round_trip_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        let cfg = config();
        let mut state = init_farm(&cfg).unwrap();
        for _ in 0..3 {
            step_generation(&mut state, &cfg).unwrap();
        }
        save_snapshot(&state, &cfg, &path).unwrap();
        let mut resumed = load_snapshot(&path, &cfg).unwrap();
        assert_eq!(resumed, state);
        for _ in 0..4 {
            step_generation(&mut state, &cfg).unwrap();
            step_generation(&mut resumed, &cfg).unwrap();
        }
        assert_eq!(resumed, state);
    }

    #[test]
    fn rejects_bad_documents() {
        let cfg = config();
        let state = init_farm(&cfg).unwrap();
        let json = SnapshotDocument::from_state(&state, &cfg).to_json();

        let mut other = cfg.clone();
        other.master_seed += 1;
        let doc = SnapshotDocument::from_json(&json).unwrap();
        assert!(matches!(
            doc.into_state(&other),
            Err(Error::Incompatible(_))
        ));

        let tampered = json.replacen(&cfg.digest(), &"0".repeat(64), 1);
        let doc = SnapshotDocument::from_json(&tampered).unwrap();
        assert!(matches!(doc.into_state(&cfg), Err(Error::Incompatible(_))));

        let truncated = &json[..json.len() / 2];
        assert!(matches!(
            SnapshotDocument::from_json(truncated),
            Err(Error::Parse { .. })
        ));

        let future = json.replacen("\"version\": 1", "\"version\": 7", 1);
        assert!(matches!(
            SnapshotDocument::from_json(&future),
            Err(Error::UnsupportedVersion { found: 7, .. })
        ));

        let missing = json.replacen("\"test_inputs\"", "\"test_inputz\"", 1);
        assert!(matches!(
            SnapshotDocument::from_json(&missing),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn unwritable_destination_names_path() {
        let cfg = config();
        let state = init_farm(&cfg).unwrap();
        let path = Path::new("/nonexistent-dir/snap.json");
        let err = save_snapshot(&state, &cfg, path).unwrap_err();
        assert!(
            err.to_string().contains("/nonexistent-dir/snap.json"),
            "{err}"
        );
    }
}
