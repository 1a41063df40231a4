use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{CorpusManifest, SCHEMA_VERSION};
use super::plan::{feature_path, parse_feature_name};
use crate::error::{Error, Result};
use crate::features::{read_features, sidecar_path, write_atomic, NormAccumulator, NormStats, FEATURE_DIMS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsProvenance {
    pub manifest: String,
    pub feature_dir: String,
    pub utterances: usize,
    pub files: usize,
    pub include_augmented: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub schema_version: u32,
    pub dims: usize,
    #[serde(flatten)]
    pub stats: NormStats,
    pub provenance: StatsProvenance,
}

impl StatsFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(self).map_err(|e| Error::json(path, e))?;
        json.push(b'\n');
        write_atomic(path, &json)
    }
}

/// Shifted feature files present in `dir`, grouped by utterance id and sorted
/// by shift.
fn augmented_files(dir: &Path) -> Result<BTreeMap<String, Vec<(i32, PathBuf)>>> {
    let mut out: BTreeMap<String, Vec<(i32, PathBuf)>> = BTreeMap::new();
    for item in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let item = item.map_err(|e| Error::io(dir, e))?;
        let name = item.file_name();
        let Some((id, p)) = name.to_str().and_then(parse_feature_name) else {
            continue;
        };
        if p != 0 && sidecar_path(&item.path()).is_file() {
            out.entry(id.to_string()).or_default().push((p, item.path()));
        }
    }
    for files in out.values_mut() {
        files.sort();
    }
    Ok(out)
}

/// Normalization statistics over the train split only, in manifest order.
pub fn run_stats(
    manifest: &CorpusManifest,
    manifest_path: &Path,
    feature_dir: &Path,
    include_augmented: bool,
) -> Result<StatsFile> {
    let train: Vec<_> = manifest.train_entries().collect();
    if train.is_empty() {
        return Err(Error::Manifest("train split is empty".into()));
    }
    let augmented = if include_augmented {
        augmented_files(feature_dir)?
    } else {
        BTreeMap::new()
    };
    let mut files = Vec::new();
    let mut missing = Vec::new();
    for entry in &train {
        let original = feature_path(feature_dir, &entry.utterance_id, 0);
        if original.is_file() && sidecar_path(&original).is_file() {
            files.push(original);
        } else {
            missing.push(original);
        }
        if let Some(shifted) = augmented.get(&entry.utterance_id) {
            files.extend(shifted.iter().map(|(_, p)| p.clone()));
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingFeatures(missing));
    }
    let mut acc = NormAccumulator::default();
    for path in &files {
        acc.merge(&NormAccumulator::from_matrix(&read_features(path)?));
    }
    Ok(StatsFile {
        schema_version: SCHEMA_VERSION,
        dims: FEATURE_DIMS,
        stats: acc.finish()?,
        provenance: StatsProvenance {
            manifest: manifest_path.display().to_string(),
            feature_dir: feature_dir.display().to_string(),
            utterances: train.len(),
            files: files.len(),
            include_augmented,
        },
    })
}
