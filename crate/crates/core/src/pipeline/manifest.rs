use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::DEFAULT_SAMPLE_RATE;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub utterance_id: String,
    /// Relative paths resolve against the manifest's directory.
    pub wav_path: PathBuf,
    pub speaker: String,
    pub style: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioConfig {
    pub sample_rate: u32,
    /// Linearly resample WAVs recorded at other rates instead of rejecting them.
    pub resample: bool,
}

impl Default for AudioConfig {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            resample: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub schema_version: u32,
    #[serde(default)]
    pub audio: AudioConfig,
    /// Declared style tags; every entry's style must be one of these.
    pub styles: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn train_entries(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.split == Split::Train)
    }

    /// Checks every invariant except file existence.
    pub fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.entries.is_empty() {
            return Err(Error::Manifest("empty corpus".into()));
        }
        if self.audio.sample_rate == 0 {
            return Err(Error::Manifest("audio.sample_rate must be positive".into()));
        }
        let styles: HashSet<&str> = self.styles.iter().map(String::as_str).collect();
        let mut seen = HashSet::new();
        for e in &self.entries {
            check_id(&e.utterance_id)?;
            if !seen.insert(e.utterance_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate utterance_id `{}`", e.utterance_id)));
            }
            if !styles.contains(e.style.as_str()) {
                return Err(Error::Manifest(format!(
                    "utterance `{}` has undeclared style `{}`",
                    e.utterance_id, e.style
                )));
            }
        }
        Ok(())
    }
}

/// Ids become file names, so keep them to a portable character set.
fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Manifest(format!(
            "utterance_id `{id}` must be non-empty and use only [A-Za-z0-9_.-]"
        )))
    }
}

/// Parses and validates a manifest. WAV paths in the result are resolved
/// against the manifest's directory and must exist.
pub fn validate_manifest(path: &Path) -> Result<CorpusManifest> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: CorpusManifest = serde_json::from_slice(&text).map_err(|e| Error::json(path, e))?;
    manifest.check()?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut missing = Vec::new();
    for e in &mut manifest.entries {
        if e.wav_path.is_relative() {
            e.wav_path = base.join(&e.wav_path);
        }
        if !e.wav_path.is_file() {
            missing.push(format!("{} ({})", e.utterance_id, e.wav_path.display()));
        }
    }
    if !missing.is_empty() {
        return Err(Error::Manifest(format!("missing wav files: {}", missing.join(", "))));
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn write(dir: &Path, value: serde_json::Value) -> PathBuf {
        let p = dir.join("manifest.json");
        fs::write(&p, serde_json::to_vec(&value).unwrap()).unwrap();
        p
    }

    fn entry(id: &str, wav: &str) -> serde_json::Value {
        json!({"utterance_id": id, "wav_path": wav, "speaker": "spk", "style": "neutral", "split": "train"})
    }

    fn with_wavs(dir: &Path, names: &[&str]) {
        for n in names {
            fs::write(dir.join(n), b"").unwrap();
        }
    }

    #[test]
    fn valid_three_entry_manifest() {
        let dir = tempfile::tempdir().unwrap();
        with_wavs(dir.path(), &["a.wav", "b.wav", "c.wav"]);
        let p = write(dir.path(), json!({
            "schema_version": 1,
            "styles": ["neutral"],
            "entries": [entry("a", "a.wav"), entry("b", "b.wav"), entry("c", "c.wav")]
        }));
        let m = validate_manifest(&p).unwrap();
        assert_eq!(m.entries.len(), 3);
        assert_eq!(m.audio, AudioConfig::default());
        assert_eq!(m.entries[1].wav_path, dir.path().join("b.wav"));
    }

    #[test]
    fn empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), json!({"schema_version": 1, "styles": ["neutral"], "entries": []}));
        let err = validate_manifest(&p).unwrap_err();
        assert!(err.to_string().contains("empty corpus"), "{err}");
    }

    #[test]
    fn duplicate_id_is_named() {
        let dir = tempfile::tempdir().unwrap();
        with_wavs(dir.path(), &["a.wav"]);
        let p = write(dir.path(), json!({
            "schema_version": 1, "styles": ["neutral"],
            "entries": [entry("utt7", "a.wav"), entry("utt7", "a.wav")]
        }));
        let err = validate_manifest(&p).unwrap_err();
        assert!(err.to_string().contains("utt7"), "{err}");
    }

    #[test]
    fn missing_file_unknown_style_bad_json() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), json!({"schema_version": 1, "styles": ["neutral"], "entries": [entry("a", "nope.wav")]}));
        assert!(validate_manifest(&p).unwrap_err().to_string().contains("nope.wav"));

        with_wavs(dir.path(), &["a.wav"]);
        let mut e = entry("a", "a.wav");
        e["style"] = json!("angry");
        let p = write(dir.path(), json!({"schema_version": 1, "styles": ["neutral"], "entries": [e]}));
        assert!(validate_manifest(&p).unwrap_err().to_string().contains("angry"));

        let bad = dir.path().join("bad.json");
        fs::write(&bad, b"{ not json").unwrap();
        let err = validate_manifest(&bad).unwrap_err();
        assert!(matches!(err, Error::Json { .. }));
        assert!(err.is_invalid_input());

        let p = write(dir.path(), json!({"schema_version": 2, "styles": ["neutral"], "entries": [entry("a", "a.wav")]}));
        assert!(validate_manifest(&p).is_err());

        let p = write(dir.path(), json!({"schema_version": 1, "styles": ["neutral"], "entries": [entry("../x", "a.wav")]}));
        assert!(validate_manifest(&p).is_err());
    }
}
