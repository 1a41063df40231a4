//! Feature files: little-endian `f32`, row-major `N × 82`, with a JSON sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, FeatureMeta, Matrix, FEATURE_DIMS, LF0_COL, N_MELS, VUV_COL};
use crate::error::{Error, Result};

pub const FEATURE_EXT: &str = "f32";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnLayout {
    /// Half-open column range of the log-Mel block.
    pub log_mel: [usize; 2],
    pub continuous_log_f0: usize,
    pub vuv: usize,
}

impl Default for ColumnLayout {
    fn default() -> Self {
        Self {
            log_mel: [0, N_MELS],
            continuous_log_f0: LF0_COL,
            vuv: VUV_COL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub utterance_id: String,
    pub n_frames: usize,
    pub dims: usize,
    pub sample_rate: u32,
    pub hop_ms: f64,
    pub semitone_p: i32,
    pub source_file: String,
    pub column_layout: ColumnLayout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<String>,
}

pub fn sidecar_path(feature_path: &Path) -> PathBuf {
    feature_path.with_extension("json")
}

/// Writes `path` then its sidecar, each through a `.partial` file renamed into
/// place, so a complete sidecar implies a complete feature file.
pub fn write_features(path: &Path, fm: &FeatureMatrix) -> Result<()> {
    let mut bytes = Vec::with_capacity(fm.values().as_slice().len() * 4);
    for &v in fm.values().as_slice() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_atomic(path, &bytes)?;
    let meta = &fm.meta;
    let sidecar = FeatureSidecar {
        utterance_id: meta.utterance_id.clone(),
        n_frames: fm.n_frames(),
        dims: FEATURE_DIMS,
        sample_rate: meta.sample_rate,
        hop_ms: meta.hop_ms,
        semitone_p: meta.semitone_p,
        source_file: meta.source_file.clone(),
        column_layout: ColumnLayout::default(),
        speaker: meta.speaker.clone(),
        style: meta.style.clone(),
    };
    let side = sidecar_path(path);
    let mut json = serde_json::to_vec_pretty(&sidecar).map_err(|e| Error::json(&side, e))?;
    json.push(b'\n');
    write_atomic(&side, &json)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    let mut f = fs::File::create(&partial).map_err(|e| Error::io(&partial, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&partial, e))?;
    f.sync_all().map_err(|e| Error::io(&partial, e))?;
    fs::rename(&partial, path).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let side = sidecar_path(path);
    let text = fs::read(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: FeatureSidecar = serde_json::from_slice(&text).map_err(|e| Error::json(&side, e))?;
    let malformed = |reason: String| Error::MalformedFeatures {
        path: path.to_path_buf(),
        reason,
    };
    if sidecar.dims != FEATURE_DIMS {
        return Err(malformed(format!("sidecar declares {} dims", sidecar.dims)));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != sidecar.n_frames * FEATURE_DIMS * 4 {
        return Err(malformed(format!(
            "{} bytes for {} frames",
            bytes.len(),
            sidecar.n_frames
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let meta = FeatureMeta {
        utterance_id: sidecar.utterance_id,
        sample_rate: sidecar.sample_rate,
        hop_ms: sidecar.hop_ms,
        semitone_p: sidecar.semitone_p,
        source_file: sidecar.source_file,
        speaker: sidecar.speaker,
        style: sidecar.style,
    };
    FeatureMatrix::new(Matrix::new(data, sidecar.n_frames, FEATURE_DIMS)?, meta)
        .map_err(|e| malformed(e.to_string()))
}
