use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{Split, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::features::{F0Params, MelConfig, FEATURE_EXT};
use crate::pitchshift::ShiftOptions;
use crate::stft::StftConfig;

/// Semitone shifts applied on top of the always-emitted original:
/// every integer in `[-3, 12]` except 0, fifteen in all.
pub fn default_semitones() -> Vec<i32> {
    (-3..=12).filter(|&p| p != 0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationPlan {
    pub schema_version: u32,
    /// Shifts applied to augmented splits; must not contain 0.
    pub semitones: Vec<i32>,
    pub shift: ShiftOptions,
    pub stft: StftConfig,
    pub mel: MelConfig,
    pub f0: F0Params,
    /// Splits that receive shifted copies. Other splits get originals only.
    pub augment_splits: Vec<Split>,
}

impl Default for AugmentationPlan {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            semitones: default_semitones(),
            shift: ShiftOptions::default(),
            stft: StftConfig::default(),
            mel: MelConfig::default(),
            f0: F0Params::default(),
            augment_splits: vec![Split::Train],
        }
    }
}

impl AugmentationPlan {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read(path).map_err(|e| Error::io(path, e))?;
        let plan: Self = serde_json::from_slice(&text).map_err(|e| Error::json(path, e))?;
        Ok(plan)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported plan schema_version {}",
                self.schema_version
            )));
        }
        if self.semitones.contains(&0) {
            return Err(Error::InvalidConfig(
                "semitone set must not contain 0; originals are always emitted".into(),
            ));
        }
        let unique: HashSet<_> = self.semitones.iter().collect();
        if unique.len() != self.semitones.len() {
            return Err(Error::InvalidConfig("semitone set has duplicates".into()));
        }
        self.stft.validate()?;
        self.shift.validate()?;
        self.mel.validate(sample_rate as f64)?;
        self.f0.validate(sample_rate)?;
        if self.f0.hop_length != self.stft.hop_length {
            return Err(Error::InvalidConfig(format!(
                "F0 hop {} differs from STFT hop {}",
                self.f0.hop_length, self.stft.hop_length
            )));
        }
        Ok(())
    }

    /// Shifts emitted for an entry of `split`, original first.
    pub fn shifts_for(&self, split: Split) -> Vec<i32> {
        let mut out = vec![0];
        if self.augment_splits.contains(&split) {
            out.extend(&self.semitones);
        }
        out
    }
}

/// Output file for one utterance and shift: `<out>/<id>_p+03.f32`.
pub fn feature_path(out_dir: &Path, utterance_id: &str, p: i32) -> PathBuf {
    out_dir.join(format!("{utterance_id}_p{p:+03}.{FEATURE_EXT}"))
}

/// Inverse of [`feature_path`] on the file name.
pub fn parse_feature_name(file_name: &str) -> Option<(&str, i32)> {
    let stem = file_name.strip_suffix(&format!(".{FEATURE_EXT}"))?;
    let (id, p) = stem.rsplit_once("_p")?;
    if !(p.starts_with('+') || p.starts_with('-')) {
        return None;
    }
    Some((id, p.parse().ok()?))
}
