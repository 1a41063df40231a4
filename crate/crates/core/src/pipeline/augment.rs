//! Corpus-level pitch-shift augmentation.
//!
//! Each utterance is analysed once (STFT, F0, continuous log F0) and then
//! emitted at every shift in its plan. Work is spread over a bounded pool of
//! workers, one utterance per task. Output paths depend only on the utterance
//! id and the shift, so the produced files do not depend on scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{CorpusManifest, ManifestEntry};
use super::plan::{feature_path, AugmentationPlan};
use crate::error::{Error, Result};
use crate::features::{
    assemble_features, continuize_log_f0, extract_f0, log_mel, shift_continuous_log_f0, sidecar_path,
    write_features, ContinuousLogF0, FeatureMeta,
};
use crate::pitchshift::pitch_shift_spectrogram_with;
use crate::stft::stft_magnitude;
use crate::wav::read_wav;

pub const SUMMARY_FILE: &str = "augment_summary.json";

/// Marker left next to the outputs of an utterance that failed.
pub fn partial_marker(out_dir: &Path, utterance_id: &str) -> PathBuf {
    out_dir.join(format!("{utterance_id}.partial"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub utterance_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSummary {
    pub utterances: usize,
    /// Feature files present for successful utterances (written or resumed).
    pub feature_files: usize,
    pub originals: usize,
    pub augmented: usize,
    /// Files already complete from an earlier run and left untouched.
    pub resumed: usize,
    pub failures: Vec<Failure>,
}

impl AugmentSummary {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }
}

struct UtteranceOutcome {
    originals: usize,
    augmented: usize,
    resumed: usize,
}

fn is_complete(path: &Path) -> bool {
    path.is_file() && sidecar_path(path).is_file()
}

/// Worker count: `PSFORGE_WORKERS` if set and positive, otherwise the number
/// of available cores.
pub fn default_workers() -> usize {
    std::env::var("PSFORGE_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs the plan over every manifest entry, writing feature files into
/// `out_dir`. Per-utterance failures are collected, not propagated; the
/// returned error is reserved for invalid plans and unusable output paths.
pub fn augment_corpus(
    manifest: &CorpusManifest,
    plan: &AugmentationPlan,
    out_dir: &Path,
    workers: usize,
) -> Result<AugmentSummary> {
    plan.validate(manifest.audio.sample_rate)?;
    manifest.check()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;

    let outcomes: Vec<(String, Result<UtteranceOutcome>)> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|entry| {
                let result = process_utterance(manifest, plan, entry, out_dir);
                let marker = partial_marker(out_dir, &entry.utterance_id);
                match &result {
                    Ok(_) => {
                        let _ = fs::remove_file(&marker);
                    }
                    Err(e) => {
                        log::error!("{}: {e}", entry.utterance_id);
                        let _ = fs::write(&marker, format!("{e}\n"));
                    }
                }
                (entry.utterance_id.clone(), result)
            })
            .collect()
    });

    let mut summary = AugmentSummary {
        utterances: manifest.entries.len(),
        feature_files: 0,
        originals: 0,
        augmented: 0,
        resumed: 0,
        failures: Vec::new(),
    };
    for (id, outcome) in outcomes {
        match outcome {
            Ok(o) => {
                summary.originals += o.originals;
                summary.augmented += o.augmented;
                summary.resumed += o.resumed;
            }
            Err(e) => summary.failures.push(Failure {
                utterance_id: id,
                error: e.to_string(),
            }),
        }
    }
    summary.feature_files = summary.originals + summary.augmented;
    Ok(summary)
}

/// Writes the summary next to the outputs.
pub fn write_summary(out_dir: &Path, summary: &AugmentSummary) -> Result<()> {
    let path = out_dir.join(SUMMARY_FILE);
    let mut json = serde_json::to_vec_pretty(summary).map_err(|e| Error::json(&path, e))?;
    json.push(b'\n');
    crate::features::write_atomic(&path, &json)
}

/// Continuous log F0 rounded through `f32`, the precision of feature files.
/// Shifts are then added to exactly the value stored for the original, so
/// `stored_shifted == f32(stored_original + p/12 · ln 2)` holds bit for bit.
fn quantized(clf0: &ContinuousLogF0) -> Result<ContinuousLogF0> {
    ContinuousLogF0::new(clf0.values().iter().map(|&v| v as f32 as f64).collect())
}

fn process_utterance(
    manifest: &CorpusManifest,
    plan: &AugmentationPlan,
    entry: &ManifestEntry,
    out_dir: &Path,
) -> Result<UtteranceOutcome> {
    let shifts = plan.shifts_for(entry.split);
    let paths: Vec<(i32, PathBuf)> = shifts
        .iter()
        .map(|&p| (p, feature_path(out_dir, &entry.utterance_id, p)))
        .collect();
    let pending: Vec<&(i32, PathBuf)> = paths.iter().filter(|(_, path)| !is_complete(path)).collect();
    let mut outcome = UtteranceOutcome {
        originals: 0,
        augmented: 0,
        resumed: paths.len() - pending.len(),
    };
    for (p, path) in &paths {
        if is_complete(path) {
            if *p == 0 {
                outcome.originals += 1;
            } else {
                outcome.augmented += 1;
            }
        }
    }
    if pending.is_empty() {
        return Ok(outcome);
    }

    let audio = &manifest.audio;
    let wave = read_wav(&entry.wav_path, audio.sample_rate, audio.resample)?;
    let spec = stft_magnitude(&wave, &plan.stft)?;
    let contour = extract_f0(&wave, &plan.f0)?;
    let clf0 = quantized(&continuize_log_f0(&contour)?)?;
    let hop_ms = 1000.0 * plan.stft.hop_length as f64 / wave.sample_rate() as f64;

    for (p, path) in pending {
        let shifted = if *p == 0 {
            spec.clone()
        } else {
            pitch_shift_spectrogram_with(&spec, *p as f64, &plan.shift)?
        };
        let mel = log_mel(&shifted, &plan.mel)?;
        let lf0 = shift_continuous_log_f0(&clf0, *p as f64)?;
        let meta = FeatureMeta {
            utterance_id: entry.utterance_id.clone(),
            sample_rate: wave.sample_rate(),
            hop_ms,
            semitone_p: *p,
            source_file: entry.wav_path.display().to_string(),
            speaker: Some(entry.speaker.clone()),
            style: Some(entry.style.clone()),
        };
        // V/UV always comes from the original analysis
        let fm = assemble_features(&mel, &lf0, contour.vuv(), meta)?;
        write_features(path, &fm)?;
        if *p == 0 {
            outcome.originals += 1;
        } else {
            outcome.augmented += 1;
        }
    }
    Ok(outcome)
}
