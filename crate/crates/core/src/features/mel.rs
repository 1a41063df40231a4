use std::sync::{Arc, LazyLock};

use serde::{Deserialize, Serialize};

use super::{Matrix, MEL_FLOOR};
use crate::error::{Error, Result};
use crate::registry::{Named, Registry};
use crate::stft::Spectrogram;

/// HTK Mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Gain applied to a triangle with corners `lo < centre < hi` (Hz).
pub trait MelNormalization: Named + Send + Sync {
    fn gain(&self, lo: f64, centre: f64, hi: f64) -> f64;
}

/// Unit area over Hz.
pub struct AreaNorm;
/// Unit peak height.
pub struct PeakNorm;

impl Named for AreaNorm {
    fn name(&self) -> &'static str {
        "area"
    }
}

impl MelNormalization for AreaNorm {
    fn gain(&self, lo: f64, _centre: f64, hi: f64) -> f64 {
        2.0 / (hi - lo)
    }
}

impl Named for PeakNorm {
    fn name(&self) -> &'static str {
        "peak"
    }
}

impl MelNormalization for PeakNorm {
    fn gain(&self, _lo: f64, _centre: f64, _hi: f64) -> f64 {
        1.0
    }
}

static NORMS: LazyLock<Registry<dyn MelNormalization>> = LazyLock::new(|| {
    Registry::<dyn MelNormalization>::new("mel normalization")
        .with(Arc::new(AreaNorm))
        .with(Arc::new(PeakNorm))
});

pub fn mel_normalizations() -> &'static Registry<dyn MelNormalization> {
    &NORMS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MelConfig {
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub normalization: String,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: super::N_MELS,
            fmin: 0.0,
            fmax: 12_000.0,
            normalization: "area".into(),
        }
    }
}

impl MelConfig {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if self.n_mels == 0 {
            return Err(Error::InvalidConfig("n_mels must be at least 1".into()));
        }
        if !(0.0 <= self.fmin && self.fmin < self.fmax && self.fmax <= sample_rate / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "mel range [{}, {}] invalid for sample rate {sample_rate}",
                self.fmin, self.fmax
            )));
        }
        mel_normalizations().get(&self.normalization)?;
        Ok(())
    }
}

/// Triangular filters, `n_mels × n_bins`.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    weights: Matrix,
    /// Corner frequencies, `n_mels + 2` points in Hz.
    pub edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn apply(&self, frame: &[f64]) -> Vec<f64> {
        self.weights
            .iter_rows()
            .map(|w| w.iter().zip(frame).map(|(a, b)| a * b).sum())
            .collect()
    }
}

pub fn mel_filterbank(cfg: &MelConfig, sample_rate: f64, fft_size: usize) -> Result<MelFilterbank> {
    cfg.validate(sample_rate)?;
    let norm = mel_normalizations().get(&cfg.normalization)?;
    let (mlo, mhi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax));
    let edges_hz: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let n_bins = fft_size / 2 + 1;
    let mut weights = Matrix::zeros(cfg.n_mels, n_bins);
    for m in 0..cfg.n_mels {
        let (lo, centre, hi) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
        let gain = norm.gain(lo, centre, hi);
        for (k, w) in weights.row_mut(m).iter_mut().enumerate() {
            let f = k as f64 * sample_rate / fft_size as f64;
            let rise = (f - lo) / (centre - lo);
            let fall = (hi - f) / (hi - centre);
            *w = gain * rise.min(fall).max(0.0);
        }
    }
    Ok(MelFilterbank { weights, edges_hz })
}

/// `log(max(filterbank · magnitude, 1e-10))` for every frame.
pub fn log_mel(spec: &Spectrogram, cfg: &MelConfig) -> Result<Matrix> {
    let bank = mel_filterbank(cfg, spec.sample_rate, spec.config.fft_size)?;
    let mut data = Vec::with_capacity(spec.n_frames() * cfg.n_mels);
    for frame in spec.frames() {
        data.extend(bank.apply(frame).into_iter().map(|e| e.max(MEL_FLOOR).ln()));
    }
    Matrix::new(data, spec.n_frames(), cfg.n_mels)
}
