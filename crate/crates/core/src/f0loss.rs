//! STFT-based F0 regularization loss.
//!
//! For a reference contour `x` and a prediction `x̂`, each resolution computes
//! STFT magnitudes of both sequences and averages `|log X - log X̂|` over all
//! frames and over the bins from `beta` upward. Bins are counted from 1, so
//! `beta = 3` drops the DC bin and the first bin: the slowly varying level of
//! the contour is left alone and only its fast fluctuation is penalized.
//! Resolutions are averaged with equal weight and the result is scaled by
//! `weight`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::{magnitude_for_sequence, stft_complex, Spectrogram, StftConfig};

/// Magnitude floor inside the log.
pub const LOSS_FLOOR: f64 = 1e-7;

/// One STFT resolution, in frames of the F0 sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionSpec {
    pub fft_size: usize,
    pub window_size: usize,
    pub hop_size: usize,
}

impl ResolutionSpec {
    pub const fn new(fft_size: usize, window_size: usize, hop_size: usize) -> Self {
        Self {
            fft_size,
            window_size,
            hop_size,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn stft_config(&self) -> StftConfig {
        StftConfig {
            window_length: self.window_size,
            hop_length: self.hop_size,
            fft_size: self.fft_size,
            window: "hann".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop_size == 0 || self.window_size == 0 {
            return Err(Error::InvalidConfig(format!("degenerate resolution {self:?}")));
        }
        self.stft_config().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// First bin (1-based) included in the sum.
    pub beta: usize,
    pub resolutions: Vec<ResolutionSpec>,
    pub weight: f64,
    pub floor: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: 3,
            resolutions: vec![
                ResolutionSpec::new(32, 32, 8),
                ResolutionSpec::new(64, 64, 16),
                ResolutionSpec::new(128, 128, 32),
            ],
            weight: 0.1,
            floor: LOSS_FLOOR,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolutions.is_empty() {
            return Err(Error::InvalidConfig("loss needs at least one resolution".into()));
        }
        for r in &self.resolutions {
            r.validate()?;
        }
        let min_bins = self.resolutions.iter().map(|r| r.n_bins()).min().unwrap();
        if self.beta < 1 || self.beta > min_bins {
            return Err(Error::InvalidConfig(format!(
                "beta {} outside [1, {min_bins}]",
                self.beta
            )));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidConfig(format!("weight {} must be >= 0", self.weight)));
        }
        if !(self.floor > 0.0) {
            return Err(Error::InvalidConfig("magnitude floor must be positive".into()));
        }
        Ok(())
    }

    pub fn max_window(&self) -> usize {
        self.resolutions.iter().map(|r| r.window_size).max().unwrap_or(0)
    }
}

/// Mean of `|log X - log X̂|` over all frames and bins `beta..=K` (1-based).
pub fn f0_stft_loss_from_magnitudes(
    x: &Spectrogram,
    xhat: &Spectrogram,
    beta: usize,
    floor: f64,
) -> Result<f64> {
    if x.shape() != xhat.shape() {
        return Err(Error::ShapeMismatch {
            expected: x.shape(),
            actual: xhat.shape(),
        });
    }
    let (n, k) = x.shape();
    if beta < 1 || beta > k {
        return Err(Error::InvalidConfig(format!("beta {beta} outside [1, {k}]")));
    }
    let m = (n * (k - beta + 1)) as f64;
    let mut sum = 0.0;
    for (a, b) in x.frames().zip(xhat.frames()) {
        for (p, q) in a[beta - 1..].iter().zip(&b[beta - 1..]) {
            sum += (p.max(floor).ln() - q.max(floor).ln()).abs();
        }
    }
    Ok(sum / m)
}

fn check_pair(f0: &[f64], f0hat: &[f64]) -> Result<()> {
    if f0.len() != f0hat.len() {
        return Err(Error::LengthMismatch {
            left: f0.len(),
            right: f0hat.len(),
        });
    }
    Ok(())
}

/// Single-resolution loss between two sequences.
pub fn f0_stft_loss(
    f0: &[f64],
    f0hat: &[f64],
    res: &ResolutionSpec,
    beta: usize,
    floor: f64,
) -> Result<f64> {
    check_pair(f0, f0hat)?;
    let x = magnitude_for_sequence(f0, res)?;
    let xhat = magnitude_for_sequence(f0hat, res)?;
    f0_stft_loss_from_magnitudes(&x, &xhat, beta, floor)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionLoss {
    #[serde(flatten)]
    pub resolution: ResolutionSpec,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossBreakdown {
    /// `weight × mean(per_resolution)`.
    pub total: f64,
    pub weight: f64,
    pub beta: usize,
    /// Unweighted single-resolution losses.
    pub per_resolution: Vec<ResolutionLoss>,
}

pub fn multires_f0_loss_breakdown(f0: &[f64], f0hat: &[f64], cfg: &LossConfig) -> Result<LossBreakdown> {
    cfg.validate()?;
    check_pair(f0, f0hat)?;
    let per_resolution = cfg
        .resolutions
        .iter()
        .map(|res| {
            Ok(ResolutionLoss {
                resolution: *res,
                loss: f0_stft_loss(f0, f0hat, res, cfg.beta, cfg.floor)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = per_resolution.iter().map(|r| r.loss).sum::<f64>() / per_resolution.len() as f64;
    Ok(LossBreakdown {
        total: cfg.weight * mean,
        weight: cfg.weight,
        beta: cfg.beta,
        per_resolution,
    })
}

pub fn multires_f0_loss(f0: &[f64], f0hat: &[f64], cfg: &LossConfig) -> Result<f64> {
    Ok(multires_f0_loss_breakdown(f0, f0hat, cfg)?.total)
}

/// Gradient of [`multires_f0_loss`] with respect to `f0hat`.
///
/// Subgradient conventions: a term contributes nothing where the two log
/// magnitudes are equal or where the predicted magnitude sits at or below the
/// floor.
pub fn multires_f0_loss_gradient(f0: &[f64], f0hat: &[f64], cfg: &LossConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_pair(f0, f0hat)?;
    let mut grad = vec![0.0; f0hat.len()];
    let scale = cfg.weight / cfg.resolutions.len() as f64;
    for res in &cfg.resolutions {
        accumulate_gradient(f0, f0hat, res, cfg.beta, cfg.floor, scale, &mut grad)?;
    }
    Ok(grad)
}

fn accumulate_gradient(
    f0: &[f64],
    f0hat: &[f64],
    res: &ResolutionSpec,
    beta: usize,
    floor: f64,
    scale: f64,
    grad: &mut [f64],
) -> Result<()> {
    let x = magnitude_for_sequence(f0, res)?;
    if f0hat.len() < res.window_size {
        return Err(Error::SequenceTooShort {
            len: f0hat.len(),
            window: res.window_size,
        });
    }
    let cfg = res.stft_config();
    let frames = stft_complex(f0hat, &cfg)?;
    let n_bins = res.n_bins();
    let m = (frames.spectra.len() * (n_bins - beta + 1)) as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); res.fft_size];
    for (t, spectrum) in frames.spectra.iter().enumerate() {
        buf.fill(Complex64::new(0.0, 0.0));
        let reference = x.frame(t);
        for k in beta - 1..n_bins {
            let z = spectrum[k];
            let mag = z.norm();
            if mag <= floor {
                continue;
            }
            let diff = mag.ln() - reference[k].max(floor).ln();
            if diff == 0.0 {
                continue;
            }
            // d log|Z_k| / d y_m = w_m Re(Z_k e^{+i 2π k m / F}) / |Z_k|^2
            buf[k] = z * (diff.signum() / (m * mag * mag));
        }
        frames.ifft.process(&mut buf);
        for (i, (b, w)) in buf.iter().zip(&frames.window).enumerate() {
            grad[cfg.source_index(t, i, f0hat.len())] += scale * w * b.re;
        }
    }
    Ok(())
}
