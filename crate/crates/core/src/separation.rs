//! Spectral envelope / fine structure separation by cepstral liftering.
//!
//! The log-magnitude of each frame is taken to the real cepstrum, the
//! coefficients above a quefrency cutoff are removed by a lag window, and the
//! remainder is transformed back to form the log envelope. The fine structure
//! is the residual, so `envelope * fine` reproduces the floored input.

use std::f64::consts::PI;
use std::sync::{Arc, LazyLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::registry::{Named, Registry};
use crate::stft::{fft_pair, Spectrogram};

/// Magnitude floor applied before taking logs.
pub const MAGNITUDE_FLOOR: f64 = 1e-10;
pub const DEFAULT_LIFTER_CUTOFF_MS: f64 = 2.0;

/// Weighting applied to cepstral coefficients `0..=cutoff`; everything above
/// the cutoff is always zeroed.
pub trait LagWindow: Named + Send + Sync {
    /// Weight for quefrency index `q`, `0 <= q <= cutoff`.
    fn weight(&self, q: usize, cutoff: usize) -> f64;
}

/// Hard cutoff.
pub struct RectangularLag;

/// Raised-cosine taper falling to zero at the cutoff.
pub struct HannLag;

impl Named for RectangularLag {
    fn name(&self) -> &'static str {
        "rectangular"
    }
}

impl LagWindow for RectangularLag {
    fn weight(&self, _q: usize, _cutoff: usize) -> f64 {
        1.0
    }
}

impl Named for HannLag {
    fn name(&self) -> &'static str {
        "hann"
    }
}

impl LagWindow for HannLag {
    fn weight(&self, q: usize, cutoff: usize) -> f64 {
        if cutoff == 0 {
            return 1.0;
        }
        0.5 * (1.0 + (PI * q as f64 / (cutoff + 1) as f64).cos())
    }
}

static LAG_WINDOWS: LazyLock<Registry<dyn LagWindow>> = LazyLock::new(|| {
    Registry::<dyn LagWindow>::new("lag window")
        .with(Arc::new(RectangularLag))
        .with(Arc::new(HannLag))
});

pub fn lag_windows() -> &'static Registry<dyn LagWindow> {
    &LAG_WINDOWS
}

/// Smooth, strictly positive factor of a separated spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEnvelope {
    pub values: Spectrogram,
    pub lifter_cutoff_ms: f64,
}

/// Residual factor carrying the harmonic structure.
#[derive(Debug, Clone, PartialEq)]
pub struct FineStructure {
    pub values: Spectrogram,
}

/// Cutoff quefrency in samples for a given spectrogram.
pub fn cutoff_index(spec: &Spectrogram, lifter_cutoff_ms: f64) -> Result<usize> {
    let window_ms = 1000.0 * spec.config.window_length as f64 / spec.sample_rate;
    if !(lifter_cutoff_ms > 0.0 && lifter_cutoff_ms < window_ms) {
        return Err(Error::InvalidConfig(format!(
            "lifter cutoff {lifter_cutoff_ms} ms outside (0, {window_ms}) ms"
        )));
    }
    let q = (lifter_cutoff_ms * spec.sample_rate / 1000.0).floor() as usize;
    let half = spec.config.fft_size / 2;
    if q >= half {
        return Err(Error::InvalidConfig(format!(
            "lifter cutoff of {q} samples reaches the cepstrum midpoint ({half})"
        )));
    }
    Ok(q)
}

/// Real cepstrum of one half-spectrum of log magnitudes (length `fft/2 + 1`),
/// returned over the full `fft` quefrency range.
pub fn real_cepstrum(log_half: &[f64]) -> Vec<f64> {
    let n_fft = 2 * (log_half.len() - 1);
    let mut buf = symmetrize(log_half);
    fft_pair(n_fft).1.process(&mut buf);
    buf.iter().map(|c| c.re / n_fft as f64).collect()
}

fn symmetrize(half: &[f64]) -> Vec<Complex64> {
    let n_fft = 2 * (half.len() - 1);
    (0..n_fft)
        .map(|j| {
            let k = if j < half.len() { j } else { n_fft - j };
            Complex64::new(half[k], 0.0)
        })
        .collect()
}

pub fn lag_window_separate(
    spec: &Spectrogram,
    lifter_cutoff_ms: f64,
) -> Result<(SpectralEnvelope, FineStructure)> {
    lag_window_separate_with(spec, lifter_cutoff_ms, &RectangularLag)
}

pub fn lag_window_separate_with(
    spec: &Spectrogram,
    lifter_cutoff_ms: f64,
    lag: &dyn LagWindow,
) -> Result<(SpectralEnvelope, FineStructure)> {
    if spec.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectrogram magnitudes"));
    }
    let cutoff = cutoff_index(spec, lifter_cutoff_ms)?;
    let n_fft = spec.config.fft_size;
    let n_bins = spec.n_bins();
    let weights: Vec<f64> = (0..=cutoff).map(|q| lag.weight(q, cutoff)).collect();

    let (fwd, inv) = fft_pair(n_fft);

    let (env, fine): (Vec<Vec<f64>>, Vec<Vec<f64>>) = spec
        .frames()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|frame| {
            let log_mag: Vec<f64> = frame.iter().map(|&m| m.max(MAGNITUDE_FLOOR).ln()).collect();
            let mut buf = symmetrize(&log_mag);
            inv.process(&mut buf);
            // lifter: keep low quefrencies on both sides of the (even) cepstrum
            for (q, c) in buf.iter_mut().enumerate() {
                let dist = q.min(n_fft - q);
                let w = if dist <= cutoff { weights[dist] } else { 0.0 };
                *c = Complex64::new(c.re * w / n_fft as f64, 0.0);
            }
            fwd.process(&mut buf);
            let env_log: Vec<f64> = buf[..n_bins].iter().map(|c| c.re).collect();
            let env: Vec<f64> = env_log.iter().map(|v| v.exp()).collect();
            let fine: Vec<f64> = log_mag
                .iter()
                .zip(&env_log)
                .map(|(l, e)| (l - e).exp())
                .collect();
            (env, fine)
        })
        .unzip();

    let rebuild = |rows: Vec<Vec<f64>>| {
        Spectrogram::from_frames(
            rows.concat(),
            spec.n_frames(),
            spec.config.clone(),
            spec.sample_rate,
        )
    };
    Ok((
        SpectralEnvelope {
            values: rebuild(env)?,
            lifter_cutoff_ms,
        },
        FineStructure {
            values: rebuild(fine)?,
        },
    ))
}

/// Elementwise product of an envelope and a fine structure.
pub fn recombine(env: &SpectralEnvelope, fine: &FineStructure) -> Result<Spectrogram> {
    if env.values.shape() != fine.values.shape() {
        return Err(Error::ShapeMismatch {
            expected: env.values.shape(),
            actual: fine.values.shape(),
        });
    }
    let data = env
        .values
        .as_slice()
        .iter()
        .zip(fine.values.as_slice())
        .map(|(e, f)| e * f)
        .collect();
    Spectrogram::from_frames(
        data,
        env.values.n_frames(),
        env.values.config.clone(),
        env.values.sample_rate,
    )
}
