//! Short-time Fourier analysis.
//!
//! Frames are centered: frame `t` is centered on sample `t * hop`, and the
//! signal is reflect-padded by `window_length / 2` on each side. Each frame is
//! tapered, zero-padded to `fft_size` and transformed; only magnitudes are
//! kept (`fft_size / 2 + 1` bins).

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::{Arc, LazyLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::f0loss::ResolutionSpec;
use crate::registry::{Named, Registry};

pub const DEFAULT_SAMPLE_RATE: u32 = 24_000;

/// A mono signal with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
    /// Bit depth of the source file; informational only.
    pub bit_depth_origin: u16,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be positive".into()));
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > 1.0)
        {
            return Err(Error::InvalidSample { index, value });
        }
        Ok(Self {
            samples,
            sample_rate,
            bit_depth_origin: 16,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Analysis taper applied to each frame before the DFT.
pub trait WindowFunction: Named + Send + Sync {
    fn coefficients(&self, len: usize) -> Vec<f64>;
}

/// Periodic Hann window.
pub struct Hann;
/// Periodic Hamming window.
pub struct Hamming;
pub struct Rectangular;

impl Named for Hann {
    fn name(&self) -> &'static str {
        "hann"
    }
}

impl WindowFunction for Hann {
    fn coefficients(&self, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
            .collect()
    }
}

impl Named for Hamming {
    fn name(&self) -> &'static str {
        "hamming"
    }
}

impl WindowFunction for Hamming {
    fn coefficients(&self, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / len as f64).cos())
            .collect()
    }
}

impl Named for Rectangular {
    fn name(&self) -> &'static str {
        "rectangular"
    }
}

impl WindowFunction for Rectangular {
    fn coefficients(&self, len: usize) -> Vec<f64> {
        vec![1.0; len]
    }
}

static WINDOWS: LazyLock<Registry<dyn WindowFunction>> = LazyLock::new(|| {
    Registry::<dyn WindowFunction>::new("window")
        .with(Arc::new(Hann))
        .with(Arc::new(Hamming))
        .with(Arc::new(Rectangular))
});

pub fn windows() -> &'static Registry<dyn WindowFunction> {
    &WINDOWS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop_length: usize,
    pub fft_size: usize,
    pub window: String,
}

impl Default for StftConfig {
    /// 40 ms Hann window, 5 ms hop, 1024-point FFT at 24 kHz.
    fn default() -> Self {
        Self {
            window_length: 960,
            hop_length: 120,
            fft_size: 1024,
            window: "hann".into(),
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop_length == 0 {
            return Err(Error::InvalidConfig("hop_length must be positive".into()));
        }
        if self.hop_length > self.window_length {
            return Err(Error::InvalidConfig(format!(
                "hop_length {} exceeds window_length {}",
                self.hop_length, self.window_length
            )));
        }
        if self.window_length > self.fft_size {
            return Err(Error::InvalidConfig(format!(
                "window_length {} exceeds fft_size {}",
                self.window_length, self.fft_size
            )));
        }
        if !self.fft_size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "fft_size {} is not a power of two",
                self.fft_size
            )));
        }
        windows().get(&self.window)?;
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of centered frames produced for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        let pad = self.window_length / 2;
        (len + 2 * pad - self.window_length) / self.hop_length + 1
    }

    /// Index into the unpadded signal of sample `m` of frame `t`, with reflect
    /// padding resolved.
    pub fn source_index(&self, frame: usize, m: usize, len: usize) -> usize {
        let pos = (frame * self.hop_length + m) as isize - (self.window_length / 2) as isize;
        reflect_index(pos, len)
    }
}

/// Maps a possibly out-of-range position onto `[0, len)` by mirror reflection
/// about the end samples (the end samples themselves are not repeated).
pub fn reflect_index(pos: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut p = pos.rem_euclid(period);
    if p >= len as isize {
        p = period - p;
    }
    p as usize
}

/// Magnitude spectrogram, frames × bins, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<f64>,
    n_frames: usize,
    n_bins: usize,
    pub config: StftConfig,
    /// Rate of the analysed sequence in Hz (1.0 for unitless sequences).
    pub sample_rate: f64,
}

impl Spectrogram {
    pub fn from_frames(
        data: Vec<f64>,
        n_frames: usize,
        config: StftConfig,
        sample_rate: f64,
    ) -> Result<Self> {
        let n_bins = config.n_bins();
        if data.len() != n_frames * n_bins {
            return Err(Error::ShapeMismatch {
                expected: (n_frames, n_bins),
                actual: (data.len() / n_bins.max(1), n_bins),
            });
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite("spectrogram magnitudes"));
        }
        Ok(Self {
            data,
            n_frames,
            n_bins,
            config,
            sample_rate,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_frames, self.n_bins)
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_bins)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Centre frequency in Hz of bin `k`.
    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate / self.config.fft_size as f64
    }

    /// Copy with every magnitude raised to at least `floor`.
    pub fn floored(&self, floor: f64) -> Spectrogram {
        Spectrogram {
            data: self.data.iter().map(|&v| v.max(floor)).collect(),
            ..self.clone()
        }
    }
}

/// Complex STFT frames, used where phase is needed (loss gradients).
pub(crate) struct ComplexFrames {
    pub spectra: Vec<Vec<Complex64>>,
    pub window: Vec<f64>,
    pub ifft: Arc<dyn Fft<f64>>,
}

const PARALLEL_MIN_POINTS: usize = 1 << 16;

thread_local! {
    // planners cache plans by size
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward and inverse plans of size `n`.
pub(crate) fn fft_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

pub(crate) fn stft_complex(seq: &[f64], cfg: &StftConfig) -> Result<ComplexFrames> {
    cfg.validate()?;
    let window = windows().get(&cfg.window)?.coefficients(cfg.window_length);
    let (fft, ifft) = fft_pair(cfg.fft_size);
    let n_frames = cfg.n_frames(seq.len());
    let frame = |t: usize| {
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
        for (m, (slot, w)) in buf.iter_mut().zip(&window).enumerate() {
            *slot = Complex64::new(w * seq[cfg.source_index(t, m, seq.len())], 0.0);
        }
        fft.process(&mut buf);
        buf
    };
    // thread hand-off costs more than small transforms
    let spectra = if n_frames * cfg.fft_size >= PARALLEL_MIN_POINTS {
        (0..n_frames).into_par_iter().map(frame).collect()
    } else {
        (0..n_frames).map(frame).collect()
    };
    Ok(ComplexFrames {
        spectra,
        window,
        ifft,
    })
}

fn magnitudes(seq: &[f64], cfg: &StftConfig, sample_rate: f64) -> Result<Spectrogram> {
    let frames = stft_complex(seq, cfg)?;
    let n_bins = cfg.n_bins();
    let n_frames = frames.spectra.len();
    let data = frames
        .spectra
        .iter()
        .flat_map(|s| s[..n_bins].iter().map(|c| c.norm()))
        .collect();
    Spectrogram::from_frames(data, n_frames, cfg.clone(), sample_rate)
}

pub fn stft_magnitude(wave: &Waveform, cfg: &StftConfig) -> Result<Spectrogram> {
    if wave.is_empty() {
        return Err(Error::EmptyWaveform);
    }
    magnitudes(wave.samples(), cfg, wave.sample_rate() as f64)
}

/// STFT magnitudes of an arbitrary real sequence at a loss resolution.
/// The returned spectrogram has a unit sample rate.
pub fn magnitude_for_sequence(seq: &[f64], res: &ResolutionSpec) -> Result<Spectrogram> {
    if seq.len() < res.window_size {
        return Err(Error::SequenceTooShort {
            len: seq.len(),
            window: res.window_size,
        });
    }
    if seq.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sequence"));
    }
    magnitudes(seq, &res.stft_config(), 1.0)
}
