use std::f64::consts::LN_2;
use std::sync::{Arc, LazyLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{Named, Registry};
use crate::stft::Waveform;

/// Per-frame F0 in Hz (0 when unvoiced) with voicing flags.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Contour {
    values: Vec<f64>,
    vuv: Vec<bool>,
}

impl F0Contour {
    pub fn new(values: Vec<f64>, vuv: Vec<bool>) -> Result<Self> {
        if values.len() != vuv.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: vuv.len(),
            });
        }
        for (&f, &v) in values.iter().zip(&vuv) {
            if !f.is_finite() || f < 0.0 || (f > 0.0) != v {
                return Err(Error::InvalidConfig(format!(
                    "inconsistent F0 frame: {f} Hz, voiced = {v}"
                )));
            }
        }
        Ok(Self { values, vuv })
    }

    /// Builds a contour from Hz values, treating non-positive entries as unvoiced.
    pub fn from_hz(values: Vec<f64>) -> Result<Self> {
        let vuv = values.iter().map(|&f| f > 0.0).collect();
        let values = values.into_iter().map(|f| f.max(0.0)).collect();
        Self::new(values, vuv)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vuv(&self) -> &[bool] {
        &self.vuv
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.vuv.iter().filter(|&&v| v).count()
    }
}

/// Natural-log F0 defined at every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousLogF0 {
    values: Vec<f64>,
}

impl ContinuousLogF0 {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("continuous log F0"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Fills unvoiced gaps by linear interpolation of log F0 over frame index and
/// holds the nearest voiced value across leading and trailing gaps.
pub fn continuize_log_f0(contour: &F0Contour) -> Result<ContinuousLogF0> {
    let voiced: Vec<usize> = (0..contour.len()).filter(|&t| contour.vuv[t]).collect();
    let (&first, &last) = match (voiced.first(), voiced.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::NoVoicedFrames),
    };
    let log = |t: usize| contour.values[t].ln();
    let mut out = vec![0.0; contour.len()];
    out[..=first].fill(log(first));
    out[last..].fill(log(last));
    for pair in voiced.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (la, lb) = (log(a), log(b));
        out[a] = la;
        let span = (b - a) as f64;
        for (t, slot) in out.iter_mut().enumerate().take(b).skip(a + 1) {
            *slot = la + (lb - la) * (t - a) as f64 / span;
        }
    }
    ContinuousLogF0::new(out)
}

/// Adds `(p / 12) · ln 2` to every frame, i.e. multiplies F0 by `2^(p/12)`.
pub fn shift_continuous_log_f0(clf0: &ContinuousLogF0, p: f64) -> Result<ContinuousLogF0> {
    if !p.is_finite() {
        return Err(Error::InvalidConfig(format!("semitone shift {p} is not finite")));
    }
    let delta = p / 12.0 * LN_2;
    ContinuousLogF0::new(clf0.values.iter().map(|v| v + delta).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct F0Params {
    pub extractor: String,
    pub fmin: f64,
    pub fmax: f64,
    /// Frame hop in samples; frames are centred on `t * hop`.
    pub hop_length: usize,
    /// Voicing threshold, interpreted by each extractor on its own score.
    /// `None` selects the extractor's default.
    pub voicing_threshold: Option<f64>,
}

impl Default for F0Params {
    fn default() -> Self {
        Self {
            extractor: "autocorr".into(),
            fmin: 70.0,
            fmax: 500.0,
            hop_length: 120,
            voicing_threshold: None,
        }
    }
}

impl F0Params {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !(self.fmin > 0.0 && self.fmin < self.fmax && self.fmax <= sample_rate as f64 / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "F0 search range [{}, {}] invalid for sample rate {sample_rate}",
                self.fmin, self.fmax
            )));
        }
        if self.hop_length == 0 {
            return Err(Error::InvalidConfig("F0 hop must be positive".into()));
        }
        pitch_extractors().get(&self.extractor)?;
        Ok(())
    }

    fn lag_range(&self, sample_rate: u32) -> (usize, usize) {
        let sr = sample_rate as f64;
        let min = ((sr / self.fmax).floor() as usize).max(2);
        let max = (sr / self.fmin).ceil() as usize;
        (min, max)
    }

    fn n_frames(&self, len: usize) -> usize {
        len / self.hop_length + 1
    }
}

/// F0 estimation strategy.
pub trait PitchExtractor: Named + Send + Sync {
    fn extract(&self, wave: &Waveform, params: &F0Params) -> Result<F0Contour>;
}

static EXTRACTORS: LazyLock<Registry<dyn PitchExtractor>> = LazyLock::new(|| {
    Registry::<dyn PitchExtractor>::new("F0 extractor")
        .with(Arc::new(Autocorrelation))
        .with(Arc::new(Yin))
});

pub fn pitch_extractors() -> &'static Registry<dyn PitchExtractor> {
    &EXTRACTORS
}

/// Runs the extractor named in `params`.
pub fn extract_f0(wave: &Waveform, params: &F0Params) -> Result<F0Contour> {
    if wave.is_empty() {
        return Err(Error::EmptyWaveform);
    }
    params.validate(wave.sample_rate())?;
    pitch_extractors().get(&params.extractor)?.extract(wave, params)
}

/// Zero-padded view of `len` samples starting at `start` (may be negative).
fn segment(samples: &[f64], start: isize, len: usize) -> Vec<f64> {
    (0..len as isize)
        .map(|i| {
            let idx = start + i;
            if idx < 0 || idx as usize >= samples.len() {
                0.0
            } else {
                samples[idx as usize]
            }
        })
        .collect()
}

/// `len` samples centred on `centre`, moved inward at the signal edges so the
/// segment keeps full support; zero-padded only when the signal is shorter.
fn analysis_segment(samples: &[f64], centre: isize, len: usize) -> Vec<f64> {
    let mut start = centre - (len / 2) as isize;
    if samples.len() >= len {
        start = start.clamp(0, (samples.len() - len) as isize);
    }
    segment(samples, start, len)
}

/// Vertex offset of the parabola through three equally spaced points.
fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}

/// Median of each voiced frame with its two neighbours, applied only where
/// all three are voiced. Removes isolated octave jumps.
fn median3_voiced(values: &mut [f64]) {
    let src = values.to_vec();
    for t in 1..src.len().saturating_sub(1) {
        let mut w = [src[t - 1], src[t], src[t + 1]];
        if w.iter().all(|&v| v > 0.0) {
            w.sort_by(f64::total_cmp);
            values[t] = w[1];
        }
    }
}

/// Normalized cross-correlation pitch tracker.
///
/// For each frame the correlation between a one-period-long analysis segment
/// and its lagged copy is normalized by both energies. The shortest lag whose
/// local peak reaches 95% of the best peak wins, which favours the true
/// period over its multiples; the frame is voiced when that peak clears the
/// threshold (0.5 by default).
pub struct Autocorrelation;

impl Named for Autocorrelation {
    fn name(&self) -> &'static str {
        "autocorr"
    }
}

const SILENCE_ENERGY: f64 = 1e-10;

impl PitchExtractor for Autocorrelation {
    fn extract(&self, wave: &Waveform, params: &F0Params) -> Result<F0Contour> {
        let threshold = params.voicing_threshold.unwrap_or(0.5);
        let (min_lag, max_lag) = params.lag_range(wave.sample_rate());
        let width = max_lag;
        let sr = wave.sample_rate() as f64;
        let mut f0: Vec<f64> = (0..params.n_frames(wave.len()))
            .map(|t| {
                let centre = (t * params.hop_length) as isize;
                let seg = analysis_segment(wave.samples(), centre, width + max_lag + 2);
                let e0: f64 = seg[..width].iter().map(|v| v * v).sum();
                if e0 < SILENCE_ENERGY {
                    return 0.0;
                }
                let r: Vec<f64> = (0..=max_lag + 1)
                    .map(|lag| {
                        if lag < min_lag - 1 {
                            return 0.0;
                        }
                        let (mut cross, mut el) = (0.0, 0.0);
                        for n in 0..width {
                            cross += seg[n] * seg[n + lag];
                            el += seg[n + lag] * seg[n + lag];
                        }
                        if el < SILENCE_ENERGY {
                            0.0
                        } else {
                            cross / (e0 * el).sqrt()
                        }
                    })
                    .collect();
                let peaks: Vec<usize> = (min_lag..=max_lag)
                    .filter(|&l| r[l] > 0.0 && r[l] >= r[l - 1] && r[l] > r[l + 1])
                    .collect();
                let best = peaks.iter().map(|&l| r[l]).fold(0.0, f64::max);
                if best < threshold {
                    return 0.0;
                }
                let lag = *peaks.iter().find(|&&l| r[l] >= 0.95 * best).unwrap();
                let period = lag as f64 + parabolic_offset(r[lag - 1], r[lag], r[lag + 1]);
                sr / period
            })
            .collect();
        median3_voiced(&mut f0);
        F0Contour::from_hz(f0)
    }
}

/// YIN: cumulative-mean-normalized difference function with absolute
/// threshold (0.15 by default).
pub struct Yin;

impl Named for Yin {
    fn name(&self) -> &'static str {
        "yin"
    }
}

impl PitchExtractor for Yin {
    fn extract(&self, wave: &Waveform, params: &F0Params) -> Result<F0Contour> {
        let threshold = params.voicing_threshold.unwrap_or(0.15);
        let (min_lag, max_lag) = params.lag_range(wave.sample_rate());
        let width = max_lag;
        let sr = wave.sample_rate() as f64;
        let mut f0: Vec<f64> = (0..params.n_frames(wave.len()))
            .map(|t| {
                let centre = (t * params.hop_length) as isize;
                let seg = analysis_segment(wave.samples(), centre, width + max_lag + 2);
                if seg[..width].iter().map(|v| v * v).sum::<f64>() < SILENCE_ENERGY {
                    return 0.0;
                }
                let mut cmnd = vec![1.0; max_lag + 2];
                let mut running = 0.0;
                for lag in 1..=max_lag + 1 {
                    let d: f64 = (0..width).map(|n| (seg[n] - seg[n + lag]).powi(2)).sum();
                    running += d;
                    cmnd[lag] = if running > 0.0 { d * lag as f64 / running } else { 1.0 };
                }
                let Some(mut lag) = (min_lag..=max_lag).find(|&l| cmnd[l] < threshold) else {
                    return 0.0;
                };
                while lag < max_lag && cmnd[lag + 1] < cmnd[lag] {
                    lag += 1;
                }
                let period = lag as f64 + parabolic_offset(cmnd[lag - 1], cmnd[lag], cmnd[lag + 1]);
                sr / period
            })
            .collect();
        median3_voiced(&mut f0);
        F0Contour::from_hz(f0)
    }
}
