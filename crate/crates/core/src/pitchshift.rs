//! Pitch shifting in the spectrogram domain.
//!
//! Only the fine structure moves: output bin `j` reads the source fine
//! structure at fractional position `j / alpha`, interpolating linearly between
//! log magnitudes. The envelope is reused unchanged, so formants stay put.

use std::sync::{Arc, LazyLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{Named, Registry};
use crate::separation::{lag_window_separate_with, lag_windows, recombine, FineStructure, SpectralEnvelope};
use crate::stft::Spectrogram;

/// Frequency ratio for a shift of `p` semitones, `2^(p/12)`.
pub fn semitone_to_ratio(p: f64) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::InvalidConfig(format!("semitone shift {p} is not finite")));
    }
    Ok((p / 12.0).exp2())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftSpec {
    semitones: f64,
    ratio: f64,
}

impl ShiftSpec {
    pub fn new(semitones: f64) -> Result<Self> {
        Ok(Self {
            semitones,
            ratio: semitone_to_ratio(semitones)?,
        })
    }

    pub fn semitones(&self) -> f64 {
        self.semitones
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }
}

/// Resolves source positions that fall past the last bin (only possible when
/// stretching by `alpha < 1`).
pub trait BoundaryPolicy: Named + Send + Sync {
    /// Log-magnitude for a source position `pos > last`, given the frame's
    /// log-magnitudes (`last = log_frame.len() - 1`).
    fn beyond(&self, log_frame: &[f64], pos: f64) -> f64;
}

/// Hold the highest source bin.
pub struct Clamp;
/// Reflect the position back about the Nyquist bin.
pub struct Mirror;
/// Flat fine structure (log 0, i.e. unit gain).
pub struct Unity;

impl Named for Clamp {
    fn name(&self) -> &'static str {
        "clamp"
    }
}

impl BoundaryPolicy for Clamp {
    fn beyond(&self, log_frame: &[f64], _pos: f64) -> f64 {
        log_frame[log_frame.len() - 1]
    }
}

impl Named for Mirror {
    fn name(&self) -> &'static str {
        "mirror"
    }
}

impl BoundaryPolicy for Mirror {
    fn beyond(&self, log_frame: &[f64], pos: f64) -> f64 {
        let last = (log_frame.len() - 1) as f64;
        if last == 0.0 {
            return log_frame[0];
        }
        let period = 2.0 * last;
        let mut p = pos.rem_euclid(period);
        if p > last {
            p = period - p;
        }
        lerp_at(log_frame, p)
    }
}

impl Named for Unity {
    fn name(&self) -> &'static str {
        "unity"
    }
}

impl BoundaryPolicy for Unity {
    fn beyond(&self, _log_frame: &[f64], _pos: f64) -> f64 {
        0.0
    }
}

static BOUNDARIES: LazyLock<Registry<dyn BoundaryPolicy>> = LazyLock::new(|| {
    Registry::<dyn BoundaryPolicy>::new("boundary policy")
        .with(Arc::new(Clamp))
        .with(Arc::new(Mirror))
        .with(Arc::new(Unity))
});

pub fn boundary_policies() -> &'static Registry<dyn BoundaryPolicy> {
    &BOUNDARIES
}

/// Linear interpolation at `pos`, which must lie in `[0, len-1]`.
fn lerp_at(values: &[f64], pos: f64) -> f64 {
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(values.len() - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 {
        values[lo]
    } else {
        values[lo] + frac * (values[hi] - values[lo])
    }
}

/// Options for [`pitch_shift_spectrogram_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftOptions {
    pub lifter_cutoff_ms: f64,
    pub lag_window: String,
    pub boundary: String,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        Self {
            lifter_cutoff_ms: crate::separation::DEFAULT_LIFTER_CUTOFF_MS,
            lag_window: "rectangular".into(),
            boundary: "clamp".into(),
        }
    }
}

impl ShiftOptions {
    pub fn validate(&self) -> Result<()> {
        lag_windows().get(&self.lag_window)?;
        boundary_policies().get(&self.boundary)?;
        Ok(())
    }
}

pub fn stretch_fine_structure(fine: &FineStructure, alpha: f64) -> Result<FineStructure> {
    stretch_fine_structure_with(fine, alpha, &Clamp)
}

pub fn stretch_fine_structure_with(
    fine: &FineStructure,
    alpha: f64,
    boundary: &dyn BoundaryPolicy,
) -> Result<FineStructure> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("stretch ratio {alpha} must be positive")));
    }
    let spec = &fine.values;
    if alpha == 1.0 {
        return Ok(fine.clone());
    }
    let last = (spec.n_bins() - 1) as f64;
    let mut out = Vec::with_capacity(spec.as_slice().len());
    let mut log_frame = vec![0.0; spec.n_bins()];
    for frame in spec.frames() {
        for (l, v) in log_frame.iter_mut().zip(frame) {
            *l = v.ln();
        }
        out.extend((0..spec.n_bins()).map(|j| {
            let pos = j as f64 / alpha;
            let log = if pos > last {
                boundary.beyond(&log_frame, pos)
            } else {
                lerp_at(&log_frame, pos)
            };
            log.exp()
        }));
    }
    Ok(FineStructure {
        values: Spectrogram::from_frames(out, spec.n_frames(), spec.config.clone(), spec.sample_rate)?,
    })
}

/// The two factors whose product is the shifted spectrogram.
#[derive(Debug, Clone)]
pub struct ShiftedParts {
    pub envelope: SpectralEnvelope,
    pub fine: FineStructure,
}

pub fn pitch_shift_parts(spec: &Spectrogram, p: f64, opts: &ShiftOptions) -> Result<ShiftedParts> {
    let shift = ShiftSpec::new(p)?;
    let lag = lag_windows().get(&opts.lag_window)?;
    let boundary = boundary_policies().get(&opts.boundary)?;
    let (envelope, fine) = lag_window_separate_with(spec, opts.lifter_cutoff_ms, lag.as_ref())?;
    let fine = stretch_fine_structure_with(&fine, shift.ratio(), boundary.as_ref())?;
    Ok(ShiftedParts { envelope, fine })
}

pub fn pitch_shift_spectrogram(spec: &Spectrogram, p: f64, lifter_cutoff_ms: f64) -> Result<Spectrogram> {
    let opts = ShiftOptions {
        lifter_cutoff_ms,
        ..ShiftOptions::default()
    };
    pitch_shift_spectrogram_with(spec, p, &opts)
}

pub fn pitch_shift_spectrogram_with(spec: &Spectrogram, p: f64, opts: &ShiftOptions) -> Result<Spectrogram> {
    let parts = pitch_shift_parts(spec, p, opts)?;
    recombine(&parts.envelope, &parts.fine)
}
