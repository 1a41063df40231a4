//! 16-bit PCM mono WAV ingestion.

use std::path::Path;

use crate::error::{Error, Result};
use crate::stft::Waveform;

/// Reads a 16-bit mono WAV. A sample rate other than `expected_rate` is an
/// error unless `resample` is set, in which case the signal is linearly
/// resampled.
pub fn read_wav(path: &Path, expected_rate: u32, resample: bool) -> Result<Waveform> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let unsupported = |reason: String| Error::UnsupportedAudio {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(unsupported(format!(
            "{:?} {}-bit samples (need 16-bit PCM)",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.channels != 1 {
        return Err(unsupported(format!("{} channels (need mono)", spec.channels)));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(wav_err)?;
    let samples = if spec.sample_rate == expected_rate {
        samples
    } else if resample {
        resample_linear(&samples, spec.sample_rate, expected_rate)
    } else {
        return Err(unsupported(format!(
            "sample rate {} Hz (expected {expected_rate} Hz; pass --resample to convert)",
            spec.sample_rate
        )));
    };
    Waveform::new(samples, expected_rate)
}

/// Writes a waveform as 16-bit PCM mono, clipping to the representable range.
pub fn write_wav(path: &Path, wave: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in wave.samples() {
        let v = (s * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        writer.write_sample(v).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

pub fn resample_linear(samples: &[f64], from: u32, to: u32) -> Vec<f64> {
    if samples.is_empty() || from == to {
        return samples.to_vec();
    }
    let out_len = ((samples.len() as u64 * to as u64) as f64 / from as f64).round() as usize;
    let step = from as f64 / to as f64;
    (0..out_len.max(1))
        .map(|i| {
            let pos = i as f64 * step;
            let lo = (pos.floor() as usize).min(samples.len() - 1);
            let hi = (lo + 1).min(samples.len() - 1);
            let frac = pos - lo as f64;
            samples[lo] + frac * (samples[hi] - samples[lo])
        })
        .collect()
}
