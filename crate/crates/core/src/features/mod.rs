//! 82-dimensional acoustic features: 80 log-Mel channels, continuous log F0
//! and a voiced/unvoiced flag per 5 ms frame.

mod f0;
mod io;
mod mel;
mod norm;

pub use f0::{
    continuize_log_f0, extract_f0, pitch_extractors, shift_continuous_log_f0, Autocorrelation,
    ContinuousLogF0, F0Contour, F0Params, PitchExtractor, Yin,
};
pub use io::{read_features, sidecar_path, write_atomic, write_features, ColumnLayout, FeatureSidecar, FEATURE_EXT};
pub use mel::{log_mel, mel_filterbank, mel_normalizations, hz_to_mel, mel_to_hz, MelConfig, MelFilterbank, MelNormalization};
pub use norm::{compute_norm_stats, denormalize, normalize, NormAccumulator, NormStats};

use crate::error::{Error, Result};

pub const N_MELS: usize = 80;
pub const LF0_COL: usize = 80;
pub const VUV_COL: usize = 81;
pub const FEATURE_DIMS: usize = 82;
/// Floor applied to Mel energies before the log.
pub const MEL_FLOOR: f64 = 1e-10;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: (rows, cols),
                actual: (data.len() / cols.max(1), cols),
            });
        }
        Ok(Self { data, rows, cols })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.iter_rows().map(move |r| r[c])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Descriptive metadata carried with every feature matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMeta {
    pub utterance_id: String,
    pub sample_rate: u32,
    pub hop_ms: f64,
    /// Semitone shift applied; 0 for originals.
    pub semitone_p: i32,
    pub source_file: String,
    pub speaker: Option<String>,
    pub style: Option<String>,
}

/// `N × 82` features: `[0, 80)` log-Mel, `80` continuous log F0, `81` V/UV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Matrix,
    pub meta: FeatureMeta,
}

impl FeatureMatrix {
    pub fn new(values: Matrix, meta: FeatureMeta) -> Result<Self> {
        if values.cols() != FEATURE_DIMS {
            return Err(Error::ShapeMismatch {
                expected: (values.rows(), FEATURE_DIMS),
                actual: (values.rows(), values.cols()),
            });
        }
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        if values.column(VUV_COL).any(|v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidConfig("V/UV column must be 0 or 1".into()));
        }
        Ok(Self { values, meta })
    }

    pub fn n_frames(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn log_f0(&self) -> Vec<f64> {
        self.values.column(LF0_COL).collect()
    }

    pub fn vuv(&self) -> Vec<bool> {
        self.values.column(VUV_COL).map(|v| v == 1.0).collect()
    }
}

/// Concatenates log-Mel, continuous log F0 and V/UV into a feature matrix.
///
/// Inputs whose frame counts differ by at most two frames are trimmed to the
/// shortest; larger mismatches are an error.
pub fn assemble_features(
    mel: &Matrix,
    clf0: &ContinuousLogF0,
    vuv: &[bool],
    meta: FeatureMeta,
) -> Result<FeatureMatrix> {
    if mel.cols() != N_MELS {
        return Err(Error::ShapeMismatch {
            expected: (mel.rows(), N_MELS),
            actual: (mel.rows(), mel.cols()),
        });
    }
    let lens = [mel.rows(), clf0.len(), vuv.len()];
    let n = *lens.iter().min().unwrap();
    let longest = *lens.iter().max().unwrap();
    if longest - n > 2 {
        return Err(Error::LengthMismatch {
            left: n,
            right: longest,
        });
    }
    if longest != n {
        log::warn!(
            "{}: trimming frame counts {:?} to {n}",
            meta.utterance_id,
            lens
        );
    }
    let mut data = Vec::with_capacity(n * FEATURE_DIMS);
    for (t, (&lf0, &voiced)) in clf0.values().iter().zip(vuv).take(n).enumerate() {
        data.extend_from_slice(mel.row(t));
        data.push(lf0);
        data.push(if voiced { 1.0 } else { 0.0 });
    }
    FeatureMatrix::new(Matrix::new(data, n, FEATURE_DIMS)?, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clf0(n: usize) -> ContinuousLogF0 {
        ContinuousLogF0::new(vec![5.0; n]).unwrap()
    }

    #[test]
    fn assembles_82_columns() {
        let mel = Matrix::zeros(10, N_MELS);
        let fm = assemble_features(&mel, &clf0(10), &[true; 10], FeatureMeta::default()).unwrap();
        assert_eq!(fm.n_frames(), 10);
        assert_eq!(fm.values().cols(), 82);
        assert!(fm.log_f0().iter().all(|&v| v == 5.0));
        assert!(fm.vuv().iter().all(|&v| v));
    }

    #[test]
    fn large_mismatch_is_an_error() {
        let mel = Matrix::zeros(10, N_MELS);
        assert!(matches!(
            assemble_features(&mel, &clf0(13), &[true; 13], FeatureMeta::default()),
            Err(Error::LengthMismatch { left: 10, right: 13 })
        ));
    }

    #[test]
    fn small_mismatch_is_trimmed() {
        let mel = Matrix::zeros(10, N_MELS);
        let fm = assemble_features(&mel, &clf0(11), &[false; 11], FeatureMeta::default()).unwrap();
        assert_eq!(fm.n_frames(), 10);
    }

    #[test]
    fn rejects_non_binary_vuv() {
        let mut m = Matrix::zeros(2, FEATURE_DIMS);
        m.row_mut(0)[VUV_COL] = 0.5;
        assert!(FeatureMatrix::new(m, FeatureMeta::default()).is_err());
    }
}
