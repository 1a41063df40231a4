use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Matrix, FEATURE_DIMS, VUV_COL};
use crate::error::{Error, Result};

/// Per-dimension mean and population standard deviation.
///
/// The V/UV dimension is recorded but never normalized, so it is the one
/// dimension allowed to have zero variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub frame_count: u64,
}

/// Running (count, mean, M2) per dimension. Partial accumulators merge with
/// Chan's parallel update; merging in a fixed order is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAccumulator {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Default for NormAccumulator {
    fn default() -> Self {
        Self {
            count: 0,
            mean: vec![0.0; FEATURE_DIMS],
            m2: vec![0.0; FEATURE_DIMS],
        }
    }
}

impl NormAccumulator {
    /// Accumulator over the frames of one matrix (two-pass within the matrix).
    pub fn from_matrix(fm: &FeatureMatrix) -> Self {
        let n = fm.n_frames();
        if n == 0 {
            return Self::default();
        }
        let mut mean = vec![0.0; FEATURE_DIMS];
        for row in fm.values().iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut m2 = vec![0.0; FEATURE_DIMS];
        for row in fm.values().iter_rows() {
            for ((acc, v), m) in m2.iter_mut().zip(row).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        Self {
            count: n as u64,
            mean,
            m2,
        }
    }

    pub fn merge(&mut self, other: &NormAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for d in 0..FEATURE_DIMS {
            let delta = other.mean[d] - self.mean[d];
            self.mean[d] += delta * nb / n;
            self.m2[d] += other.m2[d] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(&self) -> Result<NormStats> {
        if self.count < 2 {
            return Err(Error::InvalidConfig(format!(
                "normalization statistics need at least 2 frames, got {}",
                self.count
            )));
        }
        let std: Vec<f64> = self
            .m2
            .iter()
            .map(|m2| (m2 / self.count as f64).sqrt())
            .collect();
        if let Some(dim) = (0..FEATURE_DIMS).find(|&d| d != VUV_COL && !(std[d] > 0.0)) {
            return Err(Error::ZeroVariance { dim });
        }
        Ok(NormStats {
            mean: self.mean.clone(),
            std,
            frame_count: self.count,
        })
    }
}

pub fn compute_norm_stats<'a>(features: impl IntoIterator<Item = &'a FeatureMatrix>) -> Result<NormStats> {
    let mut acc = NormAccumulator::default();
    for fm in features {
        acc.merge(&NormAccumulator::from_matrix(fm));
    }
    acc.finish()
}

fn check_stats(stats: &NormStats) -> Result<()> {
    if stats.mean.len() != FEATURE_DIMS || stats.std.len() != FEATURE_DIMS {
        return Err(Error::LengthMismatch {
            left: FEATURE_DIMS,
            right: stats.mean.len().min(stats.std.len()),
        });
    }
    Ok(())
}

fn map_values(fm: &FeatureMatrix, f: impl Fn(usize, f64) -> f64) -> Result<FeatureMatrix> {
    let mut out = Vec::with_capacity(fm.values().as_slice().len());
    for row in fm.values().iter_rows() {
        out.extend(row.iter().enumerate().map(|(d, &v)| if d == VUV_COL { v } else { f(d, v) }));
    }
    FeatureMatrix::new(Matrix::new(out, fm.n_frames(), FEATURE_DIMS)?, fm.meta.clone())
}

/// `(x - mean) / std` per dimension; V/UV passes through.
pub fn normalize(fm: &FeatureMatrix, stats: &NormStats) -> Result<FeatureMatrix> {
    check_stats(stats)?;
    map_values(fm, |d, v| (v - stats.mean[d]) / stats.std[d])
}

pub fn denormalize(fm: &FeatureMatrix, stats: &NormStats) -> Result<FeatureMatrix> {
    check_stats(stats)?;
    map_values(fm, |d, v| v * stats.std[d] + stats.mean[d])
}
