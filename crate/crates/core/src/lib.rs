//! Spectrogram-domain pitch-shift augmentation for speech features.
//!
//! The pieces, bottom-up:
//!
//! - [`stft`]: centred, reflect-padded magnitude STFT.
//! - [`separation`]: cepstral lag-window split into envelope and fine structure.
//! - [`pitchshift`]: stretch the fine structure by `2^(p/12)` and recombine.
//! - [`features`]: 82-dim features (80 log-Mel, continuous log F0, V/UV),
//!   F0 extraction, normalization and feature files.
//! - [`f0loss`]: multi-resolution STFT loss on F0 contours, with gradient.
//! - [`pipeline`]: manifest-driven corpus augmentation, statistics and F0
//!   distribution analysis.
//!
//! Interchangeable algorithms are registered by name in per-family
//! [`registry::Registry`] instances and chosen through configuration.

pub mod error;
pub mod f0loss;
pub mod features;
pub mod pipeline;
pub mod pitchshift;
pub mod registry;
pub mod separation;
pub mod stft;
pub mod wav;

pub use error::{Error, Result};
