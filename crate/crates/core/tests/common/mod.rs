#![allow(dead_code)]

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use psforge_core::stft::Waveform;
use psforge_core::wav::write_wav;
use serde_json::json;
use sha2::{Digest, Sha256};

pub const SR: u32 = 24_000;

/// Harmonic signal whose instantaneous F0 at sample `n` is `f0(n)`, with
/// 1/k harmonic amplitudes up to 6 kHz.
pub fn harmonic(f0: impl Fn(usize) -> f64, n: usize, amp: f64) -> Vec<f64> {
    let mut phase = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = f0(i);
        let k_max = (6000.0 / f).floor().max(1.0) as usize;
        let norm: f64 = (1..=k_max).map(|k| 1.0 / k as f64).sum();
        let s: f64 = (1..=k_max).map(|k| (k as f64 * phase).sin() / k as f64).sum();
        out.push(amp * s / norm);
        phase += 2.0 * PI * f / SR as f64;
    }
    out
}

/// Linear F0 sweep from `f_start` to `f_end` over `n` samples.
pub fn sweep(f_start: f64, f_end: f64, n: usize) -> Vec<f64> {
    harmonic(|i| f_start + (f_end - f_start) * i as f64 / (n - 1) as f64, n, 0.6)
}

pub fn write_wave(path: &Path, samples: Vec<f64>) {
    write_wav(path, &Waveform::new(samples, SR).unwrap()).unwrap();
}

/// Writes `waves` as `u00.wav`, `u01.wav`, ... plus a manifest with every
/// entry in `split`. Returns the manifest path.
pub fn write_corpus(dir: &Path, waves: Vec<Vec<f64>>, split: &str) -> PathBuf {
    let mut entries = Vec::new();
    for (i, w) in waves.into_iter().enumerate() {
        let name = format!("u{i:02}");
        write_wave(&dir.join(format!("{name}.wav")), w);
        entries.push(json!({
            "utterance_id": name,
            "wav_path": format!("{name}.wav"),
            "speaker": "spk1",
            "style": if i % 2 == 0 { "neutral" } else { "happy" },
            "split": split,
        }));
    }
    let manifest = json!({
        "schema_version": 1,
        "styles": ["neutral", "happy"],
        "entries": entries,
    });
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_vec_pretty(&manifest).unwrap()).unwrap();
    path
}

/// Short voiced utterances at distinct pitches.
pub fn small_corpus(dir: &Path, n: usize, samples: usize) -> PathBuf {
    let waves = (0..n)
        .map(|i| sweep(120.0 + 10.0 * i as f64, 150.0 + 10.0 * i as f64, samples))
        .collect();
    write_corpus(dir, waves, "train")
}

/// SHA-256 over every file under `dir`, keyed by relative path, in sorted order.
pub fn tree_hash(dir: &Path) -> String {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(dir).unwrap().to_string_lossy().as_bytes());
        h.update([0]);
        h.update(fs::read(&f).unwrap());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn count_files(dir: &Path, ext: &str) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == ext))
        .count()
}
