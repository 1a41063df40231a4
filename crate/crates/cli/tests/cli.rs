use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn psforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psforge"))
        .args(args)
        .env("PSFORGE_WORKERS", "2")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_tone(path: &Path, f0: f64, n: usize) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 24_000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for i in 0..n {
        let t = i as f64 / 24_000.0;
        let s: f64 = (1..=10).map(|k| (2.0 * PI * f0 * k as f64 * t).sin() / k as f64).sum();
        w.write_sample((s * 6000.0) as i16).unwrap();
    }
    w.finalize().unwrap();
}

fn corpus(dir: &Path, n: usize) -> PathBuf {
    let entries: Vec<_> = (0..n)
        .map(|i| {
            let id = format!("utt{i}");
            write_tone(&dir.join(format!("{id}.wav")), 130.0 + 20.0 * i as f64, 4800);
            json!({"utterance_id": id, "wav_path": format!("{id}.wav"), "speaker": "a", "style": "neutral", "split": "train"})
        })
        .collect();
    let path = dir.join("manifest.json");
    let manifest = json!({"schema_version": 1, "styles": ["neutral"], "entries": entries});
    fs::write(&path, manifest.to_string()).unwrap();
    path
}

fn plan(dir: &Path, semitones: &[i32]) -> PathBuf {
    let path = dir.join("plan.json");
    fs::write(&path, json!({"schema_version": 1, "semitones": semitones}).to_string()).unwrap();
    path
}

fn count(dir: &Path, ext: &str) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == ext))
        .count()
}

#[test]
fn augment_stats_analyze_round() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 3);
    let plan = plan(dir.path(), &[-3, 12]);
    let out = dir.path().join("feats");
    let r = psforge(&["augment", "--manifest", p(&manifest), "--plan", p(&plan), "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let summary = stdout_json(&r);
    assert_eq!(summary["feature_files"], 9);
    assert_eq!(count(&out, "f32"), 9);
    assert!(out.join("augment_summary.json").is_file());

    let stats = dir.path().join("stats.json");
    let r = psforge(&["stats", "--manifest", p(&manifest), "--features", p(&out), "--out", p(&stats)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let s: Value = serde_json::from_slice(&fs::read(&stats).unwrap()).unwrap();
    assert_eq!(s["provenance"]["files"], 9);
    assert_eq!(s["mean"].as_array().unwrap().len(), 82);

    let r = psforge(&["stats", "--manifest", p(&manifest), "--features", p(&out), "--out", p(&stats), "--originals-only"]);
    assert_eq!(code(&r), 0);
    let s: Value = serde_json::from_slice(&fs::read(&stats).unwrap()).unwrap();
    assert_eq!(s["provenance"]["files"], 3);

    let report = dir.path().join("report");
    let r = psforge(&["analyze", "--dataset", &format!("ps={}", p(&out)), "--out", p(&report)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(report.join("report.json").is_file());
    assert!(report.join("ps_f0.svg").is_file());
    assert!(String::from_utf8_lossy(&r.stdout).contains("ps:"));
}

#[test]
fn features_emits_originals_only() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let out = dir.path().join("feats");
    let r = psforge(&["features", "--manifest", p(&manifest), "--out", p(&out), "--workers", "1"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(count(&out, "f32"), 2);
    assert!(out.join("utt0_p+00.f32").is_file());
}

#[test]
fn unreadable_wav_is_a_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 3);
    fs::write(dir.path().join("utt1.wav"), b"not audio").unwrap();
    let out = dir.path().join("feats");
    let r = psforge(&["features", "--manifest", p(&manifest), "--out", p(&out)]);
    assert_eq!(code(&r), 1);
    let summary = stdout_json(&r);
    assert_eq!(summary["failures"].as_array().unwrap().len(), 1);
    assert_eq!(summary["failures"][0]["utterance_id"], "utt1");
    assert!(out.join("utt1.partial").is_file());
}

#[test]
fn invalid_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let out = dir.path().join("feats");

    let with_zero = plan(dir.path(), &[0, 3]);
    let r = psforge(&["augment", "--manifest", p(&manifest), "--plan", p(&with_zero), "--out", p(&out)]);
    assert_eq!(code(&r), 2);

    let dup = dir.path().join("dup.json");
    let mut m: Value = serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
    m["entries"][1]["utterance_id"] = "utt0".into();
    fs::write(&dup, m.to_string()).unwrap();
    let r = psforge(&["augment", "--manifest", p(&dup), "--out", p(&out)]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("utt0"));

    let r = psforge(&["augment", "--manifest", p(&dir.path().join("absent.json")), "--out", p(&out)]);
    assert_eq!(code(&r), 2);

    let r = psforge(&["stats", "--manifest", p(&manifest), "--features", p(&out), "--out", p(&dir.path().join("s.json"))]);
    assert_eq!(code(&r), 2);

    let r = psforge(&["analyze", "--dataset", "x", "--out", p(&out)]);
    assert_eq!(code(&r), 2);
    let r = psforge(&["analyze", "--dataset", &format!("x={}", p(&dir.path().join("nope"))), "--out", p(&out)]);
    assert_eq!(code(&r), 2);
}

fn write_text(path: &Path, values: &[f64]) {
    let text: String = values.iter().map(|v| format!("{v}\n")).collect();
    fs::write(path, text).unwrap();
}

#[test]
fn loss_reads_text_and_binary_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let a: Vec<f64> = (0..200).map(|t| 5.3 + 0.1 * (t as f64 / 9.0).sin()).collect();
    let b: Vec<f64> = a.iter().enumerate().map(|(t, v)| v + 0.05 * (t as f64 * 1.7).cos()).collect();
    let (pa, pb) = (dir.path().join("a.txt"), dir.path().join("b.f0"));
    write_text(&pa, &a);
    let bytes: Vec<u8> = b.iter().flat_map(|v| (*v as f32).to_le_bytes()).collect();
    fs::write(&pb, bytes).unwrap();

    let r = psforge(&["loss", p(&pa), p(&pa)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(stdout_json(&r)["loss"], 0.0);

    let r = psforge(&["loss", p(&pa), p(&pb), "--breakdown"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let v = stdout_json(&r);
    let per = v["per_resolution"].as_array().unwrap();
    assert_eq!(per.len(), 3);
    let total = v["total"].as_f64().unwrap();
    assert!(total > 0.0);
    let mean: f64 = per.iter().map(|r| r["loss"].as_f64().unwrap()).sum::<f64>() / 3.0;
    assert!((total - 0.1 * mean).abs() < 1e-12);

    let cfg = dir.path().join("c.json");
    fs::write(&cfg, json!({"weight": 1.0, "resolutions": [{"fft_size": 32, "window_size": 32, "hop_size": 8}]}).to_string())
        .unwrap();
    let r = psforge(&["loss", p(&pa), p(&pb), "--config", p(&cfg), "--breakdown"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(stdout_json(&r)["per_resolution"].as_array().unwrap().len(), 1);
}

#[test]
fn loss_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let (short, long) = (dir.path().join("s.txt"), dir.path().join("l.txt"));
    write_text(&short, &[5.0; 40]);
    write_text(&long, &[5.0; 200]);
    // different lengths
    assert_eq!(code(&psforge(&["loss", p(&short), p(&long)])), 2);
    // shorter than the largest window
    assert_eq!(code(&psforge(&["loss", p(&short), p(&short)])), 2);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"beta": 0}"#).unwrap();
    assert_eq!(code(&psforge(&["loss", p(&long), p(&long), "--config", p(&bad)])), 2);
    assert_eq!(code(&psforge(&["loss", p(&long), p(&dir.path().join("missing"))])), 2);
    assert_eq!(code(&psforge(&["loss", p(&long), p(&long), "--format", "nope"])), 2);
}
