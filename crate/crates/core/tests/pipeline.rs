mod common;

use std::fs;

use common::*;
use psforge_core::features::{compute_norm_stats, normalize, read_features, write_features, FEATURE_DIMS, VUV_COL};
use psforge_core::pipeline::{
    augment_corpus, feature_path, partial_marker, run_stats, validate_manifest, AugmentationPlan,
};
use psforge_core::Error;

#[test]
fn single_shift_plan_emits_originals_and_one_copy() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = validate_manifest(&small_corpus(dir.path(), 10, 4800)).unwrap();
    let plan = AugmentationPlan {
        semitones: vec![12],
        ..Default::default()
    };
    let out = dir.path().join("feats");
    let summary = augment_corpus(&manifest, &plan, &out, 2).unwrap();
    assert!(summary.is_success());
    assert_eq!((summary.originals, summary.augmented), (10, 10));
    assert_eq!(count_files(&out, "f32"), 20);
}

#[test]
fn unreadable_wav_is_reported_and_others_complete() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = small_corpus(dir.path(), 4, 4800);
    fs::write(dir.path().join("u02.wav"), b"RIFF garbage").unwrap();
    let manifest = validate_manifest(&manifest_path).unwrap();
    let plan = AugmentationPlan {
        semitones: vec![-3, 5],
        ..Default::default()
    };
    let out = dir.path().join("feats");
    let summary = augment_corpus(&manifest, &plan, &out, 3).unwrap();
    assert_eq!(summary.failures.len(), 1);
    assert_eq!(summary.failures[0].utterance_id, "u02");
    assert!(!summary.is_success());
    assert_eq!(summary.feature_files, 9);
    assert!(partial_marker(&out, "u02").is_file());
    assert!(!partial_marker(&out, "u01").exists());

    // repairing the input and re-running completes only the missing work
    write_wave(&dir.path().join("u02.wav"), sweep(140.0, 170.0, 4800));
    let before = fs::metadata(feature_path(&out, "u00", 5)).unwrap().modified().unwrap();
    let summary = augment_corpus(&manifest, &plan, &out, 3).unwrap();
    assert!(summary.is_success());
    assert_eq!(summary.resumed, 9);
    assert_eq!(summary.feature_files, 12);
    assert!(!partial_marker(&out, "u02").exists());
    let after = fs::metadata(feature_path(&out, "u00", 5)).unwrap().modified().unwrap();
    assert_eq!(before, after);
}

#[test]
fn interrupted_output_is_redone() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = validate_manifest(&small_corpus(dir.path(), 2, 4800)).unwrap();
    let plan = AugmentationPlan {
        semitones: vec![7],
        ..Default::default()
    };
    let out = dir.path().join("feats");
    augment_corpus(&manifest, &plan, &out, 1).unwrap();
    let reference = fs::read(feature_path(&out, "u01", 7)).unwrap();

    // simulate a crash between the data file and its sidecar
    let victim = feature_path(&out, "u01", 7);
    fs::remove_file(victim.with_extension("json")).unwrap();
    fs::write(&victim, b"half").unwrap();
    let summary = augment_corpus(&manifest, &plan, &out, 1).unwrap();
    assert_eq!(summary.resumed, 3);
    assert_eq!(fs::read(&victim).unwrap(), reference);
    assert!(fs::read_dir(&out)
        .unwrap()
        .all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".f32.partial")));
}

#[test]
fn dev_split_gets_originals_only_and_is_excluded_from_stats() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = small_corpus(dir.path(), 4, 4800);
    let text = fs::read_to_string(&manifest_path).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["entries"][3]["split"] = "dev".into();
    fs::write(&manifest_path, value.to_string()).unwrap();
    let manifest = validate_manifest(&manifest_path).unwrap();
    let plan = AugmentationPlan {
        semitones: vec![2, 4],
        ..Default::default()
    };
    let out = dir.path().join("feats");
    let summary = augment_corpus(&manifest, &plan, &out, 2).unwrap();
    assert_eq!((summary.originals, summary.augmented), (4, 6));
    assert!(!feature_path(&out, "u03", 2).exists());

    let with_dev = run_stats(&manifest, &manifest_path, &out, true).unwrap();
    fs::remove_file(feature_path(&out, "u03", 0)).unwrap();
    let without_dev = run_stats(&manifest, &manifest_path, &out, true).unwrap();
    assert_eq!(with_dev.stats, without_dev.stats);
    assert_eq!(with_dev.provenance.files, 9);

    let originals = run_stats(&manifest, &manifest_path, &out, false).unwrap();
    assert_eq!(originals.provenance.files, 3);
    assert_ne!(originals.stats, with_dev.stats);
}

#[test]
fn stats_lists_missing_train_features() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = small_corpus(dir.path(), 3, 4800);
    let manifest = validate_manifest(&manifest_path).unwrap();
    let plan = AugmentationPlan {
        semitones: vec![],
        ..Default::default()
    };
    let out = dir.path().join("feats");
    augment_corpus(&manifest, &plan, &out, 1).unwrap();
    fs::remove_file(feature_path(&out, "u01", 0)).unwrap();
    fs::remove_file(feature_path(&out, "u02", 0)).unwrap();
    match run_stats(&manifest, &manifest_path, &out, true) {
        Err(Error::MissingFeatures(paths)) => assert_eq!(paths.len(), 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn train_split_must_not_be_empty() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = write_corpus(dir.path(), vec![sweep(150.0, 160.0, 4800)], "eval");
    let manifest = validate_manifest(&manifest_path).unwrap();
    assert!(run_stats(&manifest, &manifest_path, dir.path(), true).is_err());
}

#[test]
fn features_normalize_with_corpus_stats() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = validate_manifest(&small_corpus(dir.path(), 3, 7200)).unwrap();
    let plan = AugmentationPlan {
        semitones: vec![-2, 3],
        ..Default::default()
    };
    let out = dir.path().join("feats");
    augment_corpus(&manifest, &plan, &out, 2).unwrap();
    let mats: Vec<_> = manifest
        .entries
        .iter()
        .flat_map(|e| [0, -2, 3].map(|p| read_features(&feature_path(&out, &e.utterance_id, p)).unwrap()))
        .collect();
    let stats = compute_norm_stats(&mats).unwrap();
    let normed: Vec<_> = mats.iter().map(|m| normalize(m, &stats).unwrap()).collect();
    let again = compute_norm_stats(&normed).unwrap();
    for d in (0..FEATURE_DIMS).filter(|&d| d != VUV_COL) {
        assert!(again.mean[d].abs() < 1e-6, "dim {d}");
        assert!((again.std[d] - 1.0).abs() < 1e-6, "dim {d}");
    }
    // normalized matrices still round-trip through the file format
    let path = dir.path().join("n.f32");
    write_features(&path, &normed[0]).unwrap();
    assert_eq!(read_features(&path).unwrap().n_frames(), normed[0].n_frames());
}
