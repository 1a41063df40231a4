//! Manifest-driven corpus tooling: augmentation, statistics and analysis.

mod analyze;
mod augment;
mod manifest;
mod plan;
mod stats;

pub use analyze::{
    analyze_f0_distribution, feature_files, write_report, AnalysisOptions, AnalysisReport, DatasetReport,
    F0Summary, GroupReport, Histogram, HIST_BIN_HZ, HIST_HI_HZ, HIST_LO_HZ, REPORT_FILE,
};
pub use augment::{augment_corpus, default_workers, partial_marker, write_summary, AugmentSummary, Failure, SUMMARY_FILE};
pub use manifest::{validate_manifest, AudioConfig, CorpusManifest, ManifestEntry, Split, SCHEMA_VERSION};
pub use plan::{default_semitones, feature_path, parse_feature_name, AugmentationPlan};
pub use stats::{run_stats, StatsFile, StatsProvenance};
