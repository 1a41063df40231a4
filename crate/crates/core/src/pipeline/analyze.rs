//! F0 distribution analysis over directories of feature files.
//!
//! Voiced frames only: F0 is `exp` of the continuous log F0 column wherever
//! the V/UV column is 1. Histograms use fixed 5 Hz bins over 50–1000 Hz so
//! reports from different runs line up.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{read_features, sidecar_path, write_atomic, FeatureMatrix, FEATURE_EXT};

pub const HIST_LO_HZ: f64 = 50.0;
pub const HIST_HI_HZ: f64 = 1000.0;
pub const HIST_BIN_HZ: f64 = 5.0;
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub bin_hz: f64,
    pub counts: Vec<u64>,
    /// Frames below `lo_hz`.
    pub underflow: u64,
    /// Frames at or above `hi_hz`.
    pub overflow: u64,
}

impl Default for Histogram {
    fn default() -> Self {
        let n = ((HIST_HI_HZ - HIST_LO_HZ) / HIST_BIN_HZ).round() as usize;
        Self {
            lo_hz: HIST_LO_HZ,
            hi_hz: HIST_HI_HZ,
            bin_hz: HIST_BIN_HZ,
            counts: vec![0; n],
            underflow: 0,
            overflow: 0,
        }
    }
}

impl Histogram {
    pub fn bin_index(&self, hz: f64) -> Option<usize> {
        if hz < self.lo_hz || hz >= self.hi_hz {
            return None;
        }
        Some((((hz - self.lo_hz) / self.bin_hz).floor() as usize).min(self.counts.len() - 1))
    }

    pub fn add(&mut self, hz: f64) {
        match self.bin_index(hz) {
            Some(i) => self.counts[i] += 1,
            None if hz < self.lo_hz => self.underflow += 1,
            None => self.overflow += 1,
        }
    }

    pub fn bin_centre(&self, i: usize) -> f64 {
        self.lo_hz + (i as f64 + 0.5) * self.bin_hz
    }

    /// All frames, including those outside the binned range.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// Mean over binned frames, placing each at its bin centre.
    pub fn mean_from_bins(&self) -> Option<f64> {
        let n: u64 = self.counts.iter().sum();
        if n == 0 {
            return None;
        }
        let s: f64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 * self.bin_centre(i))
            .sum();
        Some(s / n as f64)
    }

    /// Lowest and highest occupied bin indices.
    pub fn support(&self) -> Option<(usize, usize)> {
        let first = self.counts.iter().position(|&c| c > 0)?;
        let last = self.counts.iter().rposition(|&c| c > 0)?;
        Some((first, last))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Summary {
    pub voiced_frames: u64,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub files: usize,
    pub summary: F0Summary,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, Default)]
struct GroupAccumulator {
    files: usize,
    count: u64,
    sum: f64,
    sum_sq: f64,
    min: f64,
    max: f64,
    histogram: Histogram,
}

impl GroupAccumulator {
    fn add_file(&mut self, fm: &FeatureMatrix) {
        self.files += 1;
        for (lf0, voiced) in fm.log_f0().into_iter().zip(fm.vuv()) {
            if !voiced {
                continue;
            }
            let hz = lf0.exp();
            if self.count == 0 {
                self.min = hz;
                self.max = hz;
            }
            self.count += 1;
            self.sum += hz;
            self.sum_sq += hz * hz;
            self.min = self.min.min(hz);
            self.max = self.max.max(hz);
            self.histogram.add(hz);
        }
    }

    fn finish(self) -> Option<GroupReport> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0);
        Some(GroupReport {
            files: self.files,
            summary: F0Summary {
                voiced_frames: self.count,
                mean,
                std: var.sqrt(),
                min: self.min,
                max: self.max,
            },
            histogram: self.histogram,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub label: String,
    pub source: String,
    pub overall: GroupReport,
    pub styles: BTreeMap<String, GroupReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub datasets: Vec<DatasetReport>,
}

impl AnalysisReport {
    pub fn dataset(&self, label: &str) -> Option<&DatasetReport> {
        self.datasets.iter().find(|d| d.label == label)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalysisOptions {
    /// Skip unshifted (`semitone_p == 0`) files, leaving only augmented copies.
    pub exclude_originals: bool,
}

/// Feature files (with sidecars) under `dir`, recursively, in sorted order.
pub fn feature_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for item in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = item.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == FEATURE_EXT) && sidecar_path(&path).is_file() {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn analyze_f0_distribution(
    datasets: &[(String, PathBuf)],
    opts: &AnalysisOptions,
) -> Result<AnalysisReport> {
    if datasets.is_empty() {
        return Err(Error::Analysis("at least one dataset is required".into()));
    }
    let mut reports = Vec::with_capacity(datasets.len());
    for (label, dir) in datasets {
        let mut overall = GroupAccumulator::default();
        let mut styles: BTreeMap<String, GroupAccumulator> = BTreeMap::new();
        for path in feature_files(dir)? {
            let fm = read_features(&path)?;
            if opts.exclude_originals && fm.meta.semitone_p == 0 {
                continue;
            }
            let style = fm.meta.style.clone().unwrap_or_else(|| "unknown".into());
            overall.add_file(&fm);
            styles.entry(style).or_default().add_file(&fm);
        }
        let overall = overall
            .finish()
            .ok_or_else(|| Error::Analysis(format!("dataset `{label}` has no voiced frames")))?;
        let styles = styles
            .into_iter()
            .filter_map(|(s, acc)| acc.finish().map(|r| (s, r)))
            .collect();
        reports.push(DatasetReport {
            label: label.clone(),
            source: dir.display().to_string(),
            overall,
            styles,
        });
    }
    Ok(AnalysisReport { datasets: reports })
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Writes `report.json`, one histogram plot per dataset and an overlay of all
/// datasets (`comparison.svg`). Returns the written paths.
pub fn write_report(report: &AnalysisReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let json_path = out_dir.join(REPORT_FILE);
    let mut json = serde_json::to_vec_pretty(report).map_err(|e| Error::json(&json_path, e))?;
    json.push(b'\n');
    write_atomic(&json_path, &json)?;
    written.push(json_path);
    for (i, d) in report.datasets.iter().enumerate() {
        let path = out_dir.join(format!("{}_f0.svg", file_label(&d.label)));
        let svg = render_svg(&format!("F0 distribution: {}", d.label), &[(d, COLOURS[i % COLOURS.len()])], true);
        write_atomic(&path, svg.as_bytes())?;
        written.push(path);
    }
    let series: Vec<_> = report
        .datasets
        .iter()
        .enumerate()
        .map(|(i, d)| (d, COLOURS[i % COLOURS.len()]))
        .collect();
    let path = out_dir.join("comparison.svg");
    write_atomic(&path, render_svg("F0 distributions", &series, false).as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Density plot of voiced F0; bars for a single dataset, step lines otherwise.
fn render_svg(title: &str, series: &[(&DatasetReport, &str)], bars: bool) -> String {
    let (w, h) = (720.0, 400.0);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let density = |hist: &Histogram| -> Vec<f64> {
        let n = hist.total().max(1) as f64;
        hist.counts.iter().map(|&c| c as f64 / n / hist.bin_hz).collect()
    };
    let ymax = series
        .iter()
        .flat_map(|(d, _)| density(&d.overall.histogram))
        .fold(0.0, f64::max)
        .max(1e-12);
    let x_of = |hz: f64| left + (hz - HIST_LO_HZ) / (HIST_HI_HZ - HIST_LO_HZ) * pw;
    let y_of = |v: f64| top + ph - v / ymax * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(s, r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, top + ph, left + pw, top + ph);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, top + ph);
    let mut tick = 100.0;
    while tick <= HIST_HI_HZ {
        let x = x_of(tick);
        let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="black"/>"#, top + ph, top + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{tick}</text>"#, top + ph + 18.0);
        tick += 100.0;
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">F0 [Hz]</text>"#, left + pw / 2.0, h - 8.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">density</text>"#, top + ph / 2.0, top + ph / 2.0);

    for (idx, (d, colour)) in series.iter().enumerate() {
        let hist = &d.overall.histogram;
        let dens = density(hist);
        if bars {
            for (i, &v) in dens.iter().enumerate().filter(|(_, v)| **v > 0.0) {
                let x0 = x_of(hist.lo_hz + i as f64 * hist.bin_hz);
                let x1 = x_of(hist.lo_hz + (i + 1) as f64 * hist.bin_hz);
                let y = y_of(v);
                let _ = writeln!(s, r#"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{colour}" fill-opacity="0.7"/>"#, x1 - x0, top + ph - y);
            }
        } else {
            let mut points = String::new();
            for (i, &v) in dens.iter().enumerate() {
                let x0 = x_of(hist.lo_hz + i as f64 * hist.bin_hz);
                let x1 = x_of(hist.lo_hz + (i + 1) as f64 * hist.bin_hz);
                let y = y_of(v);
                let _ = write!(points, "{x0:.2},{y:.2} {x1:.2},{y:.2} ");
            }
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, points.trim_end());
        }
        let ly = top + 16.0 * (idx as f64 + 1.0);
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="12" height="4" fill="{colour}"/>"#, left + pw - 170.0, ly - 6.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}">{} (mean {:.1} Hz)</text>"#,
            left + pw - 152.0,
            escape(&d.label),
            d.overall.summary.mean
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{write_features, FeatureMeta, Matrix, FEATURE_DIMS, LF0_COL, VUV_COL};

    fn write_contour(dir: &Path, id: &str, p: i32, hz: &[f64], voiced: &[bool]) {
        let mut data = vec![0.0; hz.len() * FEATURE_DIMS];
        for (t, (&f, &v)) in hz.iter().zip(voiced).enumerate() {
            data[t * FEATURE_DIMS + LF0_COL] = f.ln();
            data[t * FEATURE_DIMS + VUV_COL] = if v { 1.0 } else { 0.0 };
        }
        let meta = FeatureMeta {
            utterance_id: id.into(),
            semitone_p: p,
            style: Some("neutral".into()),
            ..Default::default()
        };
        let fm = FeatureMatrix::new(Matrix::new(data, hz.len(), FEATURE_DIMS).unwrap(), meta).unwrap();
        write_features(&dir.join(format!("{id}_p{p:+03}.f32")), &fm).unwrap();
    }

    #[test]
    fn constant_220_lands_in_one_bin() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..3 {
            write_contour(dir.path(), &format!("u{i}"), 0, &[220.0; 40], &[true; 40]);
        }
        let r = analyze_f0_distribution(&[("c".into(), dir.path().to_path_buf())], &AnalysisOptions::default()).unwrap();
        let h = &r.datasets[0].overall.histogram;
        let bin = h.bin_index(220.0).unwrap();
        assert_eq!(h.counts[bin], 120);
        assert_eq!(h.total(), 120);
        assert_eq!(h.support(), Some((bin, bin)));
        // feature files store log F0 as f32
        let stored = (220f64.ln() as f32 as f64).exp();
        assert!((r.datasets[0].overall.summary.mean - stored).abs() < 1e-9);
        assert_eq!(r.datasets[0].styles["neutral"].files, 3);
    }

    #[test]
    fn unvoiced_frames_are_ignored_and_counts_balance() {
        let dir = tempfile::tempdir().unwrap();
        let hz = [40.0, 120.0, 130.0, 2000.0, 150.0];
        let voiced = [true, true, false, true, true];
        write_contour(dir.path(), "u", 0, &hz, &voiced);
        let r = analyze_f0_distribution(&[("d".into(), dir.path().to_path_buf())], &AnalysisOptions::default()).unwrap();
        let o = &r.datasets[0].overall;
        assert_eq!(o.summary.voiced_frames, 4);
        assert_eq!(o.histogram.total(), 4);
        assert_eq!(o.histogram.underflow, 1);
        assert_eq!(o.histogram.overflow, 1);
        assert_eq!(o.summary.min, (40f64.ln() as f32 as f64).exp());
    }

    #[test]
    fn mean_difference_survives_binning() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let base: Vec<f64> = (0..200).map(|t| 180.0 + 0.5 * t as f64).collect();
        let up: Vec<f64> = base.iter().map(|f| f + 4.0).collect();
        write_contour(a.path(), "x", 0, &base, &[true; 200]);
        write_contour(b.path(), "x", 0, &up, &[true; 200]);
        let r = analyze_f0_distribution(
            &[("a".into(), a.path().to_path_buf()), ("b".into(), b.path().to_path_buf())],
            &AnalysisOptions::default(),
        )
        .unwrap();
        let (ma, mb) = (r.datasets[0].overall.summary.mean, r.datasets[1].overall.summary.mean);
        assert!((mb - ma - 4.0).abs() < 1e-6);
        let (ha, hb) = (
            r.datasets[0].overall.histogram.mean_from_bins().unwrap(),
            r.datasets[1].overall.histogram.mean_from_bins().unwrap(),
        );
        assert!((hb - ha - 4.0).abs() <= HIST_BIN_HZ);
        assert!((ha - ma).abs() <= HIST_BIN_HZ / 2.0);
    }

    #[test]
    fn no_voiced_frames_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write_contour(dir.path(), "u", 0, &[100.0; 5], &[false; 5]);
        let err = analyze_f0_distribution(&[("silent".into(), dir.path().to_path_buf())], &AnalysisOptions::default());
        assert!(matches!(err, Err(Error::Analysis(_))));
        assert!(analyze_f0_distribution(&[], &AnalysisOptions::default()).is_err());
    }

    #[test]
    fn exclude_originals_filters_unshifted_files() {
        let dir = tempfile::tempdir().unwrap();
        write_contour(dir.path(), "u", 0, &[100.0; 5], &[true; 5]);
        write_contour(dir.path(), "u", 12, &[200.0; 5], &[true; 5]);
        let opts = AnalysisOptions { exclude_originals: true };
        let r = analyze_f0_distribution(&[("d".into(), dir.path().to_path_buf())], &opts).unwrap();
        assert_eq!(r.datasets[0].overall.summary.voiced_frames, 5);
        assert!((r.datasets[0].overall.summary.mean - 200.0).abs() < 1e-3);
    }

    #[test]
    fn report_files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        write_contour(dir.path(), "u", 0, &[300.0; 5], &[true; 5]);
        let r = analyze_f0_distribution(&[("VC aug".into(), dir.path().to_path_buf())], &AnalysisOptions::default()).unwrap();
        let out = tempfile::tempdir().unwrap();
        let files = write_report(&r, out.path()).unwrap();
        assert!(out.path().join("report.json").is_file());
        assert!(out.path().join("VC_aug_f0.svg").is_file());
        assert!(out.path().join("comparison.svg").is_file());
        assert_eq!(files.len(), 3);
        let back: AnalysisReport = serde_json::from_slice(&fs::read(out.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
