use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use psforge_core::f0loss::{multires_f0_loss_breakdown, LossConfig};
use psforge_core::pipeline::{
    analyze_f0_distribution, augment_corpus, default_workers, run_stats, validate_manifest, write_report,
    write_summary, AnalysisOptions, AugmentSummary, AugmentationPlan, CorpusManifest,
};

#[derive(Parser)]
#[command(name = "psforge", version, about = "Pitch-shift data augmentation for speech features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract features for every entry and its pitch-shifted copies.
    Augment(AugmentArgs),
    /// Extract features for the originals only.
    Features(FeaturesArgs),
    /// Compute normalization statistics over the train split.
    Stats(StatsArgs),
    /// Compare voiced F0 distributions of feature directories.
    Analyze(AnalyzeArgs),
    /// Multi-resolution STFT loss between two F0 sequences.
    Loss(LossArgs),
}

#[derive(Args)]
struct Corpus {
    #[arg(long)]
    manifest: PathBuf,
    /// Plan file; defaults apply when omitted.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads [default: PSFORGE_WORKERS or the number of cores]
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct AugmentArgs {
    #[command(flatten)]
    corpus: Corpus,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    corpus: Corpus,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding the feature files.
    #[arg(long)]
    features: PathBuf,
    /// Output statistics file.
    #[arg(long)]
    out: PathBuf,
    /// Ignore pitch-shifted copies.
    #[arg(long)]
    originals_only: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// `label=DIR`, repeatable.
    #[arg(long = "dataset", value_parser = parse_dataset, required = true)]
    datasets: Vec<(String, PathBuf)>,
    #[arg(long)]
    out: PathBuf,
    /// Only count pitch-shifted files.
    #[arg(long)]
    exclude_originals: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeqFormat {
    /// Text when every line parses as a number, otherwise little-endian f32.
    Auto,
    Text,
    F32,
}

#[derive(Args)]
struct LossArgs {
    reference: PathBuf,
    estimate: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    format: SeqFormat,
    /// Include per-resolution terms in the output.
    #[arg(long)]
    breakdown: bool,
}

/// Failure classes mapped to exit codes.
enum Failure {
    /// Partial or processing failure.
    Run(anyhow::Error),
    /// Unusable input: arguments, manifests, plans, configs.
    Input(anyhow::Error),
}

impl From<psforge_core::Error> for Failure {
    fn from(e: psforge_core::Error) -> Self {
        if e.is_invalid_input() {
            Failure::Input(e.into())
        } else {
            Failure::Run(e.into())
        }
    }
}

fn input<T>(r: anyhow::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::Input)
}

fn parse_dataset(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((label, dir)) if !label.is_empty() && !dir.is_empty() => Ok((label.to_string(), PathBuf::from(dir))),
        _ => Err(format!("expected label=DIR, got `{s}`")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Augment(a) => corpus_run(&a.corpus, false),
        Command::Features(a) => corpus_run(&a.corpus, true),
        Command::Stats(a) => stats(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Loss(a) => loss(&a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Any failure here means the inputs themselves are unusable.
fn load_corpus(args: &Corpus) -> Result<(CorpusManifest, AugmentationPlan), Failure> {
    let load = || -> psforge_core::Result<_> {
        let manifest = validate_manifest(&args.manifest)?;
        let plan = match &args.plan {
            Some(p) => AugmentationPlan::load(p)?,
            None => AugmentationPlan::default(),
        };
        plan.validate(manifest.audio.sample_rate)?;
        Ok((manifest, plan))
    };
    load().map_err(|e| Failure::Input(e.into()))
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.into()))?;
    println!("{text}");
    Ok(())
}

fn corpus_run(args: &Corpus, originals_only: bool) -> Result<ExitCode, Failure> {
    let (manifest, mut plan) = load_corpus(args)?;
    if originals_only {
        plan.semitones.clear();
    }
    let workers = match args.workers {
        Some(0) => return input(Err(anyhow!("--workers must be positive"))),
        Some(n) => n,
        None => default_workers(),
    };
    log::info!("{} entries, {} workers", manifest.entries.len(), workers);
    let summary: AugmentSummary = augment_corpus(&manifest, &plan, &args.out, workers)?;
    write_summary(&args.out, &summary)?;
    print_json(&summary)?;
    if summary.is_success() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "{} of {} utterances failed; see {}",
            summary.failures.len(),
            summary.utterances,
            args.out.join(psforge_core::pipeline::SUMMARY_FILE).display()
        );
        Ok(ExitCode::from(1))
    }
}

fn stats(args: &StatsArgs) -> Result<ExitCode, Failure> {
    let manifest = validate_manifest(&args.manifest).map_err(|e| Failure::Input(e.into()))?;
    if !args.features.is_dir() {
        return input(Err(anyhow!("{} is not a directory", args.features.display())));
    }
    let stats = run_stats(&manifest, &args.manifest, &args.features, !args.originals_only)?;
    stats.save(&args.out)?;
    println!(
        "wrote {} ({} files, {} frames)",
        args.out.display(),
        stats.provenance.files,
        stats.stats.frame_count
    );
    Ok(ExitCode::SUCCESS)
}

fn analyze(args: &AnalyzeArgs) -> Result<ExitCode, Failure> {
    for (label, dir) in &args.datasets {
        if !dir.is_dir() {
            return input(Err(anyhow!("dataset `{label}`: {} is not a directory", dir.display())));
        }
    }
    let opts = AnalysisOptions {
        exclude_originals: args.exclude_originals,
    };
    let report = analyze_f0_distribution(&args.datasets, &opts).map_err(|e| Failure::Input(e.into()))?;
    write_report(&report, &args.out)?;
    for d in &report.datasets {
        let s = &d.overall.summary;
        println!(
            "{}: {} voiced frames, mean {:.2} Hz, std {:.2}, range [{:.1}, {:.1}]",
            d.label, s.voiced_frames, s.mean, s.std, s.min, s.max
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn read_sequence(path: &Path, format: SeqFormat) -> anyhow::Result<Vec<f64>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let as_text = || -> Option<Vec<f64>> {
        let text = std::str::from_utf8(&bytes).ok()?;
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| l.parse::<f64>().ok())
            .collect()
    };
    let as_f32 = || -> anyhow::Result<Vec<f64>> {
        if bytes.len() % 4 != 0 {
            bail!("{}: {} bytes is not a whole number of f32 values", path.display(), bytes.len());
        }
        Ok(bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect())
    };
    let seq = match format {
        SeqFormat::Text => as_text().ok_or_else(|| anyhow!("{}: not one number per line", path.display()))?,
        SeqFormat::F32 => as_f32()?,
        SeqFormat::Auto => match as_text() {
            Some(v) => v,
            None => as_f32()?,
        },
    };
    if seq.is_empty() {
        bail!("{}: empty sequence", path.display());
    }
    Ok(seq)
}

fn loss(args: &LossArgs) -> Result<ExitCode, Failure> {
    let cfg = match &args.config {
        Some(p) => {
            let text = fs::read(p).with_context(|| format!("reading {}", p.display()));
            let text = input(text)?;
            input(serde_json::from_slice::<LossConfig>(&text).with_context(|| format!("parsing {}", p.display())))?
        }
        None => LossConfig::default(),
    };
    let a = input(read_sequence(&args.reference, args.format))?;
    let b = input(read_sequence(&args.estimate, args.format))?;
    let breakdown = multires_f0_loss_breakdown(&a, &b, &cfg).map_err(|e| Failure::Input(e.into()))?;
    if args.breakdown {
        print_json(&breakdown)?;
    } else {
        print_json(&serde_json::json!({ "loss": breakdown.total }))?;
    }
    Ok(ExitCode::SUCCESS)
}
