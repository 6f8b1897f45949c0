use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use vocsid_core::corpus::{
    evaluate_command, generate_synthetic_corpus, identify_command, random_speaker_specs,
    render_records, render_summary, train_command, CorpusManifest, SynthOptions,
};
use vocsid_core::identification::ScoreStream;
use vocsid_core::{SpectralKind, SystemConfig, DEFAULT_CONFIG_TOML};

#[derive(Parser)]
#[command(
    name = "vocsid",
    version,
    about = "Closed-set speaker identification with spectral and LP-residual GMMs"
)]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// More logging; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus of all-pole speakers.
    Synth(SynthArgs),
    /// Train per-speaker models from a manifest's training split.
    Train(TrainArgs),
    /// Score a manifest's test split against a model store.
    Evaluate(EvaluateArgs),
    /// Identify the speaker of one audio file.
    Identify(IdentifyArgs),
    /// Print the default configuration.
    DefaultConfig,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    speakers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    train_utts: usize,
    #[arg(long, default_value_t = 4)]
    test_utts: usize,
    /// Utterance length in seconds.
    #[arg(long, default_value_t = 2.0)]
    seconds: f64,
    #[arg(long, default_value_t = 8000)]
    sample_rate: u32,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model store directory to create.
    #[arg(long)]
    out: PathBuf,
    /// Override the spectral feature kind (mfcc, lfcc, lpcc).
    #[arg(long, value_parser = parse_kind)]
    spectral_kind: Option<SpectralKind>,
    #[arg(long)]
    spectral_components: Option<usize>,
    #[arg(long)]
    residual_components: Option<usize>,
    /// Override the default fusion weight stored with the models.
    #[arg(long)]
    eta: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    store: PathBuf,
    /// Spectral weight; defaults to the store's configuration.
    #[arg(long)]
    eta: Option<f64>,
    /// Write the summary here and per-utterance records next to it as `.jsonl`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct IdentifyArgs {
    #[arg(long)]
    audio: PathBuf,
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    eta: Option<f64>,
}

fn parse_kind(s: &str) -> std::result::Result<SpectralKind, String> {
    match s {
        "mfcc" => Ok(SpectralKind::Mfcc),
        "lfcc" => Ok(SpectralKind::Lfcc),
        "lpcc" => Ok(SpectralKind::Lpcc),
        other => Err(format!("unknown spectral kind {other:?}")),
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let specs = random_speaker_specs(args.speakers, args.seed, args.sample_rate);
    let opts = SynthOptions {
        train_utts: args.train_utts,
        test_utts: args.test_utts,
        utt_seconds: args.seconds,
        sample_rate: args.sample_rate,
        seed: args.seed,
        ..Default::default()
    };
    let manifest = generate_synthetic_corpus(&specs, &opts, &args.out)?;
    println!(
        "wrote {} utterances for {} speakers to {}",
        manifest.entries.len(),
        specs.len(),
        args.out.join("manifest.tsv").display()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => SystemConfig::load(p)?,
        None => SystemConfig::default(),
    };
    if let Some(k) = args.spectral_kind {
        config.spectral.kind = k;
    }
    if let Some(m) = args.spectral_components {
        config.spectral.components = m;
    }
    if let Some(m) = args.residual_components {
        config.residual.components = m;
    }
    if let Some(eta) = args.eta {
        config.fusion.eta = eta;
    }
    config.validate()?;
    let manifest = CorpusManifest::load(&args.manifest)?;
    let summary = train_command(&manifest, &config, &args.out)?;
    for s in &summary.speakers {
        info!(
            "{}: spectral LL {:?}, residual LL {:?}",
            s.speaker, s.spectral_log_likelihoods, s.residual_log_likelihoods
        );
    }
    println!(
        "trained {} speakers ({} models) into {}",
        summary.speakers.len(),
        2 * summary.speakers.len(),
        args.out.display()
    );
    Ok(())
}

fn records_path(report: &Path) -> Result<PathBuf> {
    let records = report.with_extension("jsonl");
    if records == report {
        bail!("report path {} must not end in .jsonl", report.display());
    }
    Ok(records)
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let manifest = CorpusManifest::load(&args.manifest)?;
    let eval = evaluate_command(&manifest, &args.store, args.eta)?;
    let summary = render_summary(&eval);
    print!("{summary}");
    if let Some(report) = &args.report {
        let records = records_path(report)?;
        std::fs::write(report, &summary)
            .with_context(|| format!("writing {}", report.display()))?;
        std::fs::write(&records, render_records(&eval))
            .with_context(|| format!("writing {}", records.display()))?;
    }
    Ok(())
}

fn identify(args: IdentifyArgs) -> Result<()> {
    let scores = identify_command(&args.audio, &args.store, args.eta)?;
    let mut ranked: Vec<_> = scores.scores.iter().collect();
    ranked.sort_by(|a, b| {
        b.combined
            .total_cmp(&a.combined)
            .then_with(|| a.speaker.cmp(&b.speaker))
    });
    println!(
        "{:<16} {:>14} {:>14} {:>14}",
        "speaker", "spectral", "residual", "combined"
    );
    for s in &ranked {
        println!(
            "{:<16} {:>14.3} {:>14.3} {:>14.3}",
            s.speaker, s.spectral, s.residual, s.combined
        );
    }
    let best = scores
        .best(ScoreStream::Combined)
        .context("no speakers scored")?;
    println!("identified: {}", best.speaker);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Identify(a) => identify(a),
        Command::DefaultConfig => {
            print!("{DEFAULT_CONFIG_TOML}");
            Ok(())
        }
    }
}
