//! End-to-end training, evaluation and single-utterance identification.

use std::path::Path;

use log::{debug, info};
use rayon::prelude::*;
use serde::Serialize;

use super::audio::load_audio;
use super::manifest::{CorpusManifest, ManifestEntry, Split};
use super::store::{load_store, save_store};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::frontend::{preprocess, AudioSignal};
use crate::gmm::{train_gmm, FeatureKind};
use crate::hosmr::extract_hosmr;
use crate::identification::{
    evaluate, identify_on, score_utterance_with, Decision, EvaluationReport, ScoreStream,
    SpeakerModelSet, SpeakerModels, UtteranceScores,
};
use crate::spectral::SpectralExtractor;

/// Both feature streams of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceFeatures {
    pub frames: usize,
    pub spectral: Vec<Vec<f64>>,
    pub residual: Vec<Vec<f64>>,
    pub spectral_skipped: usize,
    pub residual_skipped: usize,
}

/// Front end plus both extractors for one configuration.
#[derive(Debug, Clone)]
pub struct FeaturePipeline {
    config: SystemConfig,
    spectral: SpectralExtractor,
}

impl FeaturePipeline {
    pub fn new(config: SystemConfig) -> Result<Self> {
        config.validate()?;
        let spectral = SpectralExtractor::new(
            config.spectral.features(),
            config.frontend.frame_len,
            config.sample_rate,
        )?;
        Ok(Self { config, spectral })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn extract(&self, signal: &AudioSignal, source: &str) -> Result<UtteranceFeatures> {
        if signal.sample_rate() != self.config.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: self.config.sample_rate,
                found: signal.sample_rate(),
            });
        }
        let frames = preprocess(signal, &self.config.frontend, source)?;
        let spectral = self.spectral.extract(&frames)?;
        let residual = extract_hosmr(&frames, &self.config.residual.features())?;
        if spectral.skipped + residual.skipped > 0 {
            debug!(
                "{source}: skipped {} spectral and {} residual frames of {}",
                spectral.skipped,
                residual.skipped,
                frames.len()
            );
        }
        Ok(UtteranceFeatures {
            frames: frames.len(),
            spectral: spectral.vectors,
            residual: residual.vectors.into_iter().map(|v| v.into_vec()).collect(),
            spectral_skipped: spectral.skipped,
            residual_skipped: residual.skipped,
        })
    }

    pub fn extract_file(&self, path: &Path, source: &str) -> Result<UtteranceFeatures> {
        let signal = load_audio(path, self.config.sample_rate)?;
        self.extract(&signal, source)
    }

    fn extract_entry(
        &self,
        manifest: &CorpusManifest,
        entry: &ManifestEntry,
    ) -> Result<UtteranceFeatures> {
        self.extract_file(&manifest.resolve(entry), &entry.utterance)
            .map_err(|e| e.in_utterance(&entry.speaker, &entry.utterance))
    }
}

fn check_rates(manifest: &CorpusManifest, config: &SystemConfig) -> Result<()> {
    if manifest.sample_rate != config.sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: config.sample_rate,
            found: manifest.sample_rate,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeakerTrainingSummary {
    pub speaker: String,
    pub utterances: usize,
    pub spectral_vectors: usize,
    pub residual_vectors: usize,
    /// Total training log-likelihood after each EM iteration.
    pub spectral_log_likelihoods: Vec<f64>,
    pub residual_log_likelihoods: Vec<f64>,
    pub reinitialized: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub speakers: Vec<SpeakerTrainingSummary>,
}

/// Trains both stream models for every speaker with training utterances.
pub fn train_models(
    manifest: &CorpusManifest,
    config: &SystemConfig,
) -> Result<(SpeakerModelSet, TrainSummary)> {
    check_rates(manifest, config)?;
    let pipeline = FeaturePipeline::new(*config)?;
    let speakers: Vec<&str> = manifest.speakers(Split::Train).into_iter().collect();
    if speakers.is_empty() {
        return Err(Error::Manifest {
            line: 0,
            message: "no training utterances".into(),
        });
    }
    let spectral_kind = FeatureKind::from(config.spectral.kind);

    let trained = speakers
        .par_iter()
        .map(|&speaker| {
            let entries: Vec<&ManifestEntry> = manifest
                .split(Split::Train)
                .filter(|e| e.speaker == speaker)
                .collect();
            let feats = entries
                .par_iter()
                .map(|e| pipeline.extract_entry(manifest, e))
                .collect::<Result<Vec<_>>>()?;
            let mut spectral = Vec::new();
            let mut residual = Vec::new();
            for f in feats {
                spectral.extend(f.spectral);
                residual.extend(f.residual);
            }
            let tag = |e: Error| Error::Utterance {
                speaker: speaker.to_owned(),
                utterance: "<training set>".into(),
                source: Box::new(e),
            };
            let s =
                train_gmm(&spectral, spectral_kind, &config.spectral_training()).map_err(tag)?;
            let r = train_gmm(&residual, FeatureKind::Hosmr, &config.residual_training())
                .map_err(tag)?;
            info!(
                "trained {speaker}: {} spectral / {} residual vectors, final LL {:.3} / {:.3}",
                spectral.len(),
                residual.len(),
                s.log_likelihoods
                    .last()
                    .copied()
                    .unwrap_or(s.initial_log_likelihood),
                r.log_likelihoods
                    .last()
                    .copied()
                    .unwrap_or(r.initial_log_likelihood),
            );
            let summary = SpeakerTrainingSummary {
                speaker: speaker.to_owned(),
                utterances: entries.len(),
                spectral_vectors: spectral.len(),
                residual_vectors: residual.len(),
                spectral_log_likelihoods: s.log_likelihoods,
                residual_log_likelihoods: r.log_likelihoods,
                reinitialized: s.reinitialized + r.reinitialized,
            };
            Ok((
                speaker,
                SpeakerModels {
                    spectral: s.model,
                    residual: r.model,
                },
                summary,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut models = SpeakerModelSet::new();
    let mut summaries = Vec::with_capacity(trained.len());
    for (speaker, m, summary) in trained {
        models.insert(speaker, m)?;
        summaries.push(summary);
    }
    Ok((
        models,
        TrainSummary {
            speakers: summaries,
        },
    ))
}

/// Trains on the manifest's training split and writes a model store.
pub fn train_command(
    manifest: &CorpusManifest,
    config: &SystemConfig,
    store_dir: &Path,
) -> Result<TrainSummary> {
    let (models, summary) = train_models(manifest, config)?;
    save_store(store_dir, config, &models)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredUtterance {
    pub speaker: String,
    pub utterance: String,
    pub scores: UtteranceScores,
}

/// Accuracy of the two single streams and of the fused score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub eta: f64,
    pub utterances: Vec<ScoredUtterance>,
    pub spectral: EvaluationReport,
    pub residual: EvaluationReport,
    pub combined: EvaluationReport,
}

fn report_on(utterances: &[ScoredUtterance], stream: ScoreStream) -> Result<EvaluationReport> {
    let decisions = utterances
        .iter()
        .map(|u| {
            Ok(Decision {
                utterance: u.utterance.clone(),
                truth: u.speaker.clone(),
                decided: identify_on(&u.scores, stream)?.to_owned(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate(decisions)
}

impl Evaluation {
    pub fn from_scores(eta: f64, utterances: Vec<ScoredUtterance>) -> Result<Self> {
        Ok(Self {
            eta,
            spectral: report_on(&utterances, ScoreStream::Spectral)?,
            residual: report_on(&utterances, ScoreStream::Residual)?,
            combined: report_on(&utterances, ScoreStream::Combined)?,
            utterances,
        })
    }

    /// Same stream scores re-fused with another weight.
    pub fn at_eta(&self, eta: f64) -> Result<Self> {
        let utterances = self
            .utterances
            .iter()
            .map(|u| {
                Ok(ScoredUtterance {
                    scores: u.scores.with_eta(eta)?,
                    ..u.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_scores(eta, utterances)
    }
}

/// Scores every test utterance against `models`; results are in manifest order.
pub fn evaluate_models(
    manifest: &CorpusManifest,
    config: &SystemConfig,
    models: &SpeakerModelSet,
    eta: f64,
) -> Result<Evaluation> {
    check_rates(manifest, config)?;
    for speaker in manifest.speakers(Split::Test) {
        if models.get(speaker).is_none() {
            return Err(Error::MissingModel(speaker.to_owned()));
        }
    }
    let pipeline = FeaturePipeline::new(*config)?;
    let tests: Vec<&ManifestEntry> = manifest.split(Split::Test).collect();
    if tests.is_empty() {
        return Err(Error::Manifest {
            line: 0,
            message: "no test utterances".into(),
        });
    }
    let utterances = tests
        .par_iter()
        .map(|e| {
            let f = pipeline.extract_entry(manifest, e)?;
            let scores = score_utterance_with(
                &f.spectral,
                &f.residual,
                models,
                eta,
                config.fusion.normalization,
            )
            .map_err(|err| err.in_utterance(&e.speaker, &e.utterance))?;
            Ok(ScoredUtterance {
                speaker: e.speaker.clone(),
                utterance: e.utterance.clone(),
                scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Evaluation::from_scores(eta, utterances)
}

/// Loads a store and evaluates the manifest's test split. `eta` defaults to
/// the stored configuration's weight.
pub fn evaluate_command(
    manifest: &CorpusManifest,
    store_dir: &Path,
    eta: Option<f64>,
) -> Result<Evaluation> {
    let (config, models) = load_store(store_dir)?;
    evaluate_models(manifest, &config, &models, eta.unwrap_or(config.fusion.eta))
}

/// Scores a single audio file against a store.
pub fn identify_command(
    audio: &Path,
    store_dir: &Path,
    eta: Option<f64>,
) -> Result<UtteranceScores> {
    let (config, models) = load_store(store_dir)?;
    let pipeline = FeaturePipeline::new(config)?;
    let source = audio
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("utterance");
    let f = pipeline.extract_file(audio, source)?;
    score_utterance_with(
        &f.spectral,
        &f.residual,
        &models,
        eta.unwrap_or(config.fusion.eta),
        config.fusion.normalization,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::{generate_synthetic_corpus, random_speaker_specs, SynthOptions};

    #[test]
    fn small_corpus_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let specs = random_speaker_specs(3, 7, 8000);
        let opts = SynthOptions {
            train_utts: 3,
            test_utts: 2,
            utt_seconds: 1.0,
            ..Default::default()
        };
        let manifest =
            generate_synthetic_corpus(&specs, &opts, &dir.path().join("corpus")).unwrap();
        let mut cfg = SystemConfig::default();
        cfg.spectral.components = 4;
        cfg.residual.components = 4;
        let store = dir.path().join("store");
        let summary = train_command(&manifest, &cfg, &store).unwrap();
        assert_eq!(summary.speakers.len(), 3);
        for s in &summary.speakers {
            assert_eq!(s.spectral_log_likelihoods.len(), 10);
            assert_eq!(s.residual_log_likelihoods.len(), 10);
            for ll in [&s.spectral_log_likelihoods, &s.residual_log_likelihoods] {
                assert!(ll.windows(2).all(|w| w[1] >= w[0] - 1e-8), "{ll:?}");
            }
            assert_eq!(s.utterances, 3);
        }

        let eval = evaluate_command(&manifest, &store, None).unwrap();
        assert_eq!(eval.combined.total(), 6);
        assert_eq!(eval.eta, 0.5);
        assert!(eval.spectral.pia >= 50.0, "{}", eval.spectral.pia);

        let spectral_only = eval.at_eta(1.0).unwrap();
        assert_eq!(spectral_only.combined.decisions, eval.spectral.decisions);
        let residual_only = eval.at_eta(0.0).unwrap();
        assert_eq!(residual_only.combined.decisions, eval.residual.decisions);

        let e = manifest.split(Split::Test).next().unwrap();
        let scores = identify_command(&manifest.resolve(e), &store, Some(0.5)).unwrap();
        assert_eq!(&scores, &eval.utterances[0].scores);
    }

    #[test]
    fn missing_model_and_rate_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let specs = random_speaker_specs(2, 1, 8000);
        let opts = SynthOptions {
            train_utts: 2,
            test_utts: 1,
            utt_seconds: 0.5,
            ..Default::default()
        };
        let manifest = generate_synthetic_corpus(&specs, &opts, dir.path()).unwrap();
        let mut cfg = SystemConfig::default();
        cfg.spectral.components = 2;
        cfg.residual.components = 2;
        let (models, _) = train_models(&manifest, &cfg).unwrap();

        let mut only_first = SpeakerModelSet::new();
        let (id, m) = models.iter().next().unwrap();
        only_first.insert(id, m.clone()).unwrap();
        assert!(matches!(
            evaluate_models(&manifest, &cfg, &only_first, 0.5),
            Err(Error::MissingModel(s)) if s == "spk01"
        ));

        let mut fast = cfg;
        fast.sample_rate = 16000;
        assert!(matches!(
            evaluate_models(&manifest, &fast, &models, 0.5),
            Err(Error::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn bad_audio_is_tagged_with_utterance() {
        let dir = tempfile::tempdir().unwrap();
        let specs = random_speaker_specs(1, 1, 8000);
        let opts = SynthOptions {
            train_utts: 2,
            test_utts: 0,
            utt_seconds: 0.5,
            ..Default::default()
        };
        let manifest = generate_synthetic_corpus(&specs, &opts, dir.path()).unwrap();
        std::fs::write(manifest.resolve(&manifest.entries[1]), b"garbage").unwrap();
        match train_models(&manifest, &SystemConfig::default()) {
            Err(Error::Utterance { utterance, .. }) => assert_eq!(utterance, "spk00-train-01"),
            other => panic!("{other:?}"),
        }
    }
}
