//! Closed-set identification: per-speaker stream scores, linear score fusion,
//! argmax decision and identification accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{FeatureKind, GmmModel};

/// Both stream models of one enrolled speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerModels {
    pub spectral: GmmModel,
    pub residual: GmmModel,
}

/// Enrolled speakers keyed by id; iteration is in sorted id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpeakerModelSet {
    speakers: BTreeMap<String, SpeakerModels>,
}

impl SpeakerModelSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a speaker. Every speaker must share the same spectral feature
    /// kind and dimension, and residual models must be HOSMR models.
    pub fn insert(&mut self, speaker: impl Into<String>, models: SpeakerModels) -> Result<()> {
        let speaker = speaker.into();
        if models.residual.kind() != FeatureKind::Hosmr {
            return Err(Error::InvalidConfig(format!(
                "residual model of {speaker} is {}, expected hosmr",
                models.residual.kind()
            )));
        }
        if models.spectral.kind() == FeatureKind::Hosmr {
            return Err(Error::InvalidConfig(format!(
                "spectral model of {speaker} is a hosmr model"
            )));
        }
        if let Some(first) = self.speakers.values().next() {
            let consistent = first.spectral.kind() == models.spectral.kind()
                && first.spectral.dim() == models.spectral.dim()
                && first.residual.dim() == models.residual.dim();
            if !consistent {
                return Err(Error::InvalidConfig(format!(
                    "models of {speaker} do not match the enrolled feature streams"
                )));
            }
        }
        self.speakers.insert(speaker, models);
        Ok(())
    }

    pub fn get(&self, speaker: &str) -> Option<&SpeakerModels> {
        self.speakers.get(speaker)
    }

    pub fn len(&self) -> usize {
        self.speakers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speakers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SpeakerModels)> {
        self.speakers.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn speaker_ids(&self) -> impl Iterator<Item = &str> {
        self.speakers.keys().map(String::as_str)
    }
}

/// How stream totals enter the fusion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionNormalization {
    /// Sum of per-frame log-likelihoods.
    #[default]
    Total,
    /// Sum divided by the stream's frame count.
    PerFrame,
}

/// `η·spectral + (1-η)·residual`.
pub fn fuse(eta: f64, spectral: f64, residual: f64) -> f64 {
    eta * spectral + (1.0 - eta) * residual
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerScore {
    pub speaker: String,
    pub spectral: f64,
    pub residual: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreStream {
    Spectral,
    Residual,
    Combined,
}

impl ScoreStream {
    pub fn of(self, s: &SpeakerScore) -> f64 {
        match self {
            ScoreStream::Spectral => s.spectral,
            ScoreStream::Residual => s.residual,
            ScoreStream::Combined => s.combined,
        }
    }
}

/// Scores of one test utterance against every enrolled speaker, in sorted
/// speaker order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScores {
    pub eta: f64,
    pub spectral_frames: usize,
    pub residual_frames: usize,
    pub scores: Vec<SpeakerScore>,
}

impl UtteranceScores {
    pub fn get(&self, speaker: &str) -> Option<&SpeakerScore> {
        self.scores.iter().find(|s| s.speaker == speaker)
    }

    /// Highest-scoring speaker on the given stream. Ties keep the lowest
    /// speaker id, since scores are stored in sorted order.
    pub fn best(&self, stream: ScoreStream) -> Option<&SpeakerScore> {
        self.scores
            .iter()
            .fold(None, |best: Option<&SpeakerScore>, s| match best {
                Some(b) if stream.of(b) >= stream.of(s) => Some(b),
                _ => Some(s),
            })
    }

    /// Re-fuses the stored stream scores with another weight.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        Ok(Self {
            eta,
            scores: self
                .scores
                .iter()
                .map(|s| SpeakerScore {
                    combined: fuse(eta, s.spectral, s.residual),
                    ..s.clone()
                })
                .collect(),
            ..*self
        })
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidConfig(format!(
            "fusion weight {eta} not in [0, 1]"
        )));
    }
    Ok(())
}

/// Scores both feature streams against every speaker with raw-sum fusion.
pub fn score_utterance(
    spectral: &[Vec<f64>],
    residual: &[Vec<f64>],
    models: &SpeakerModelSet,
    eta: f64,
) -> Result<UtteranceScores> {
    score_utterance_with(spectral, residual, models, eta, FusionNormalization::Total)
}

pub fn score_utterance_with(
    spectral: &[Vec<f64>],
    residual: &[Vec<f64>],
    models: &SpeakerModelSet,
    eta: f64,
    normalization: FusionNormalization,
) -> Result<UtteranceScores> {
    check_eta(eta)?;
    if spectral.is_empty() {
        return Err(Error::EmptyFeatureStream("spectral"));
    }
    if residual.is_empty() {
        return Err(Error::EmptyFeatureStream("residual"));
    }
    if models.is_empty() {
        return Err(Error::InvalidConfig("no enrolled speakers".into()));
    }
    let (ds, dr) = match normalization {
        FusionNormalization::Total => (1.0, 1.0),
        FusionNormalization::PerFrame => (spectral.len() as f64, residual.len() as f64),
    };
    let scores = models
        .iter()
        .map(|(id, m)| {
            let s = m.spectral.total_log_likelihood(spectral)? / ds;
            let r = m.residual.total_log_likelihood(residual)? / dr;
            Ok(SpeakerScore {
                speaker: id.to_owned(),
                spectral: s,
                residual: r,
                combined: fuse(eta, s, r),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UtteranceScores {
        eta,
        spectral_frames: spectral.len(),
        residual_frames: residual.len(),
        scores,
    })
}

/// Speaker with the highest combined score; ties go to the lowest id.
pub fn identify(scores: &UtteranceScores) -> Result<&str> {
    identify_on(scores, ScoreStream::Combined)
}

pub fn identify_on(scores: &UtteranceScores, stream: ScoreStream) -> Result<&str> {
    scores
        .best(stream)
        .map(|s| s.speaker.as_str())
        .ok_or_else(|| Error::InvalidConfig("no speakers scored".into()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub utterance: String,
    pub truth: String,
    pub decided: String,
}

impl Decision {
    pub fn is_correct(&self) -> bool {
        self.truth == self.decided
    }
}

/// Percentage of correctly identified utterances.
pub fn percent_identification_accuracy(decisions: &[Decision]) -> f64 {
    if decisions.is_empty() {
        return 0.0;
    }
    let correct = decisions.iter().filter(|d| d.is_correct()).count();
    100.0 * correct as f64 / decisions.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub decisions: Vec<Decision>,
    pub pia: f64,
    /// `confusion[truth][decided]` counts.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
}

impl EvaluationReport {
    pub fn correct(&self) -> usize {
        self.decisions.iter().filter(|d| d.is_correct()).count()
    }

    pub fn total(&self) -> usize {
        self.decisions.len()
    }
}

pub fn evaluate(decisions: Vec<Decision>) -> Result<EvaluationReport> {
    if decisions.is_empty() {
        return Err(Error::InvalidConfig("no decisions to evaluate".into()));
    }
    let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for d in &decisions {
        *confusion
            .entry(d.truth.clone())
            .or_default()
            .entry(d.decided.clone())
            .or_default() += 1;
    }
    Ok(EvaluationReport {
        pia: percent_identification_accuracy(&decisions),
        decisions,
        confusion,
    })
}
