//! Text-independent closed-set speaker identification.
//!
//! Two feature streams are extracted per 20 ms frame: cepstral features of
//! the vocal-tract envelope (MFCC, LFCC or LPCC) and higher-order statistical
//! moments of the linear-prediction residual (HOSMR). Each stream gets a
//! diagonal GMM per speaker; the two log-likelihood scores are fused
//! linearly and the best-scoring speaker wins.

pub mod config;
pub mod corpus;
pub mod error;
pub mod frontend;
pub mod gmm;
pub mod hosmr;
pub mod identification;
pub mod lp;
pub mod spectral;

pub use config::{SystemConfig, DEFAULT_CONFIG_TOML};
pub use error::{Error, Result};
pub use frontend::{preprocess, AudioSignal, FrameSequence, PreprocessConfig};
pub use gmm::{train_gmm, FeatureKind, GmmModel, TrainingConfig};
pub use hosmr::{extract_hosmr, HosmrConfig, HosmrVector};
pub use identification::{
    fuse, identify, score_utterance, EvaluationReport, FusionNormalization, SpeakerModelSet,
    SpeakerModels, UtteranceScores,
};
pub use lp::{compute_lp, inverse_filter, LpCoefficients, ResidualFrame};
pub use spectral::{CepstralVector, SpectralConfig, SpectralExtractor, SpectralKind};
