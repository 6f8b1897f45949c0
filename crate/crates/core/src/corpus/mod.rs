//! Corpus handling around the core algorithms: manifests, WAV I/O,
//! synthetic speakers, the model store and the train/evaluate pipeline.

pub mod audio;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod store;
pub mod synth;

pub use audio::{load_audio, to_pcm16, write_pcm16};
pub use manifest::{CorpusManifest, ManifestEntry, Split};
pub use pipeline::{
    evaluate_command, evaluate_models, identify_command, train_command, train_models, Evaluation,
    FeaturePipeline, ScoredUtterance, SpeakerTrainingSummary, TrainSummary, UtteranceFeatures,
};
pub use report::{render_records, render_summary};
pub use store::{load_store, save_store};
pub use synth::{
    generate_synthetic_corpus, random_speaker_specs, synthesize_utterance, SynthOptions,
    SyntheticSpeakerSpec, SyntheticUtterance,
};
