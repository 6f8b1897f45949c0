//! Synthetic speaker corpus: each speaker is a stable order-17 all-pole
//! vocal-tract filter excited by a jittered pulse train plus noise.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::audio::{to_pcm16, write_pcm16};
use super::manifest::{check_id, CorpusManifest, ManifestEntry, Split};
use crate::error::{Error, Result};
use crate::lp::synthesize;

pub const SYNTH_FILTER_ORDER: usize = 17;
pub const MIN_PITCH_PERIOD: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpeakerSpec {
    pub speaker: String,
    /// `a(1)..a(p)` of `A(z) = 1 + Σ a(k) z^-k`.
    pub lp_coefficients: Vec<f64>,
    /// Mean pulse spacing in samples.
    pub pitch_period: f64,
    /// Relative period jitter; each spacing is `period·(1 ± jitter)`.
    pub jitter: f64,
    /// Standard deviation of the white noise added to the excitation.
    pub noise_floor: f64,
}

/// Step-down (reverse Levinson) test: `A(z)` is minimum phase iff every
/// reflection coefficient has magnitude below one.
pub fn is_stable(a: &[f64]) -> bool {
    let mut cur = a.to_vec();
    while let Some(&k) = cur.last() {
        if k.is_nan() || k.abs() >= 1.0 {
            return false;
        }
        let p = cur.len();
        let denom = 1.0 - k * k;
        cur = (0..p - 1)
            .map(|i| (cur[i] - k * cur[p - 2 - i]) / denom)
            .collect();
    }
    true
}

impl SyntheticSpeakerSpec {
    pub fn validate(&self) -> Result<()> {
        check_id("speaker", &self.speaker).map_err(Error::InvalidConfig)?;
        if self.lp_coefficients.is_empty() || !is_stable(&self.lp_coefficients) {
            return Err(Error::UnstableFilter(self.speaker.clone()));
        }
        if self.pitch_period.is_nan() || self.pitch_period < MIN_PITCH_PERIOD {
            return Err(Error::InvalidConfig(format!(
                "pitch period {} of {} below {MIN_PITCH_PERIOD} samples",
                self.pitch_period, self.speaker
            )));
        }
        if !(0.0..0.5).contains(&self.jitter)
            || !(self.noise_floor >= 0.0 && self.noise_floor.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "bad jitter/noise for {}",
                self.speaker
            )));
        }
        Ok(())
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn random_filter(rng: &mut ChaCha8Rng, sample_rate: u32) -> Vec<f64> {
    let fs = f64::from(sample_rate);
    let pairs = SYNTH_FILTER_ORDER / 2;
    let spacing = 0.95 * fs / 2.0 / (pairs + 1) as f64;
    let mut poly = vec![1.0, -rng.random_range(0.5..0.9)];
    for k in 1..=pairs {
        let f = k as f64 * spacing + rng.random_range(-0.35..0.35) * spacing;
        let r: f64 = rng.random_range(0.88..0.97);
        let theta = 2.0 * PI * f / fs;
        poly = poly_mul(&poly, &[1.0, -2.0 * r * theta.cos(), r * r]);
    }
    poly.split_off(1)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `count` distinct speakers with pitch periods spread evenly over 40-100
/// samples and random formant structure.
pub fn random_speaker_specs(
    count: usize,
    seed: u64,
    sample_rate: u32,
) -> Vec<SyntheticSpeakerSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs: Vec<SyntheticSpeakerSpec> = Vec::with_capacity(count);
    for i in 0..count {
        let pitch = if count == 1 {
            70.0
        } else {
            (40.0 + 60.0 * i as f64 / (count - 1) as f64).round()
        };
        let filter = loop {
            let f = random_filter(&mut rng, sample_rate);
            if specs.iter().all(|s| distance(&s.lp_coefficients, &f) > 0.1) {
                break f;
            }
        };
        specs.push(SyntheticSpeakerSpec {
            speaker: format!("spk{i:02}"),
            lp_coefficients: filter,
            pitch_period: pitch,
            jitter: 0.05,
            noise_floor: 0.05,
        });
    }
    specs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub train_utts: usize,
    pub test_utts: usize,
    pub utt_seconds: f64,
    pub sample_rate: u32,
    /// Leading and trailing near-silence per utterance.
    pub pad_seconds: f64,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            train_utts: 8,
            test_utts: 4,
            utt_seconds: 2.0,
            sample_rate: 8000,
            pad_seconds: 0.1,
            seed: 0,
        }
    }
}

/// One generated utterance before quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticUtterance {
    /// Peak-normalized to 0.8.
    pub samples: Vec<f64>,
    /// Sample indices of the excitation pulses.
    pub pulse_positions: Vec<usize>,
    /// Index range of the voiced segment.
    pub voiced: std::ops::Range<usize>,
}

pub fn synthesize_utterance(
    spec: &SyntheticSpeakerSpec,
    seconds: f64,
    pad_seconds: f64,
    sample_rate: u32,
    rng: &mut ChaCha8Rng,
) -> SyntheticUtterance {
    let total = (seconds * f64::from(sample_rate)).round() as usize;
    let pad = ((pad_seconds * f64::from(sample_rate)).round() as usize).min(total / 4);
    let voiced_len = total - 2 * pad;

    let mut excitation: Vec<f64> = (0..voiced_len)
        .map(|_| spec.noise_floor * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut pulses = Vec::new();
    let mut pos = rng.random_range(0.0..spec.pitch_period);
    while (pos.round() as usize) < voiced_len {
        let p = pos.round() as usize;
        excitation[p] += 1.0;
        pulses.push(pad + p);
        pos += spec.pitch_period * (1.0 + rng.random_range(-spec.jitter..=spec.jitter));
    }
    let voiced = synthesize(&excitation, &spec.lp_coefficients);
    let peak = voiced
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let gain = 0.8 / peak;

    let mut samples = Vec::with_capacity(total);
    let hiss = |rng: &mut ChaCha8Rng| 1e-4 * rng.sample::<f64, _>(StandardNormal);
    samples.extend((0..pad).map(|_| hiss(rng)));
    samples.extend(voiced.iter().map(|v| v * gain));
    samples.extend((0..pad).map(|_| hiss(rng)));
    SyntheticUtterance {
        samples,
        pulse_positions: pulses,
        voiced: pad..pad + voiced_len,
    }
}

fn utterance_rng(seed: u64, speaker: usize, utterance: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(speaker as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(utterance as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Writes `audio/*.wav`, `speakers.json` and `manifest.tsv` under `out_dir`
/// and returns the manifest. Output is a pure function of the inputs.
pub fn generate_synthetic_corpus(
    specs: &[SyntheticSpeakerSpec],
    opts: &SynthOptions,
    out_dir: &Path,
) -> Result<CorpusManifest> {
    for s in specs {
        s.validate()?;
    }
    if opts.train_utts == 0
        || opts.utt_seconds.is_nan()
        || opts.utt_seconds <= 0.0
        || opts.sample_rate == 0
    {
        return Err(Error::InvalidConfig(
            "synthetic corpus needs training utterances and a positive duration".into(),
        ));
    }
    let audio_dir = out_dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;

    let mut jobs = Vec::new();
    for (si, spec) in specs.iter().enumerate() {
        let per_split = [
            (Split::Train, opts.train_utts),
            (Split::Test, opts.test_utts),
        ];
        let mut ui = 0;
        for (split, n) in per_split {
            for k in 0..n {
                jobs.push((
                    si,
                    spec,
                    ui,
                    split,
                    format!("{}-{split}-{k:02}", spec.speaker),
                ));
                ui += 1;
            }
        }
    }
    let entries = jobs
        .par_iter()
        .map(|(si, spec, ui, split, utt_id)| {
            let mut rng = utterance_rng(opts.seed, *si, *ui);
            let utt = synthesize_utterance(
                spec,
                opts.utt_seconds,
                opts.pad_seconds,
                opts.sample_rate,
                &mut rng,
            );
            let rel = Path::new("audio").join(format!("{utt_id}.wav"));
            write_pcm16(
                &out_dir.join(&rel),
                &to_pcm16(&utt.samples),
                opts.sample_rate,
            )?;
            Ok(ManifestEntry {
                speaker: spec.speaker.clone(),
                utterance: utt_id.clone(),
                path: rel,
                split: *split,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = CorpusManifest::new(opts.sample_rate, entries, out_dir)?;
    manifest.save(&out_dir.join("manifest.tsv"))?;
    let specs_path = out_dir.join("speakers.json");
    std::fs::write(&specs_path, serde_json::to_string_pretty(specs)?)
        .map_err(|e| Error::io(&specs_path, e))?;
    Ok(manifest)
}
