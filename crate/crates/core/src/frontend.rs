//! Speech front end: energy-based silence removal, pre-emphasis, framing and
//! Hamming windowing.
//!
//! Every feature stream consumes the same [`FrameSequence`], so this is the
//! only place where framing decisions are made. The stages run in the order
//! silence removal → pre-emphasis → framing/windowing (see [`preprocess`]).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mono speech samples normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    /// Builds a signal from normalized samples, rejecting non-finite or
    /// out-of-range values.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSignal("sample rate must be positive".into()));
        }
        if let Some((i, x)) = samples
            .iter()
            .enumerate()
            .find(|(_, x)| !x.is_finite() || x.abs() > 1.0)
        {
            return Err(Error::InvalidSignal(format!(
                "sample {i} = {x} outside [-1, 1]"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Pre-emphasized signals may leave `[-1, 1]` (at most `1 + coeff`), so
    /// derived signals skip the amplitude check.
    fn derived(samples: Vec<f64>, sample_rate: u32) -> Self {
        debug_assert!(samples.iter().all(|x| x.is_finite()));
        Self {
            samples,
            sample_rate,
        }
    }

    /// Converts signed 16-bit PCM by scaling with 1/32768.
    pub fn from_pcm16(pcm: &[i16], sample_rate: u32) -> Result<Self> {
        Self::new(
            pcm.iter().map(|&s| f64::from(s) / 32768.0).collect(),
            sample_rate,
        )
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    pub pre_emphasis: f64,
    /// Frame length in samples (160 = 20 ms at 8 kHz).
    pub frame_len: usize,
    /// Hop between frame starts in samples (80 = 50% overlap).
    pub frame_shift: usize,
    /// A block is kept when its mean-square energy exceeds this factor times
    /// the utterance's mean block energy.
    pub silence_energy_ratio: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            pre_emphasis: 0.97,
            frame_len: 160,
            frame_shift: 80,
            silence_energy_ratio: 0.06,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return Err(Error::InvalidConfig(format!(
                "pre_emphasis {} not in [0, 1)",
                self.pre_emphasis
            )));
        }
        if self.frame_shift == 0 || self.frame_shift > self.frame_len {
            return Err(Error::InvalidConfig(format!(
                "need 0 < frame_shift ({}) <= frame_len ({})",
                self.frame_shift, self.frame_len
            )));
        }
        if !(self.silence_energy_ratio.is_finite() && self.silence_energy_ratio >= 0.0) {
            return Err(Error::InvalidConfig(
                "silence_energy_ratio must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Fixed-length windowed frames of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Vec<f64>>,
    frame_len: usize,
    source: String,
}

impl FrameSequence {
    pub fn new(frames: Vec<Vec<f64>>, frame_len: usize, source: impl Into<String>) -> Result<Self> {
        if let Some(bad) = frames.iter().find(|f| f.len() != frame_len) {
            return Err(Error::InvalidSignal(format!(
                "frame of length {} in a sequence of frame_len {frame_len}",
                bad.len()
            )));
        }
        Ok(Self {
            frames,
            frame_len,
            source: source.into(),
        })
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn mean_square(block: &[f64]) -> f64 {
    block.iter().map(|x| x * x).sum::<f64>() / block.len() as f64
}

/// Drops frame-sized blocks whose mean-square energy does not exceed
/// `silence_energy_ratio` times the mean block energy.
///
/// Blocks are non-overlapping and `frame_len` long; a trailing partial block
/// is judged on its own mean-square energy. Block order is preserved.
pub fn remove_silence(signal: &AudioSignal, cfg: &PreprocessConfig) -> Result<AudioSignal> {
    cfg.validate()?;
    if signal.is_empty() {
        return Err(Error::InvalidSignal("empty signal".into()));
    }
    let blocks: Vec<&[f64]> = signal.samples.chunks(cfg.frame_len).collect();
    let energies: Vec<f64> = blocks.iter().map(|b| mean_square(b)).collect();
    let mean_energy = energies.iter().sum::<f64>() / energies.len() as f64;
    let threshold = cfg.silence_energy_ratio * mean_energy;

    let kept: Vec<f64> = blocks
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| e > threshold)
        .flat_map(|(b, _)| b.iter().copied())
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyAfterVad);
    }
    Ok(AudioSignal::derived(kept, signal.sample_rate))
}

/// First-order pre-emphasis `y(n) = x(n) - coeff * x(n-1)`, with `y(0) = x(0)`.
pub fn pre_emphasize(signal: &AudioSignal, coeff: f64) -> AudioSignal {
    let x = &signal.samples;
    let mut y = Vec::with_capacity(x.len());
    if let Some(&first) = x.first() {
        y.push(first);
        y.extend(x.windows(2).map(|w| w[1] - coeff * w[0]));
    }
    AudioSignal::derived(y, signal.sample_rate)
}

/// Symmetric Hamming window `0.54 - 0.46 cos(2πn / (N-1))`.
pub fn hamming_window(len: usize) -> Vec<f64> {
    match len {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => {
            let denom = (len - 1) as f64;
            (0..len)
                .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
                .collect()
        }
    }
}

/// Splits into overlapping frames and applies the Hamming window.
/// A trailing partial frame is discarded.
pub fn frame_and_window(
    signal: &AudioSignal,
    cfg: &PreprocessConfig,
    source: impl Into<String>,
) -> Result<FrameSequence> {
    cfg.validate()?;
    let n = signal.len();
    if n < cfg.frame_len {
        return Err(Error::SignalTooShort {
            len: n,
            frame_len: cfg.frame_len,
        });
    }
    let window = hamming_window(cfg.frame_len);
    let count = (n - cfg.frame_len) / cfg.frame_shift + 1;
    let frames = (0..count)
        .map(|i| {
            let start = i * cfg.frame_shift;
            signal.samples[start..start + cfg.frame_len]
                .iter()
                .zip(&window)
                .map(|(s, w)| s * w)
                .collect()
        })
        .collect();
    Ok(FrameSequence {
        frames,
        frame_len: cfg.frame_len,
        source: source.into(),
    })
}

/// Full front end: silence removal, pre-emphasis, then framing and windowing.
pub fn preprocess(
    signal: &AudioSignal,
    cfg: &PreprocessConfig,
    source: impl Into<String>,
) -> Result<FrameSequence> {
    let voiced = remove_silence(signal, cfg)?;
    let emphasized = pre_emphasize(&voiced, cfg.pre_emphasis);
    frame_and_window(&emphasized, cfg, source)
}
