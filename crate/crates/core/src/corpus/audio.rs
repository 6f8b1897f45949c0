//! RIFF/WAVE PCM16 mono I/O.

use std::path::Path;

use crate::error::{Error, Result};
use crate::frontend::AudioSignal;

/// Decodes a 16-bit PCM mono WAV file, scaling samples by 1/32768.
pub fn load_audio(path: &Path, expected_rate: u32) -> Result<AudioSignal> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedFormat(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: {} channels, expected mono",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: {}-bit {:?}, expected 16-bit PCM",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    if spec.sample_rate != expected_rate {
        return Err(Error::SampleRateMismatch {
            expected: expected_rate,
            found: spec.sample_rate,
        });
    }
    let pcm = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    AudioSignal::from_pcm16(&pcm, spec.sample_rate)
}

/// Quantizes `samples` (nominally in `[-1, 1]`) to 16-bit PCM.
pub fn to_pcm16(samples: &[f64]) -> Vec<i16> {
    samples
        .iter()
        .map(|&x| (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
        .collect()
}

/// Writes a 16-bit PCM mono WAV file.
pub fn write_pcm16(path: &Path, pcm: &[i16], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &s in pcm {
        w.write_sample(s)?;
    }
    w.finalize()?;
    Ok(())
}
