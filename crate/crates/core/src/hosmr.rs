//! Higher-order statistical moments of the LP residual (HOSMR).
//!
//! Per frame: LP analysis, inverse filtering, peak normalization of the
//! residual to `[-1, 1]`, then central moments of orders `2..=K+1`. With the
//! mean removed the first-order moment carries nothing, so `K` moments start
//! at order two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::FrameSequence;
use crate::lp::{compute_lp, residual_frame, ResidualFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HosmrConfig {
    pub lp_order: usize,
    /// Number of moments `K`; orders `2..=K+1` are emitted.
    pub num_moments: usize,
}

impl Default for HosmrConfig {
    fn default() -> Self {
        Self {
            lp_order: 17,
            num_moments: 6,
        }
    }
}

impl HosmrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lp_order == 0 || self.num_moments == 0 {
            return Err(Error::InvalidConfig(
                "HOSMR lp_order and num_moments must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Central moments `(m_2, ..., m_{K+1})` of one normalized residual frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HosmrVector(Vec<f64>);

impl HosmrVector {
    pub fn moments(&self) -> &[f64] {
        &self.0
    }

    /// Moment of the given order (2-based). `None` when out of range.
    pub fn order(&self, k: usize) -> Option<f64> {
        k.checked_sub(2).and_then(|i| self.0.get(i).copied())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Divides every sample by the frame's peak magnitude.
pub fn normalize_residual(residual: &ResidualFrame) -> Result<ResidualFrame> {
    if residual.is_empty() {
        return Err(Error::DegenerateFrame("empty residual"));
    }
    let peak = residual
        .samples()
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    if peak == 0.0 || !peak.is_finite() {
        return Err(Error::DegenerateFrame("residual has no nonzero peak"));
    }
    Ok(ResidualFrame::new(
        residual.samples().iter().map(|x| x / peak).collect(),
        residual.source_frame_index(),
    ))
}

/// `m_k = (1/N) Σ (e(n) - μ)^k` for `k = 2..=num_moments+1`.
pub fn central_moments(residual: &ResidualFrame, num_moments: usize) -> HosmrVector {
    let e = residual.samples();
    if e.is_empty() {
        return HosmrVector(vec![0.0; num_moments]);
    }
    let n = e.len() as f64;
    // Shifted by the first sample so a constant frame has exactly zero deviation.
    let mean = e[0] + e.iter().map(|x| x - e[0]).sum::<f64>() / n;
    let mut sums = vec![0.0; num_moments];
    for &x in e {
        let d = x - mean;
        let mut p = d;
        for s in sums.iter_mut() {
            p *= d;
            *s += p;
        }
    }
    HosmrVector(sums.into_iter().map(|s| s / n).collect())
}

/// HOSMR vectors of an utterance plus the number of degenerate frames dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct HosmrExtraction {
    pub vectors: Vec<HosmrVector>,
    pub skipped: usize,
}

fn frame_moments(frame: &[f64], index: usize, cfg: &HosmrConfig) -> Result<HosmrVector> {
    let lp = compute_lp(frame, cfg.lp_order)?;
    let residual = residual_frame(frame, &lp, index);
    let normalized = normalize_residual(&residual)?;
    Ok(central_moments(&normalized, cfg.num_moments))
}

/// Runs the per-frame HOSMR chain over an utterance. Frames that turn out
/// degenerate (silent, singular) are skipped and counted.
pub fn extract_hosmr(frames: &FrameSequence, cfg: &HosmrConfig) -> Result<HosmrExtraction> {
    cfg.validate()?;
    let mut vectors = Vec::with_capacity(frames.len());
    let mut skipped = 0;
    for (i, frame) in frames.frames().iter().enumerate() {
        match frame_moments(frame, i, cfg) {
            Ok(v) => vectors.push(v),
            Err(Error::DegenerateFrame(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if vectors.is_empty() {
        return Err(Error::NoUsableFrames { skipped });
    }
    Ok(HosmrExtraction { vectors, skipped })
}
