//! Cepstral baseline features: MFCC and LFCC from triangular filterbanks,
//! LPCC from all-pole models.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::FrameSequence;
use crate::lp::{compute_lp, LpCoefficients};

/// Floor applied to filterbank energies before the logarithm.
pub const LOG_ENERGY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralKind {
    Mfcc,
    Lfcc,
    Lpcc,
}

impl fmt::Display for SpectralKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectralKind::Mfcc => "mfcc",
            SpectralKind::Lfcc => "lfcc",
            SpectralKind::Lpcc => "lpcc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterScale {
    Mel,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    pub kind: SpectralKind,
    pub num_filters: usize,
    pub num_cepstra: usize,
    pub fft_size: usize,
    /// All-pole order used for LPCC.
    pub lp_order: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            kind: SpectralKind::Mfcc,
            num_filters: 20,
            num_cepstra: 19,
            fft_size: 256,
            lp_order: 19,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self, frame_len: usize) -> Result<()> {
        if self.num_cepstra == 0 {
            return Err(Error::InvalidConfig(
                "num_cepstra must be at least 1".into(),
            ));
        }
        match self.kind {
            SpectralKind::Lpcc => {
                if self.lp_order == 0 || self.lp_order >= frame_len {
                    return Err(Error::InvalidConfig(format!(
                        "LPCC lp_order {} invalid for frame_len {frame_len}",
                        self.lp_order
                    )));
                }
            }
            SpectralKind::Mfcc | SpectralKind::Lfcc => {
                if self.num_cepstra >= self.num_filters {
                    return Err(Error::InvalidConfig(format!(
                        "num_cepstra {} must be below num_filters {} (dc term is dropped)",
                        self.num_cepstra, self.num_filters
                    )));
                }
                if self.fft_size < frame_len {
                    return Err(Error::InvalidConfig(format!(
                        "fft_size {} shorter than frame_len {frame_len}",
                        self.fft_size
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One frame's cepstral coefficients (dc term excluded for filterbank kinds).
#[derive(Debug, Clone, PartialEq)]
pub struct CepstralVector {
    pub kind: SpectralKind,
    pub coeffs: Vec<f64>,
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// `|DFT|^2` of the zero-padded frame, bins `0..=fft_size/2`.
pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Vec<f64> {
    let fft = FftPlanner::new().plan_fft_forward(fft_size);
    power_spectrum_with(frame, fft.as_ref())
}

fn power_spectrum_with(frame: &[f64], fft: &dyn Fft<f64>) -> Vec<f64> {
    let n = fft.len();
    assert!(frame.len() <= n, "frame longer than fft size");
    let mut buf: Vec<Complex64> = frame
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    fft.process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm_sqr()).collect()
}

/// Triangular filters over FFT bins between 0 Hz and Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    scale: FilterScale,
    fft_size: usize,
    sample_rate: u32,
    weights: Vec<Vec<f64>>,
    centers_hz: Vec<f64>,
}

impl FilterBank {
    /// Filter `j` rises from edge `j` to a peak at edge `j+1` and falls to
    /// zero at edge `j+2`; edges are equally spaced on the chosen scale.
    /// Each filter's sampled weights are rescaled so their maximum is 1.
    pub fn new(
        scale: FilterScale,
        num_filters: usize,
        fft_size: usize,
        sample_rate: u32,
    ) -> Result<Self> {
        if num_filters == 0 || fft_size < 2 || sample_rate == 0 {
            return Err(Error::InvalidConfig("empty filterbank".into()));
        }
        let nyquist = f64::from(sample_rate) / 2.0;
        type Warp = fn(f64) -> f64;
        let (to, from): (Warp, Warp) = match scale {
            FilterScale::Mel => (hz_to_mel, mel_to_hz),
            FilterScale::Linear => (|f| f, |f| f),
        };
        let top = to(nyquist);
        let edges: Vec<f64> = (0..num_filters + 2)
            .map(|i| from(top * i as f64 / (num_filters + 1) as f64))
            .collect();
        let bins = fft_size / 2 + 1;
        let bin_hz = f64::from(sample_rate) / fft_size as f64;

        let mut weights = Vec::with_capacity(num_filters);
        for j in 0..num_filters {
            let (lo, mid, hi) = (edges[j], edges[j + 1], edges[j + 2]);
            let mut w: Vec<f64> = (0..bins)
                .map(|b| {
                    let f = b as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect();
            let peak = w.iter().fold(0.0f64, |m, &x| m.max(x));
            if peak == 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "filter {j} covers no FFT bin; increase fft_size or reduce num_filters"
                )));
            }
            w.iter_mut().for_each(|x| *x /= peak);
            weights.push(w);
        }
        Ok(Self {
            scale,
            fft_size,
            sample_rate,
            weights,
            centers_hz: edges[1..=num_filters].to_vec(),
        })
    }

    pub fn scale(&self) -> FilterScale {
        self.scale
    }

    pub fn num_filters(&self) -> usize {
        self.weights.len()
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }
}

/// `log(max(Σ_b w_j(b) P(b), floor))` for every filter.
pub fn filterbank_energies(spectrum: &[f64], bank: &FilterBank) -> Result<Vec<f64>> {
    let bins = bank.fft_size / 2 + 1;
    if spectrum.len() != bins {
        return Err(Error::DimensionMismatch {
            expected: bins,
            found: spectrum.len(),
        });
    }
    Ok(bank
        .weights
        .iter()
        .map(|w| {
            let e: f64 = w.iter().zip(spectrum).map(|(a, b)| a * b).sum();
            e.max(LOG_ENERGY_FLOOR).ln()
        })
        .collect())
}

/// Orthonormal type-II DCT.
pub fn dct2(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, v)| v * (PI * k as f64 * (i as f64 + 0.5) / n).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// DCT of the log energies, keeping coefficients `1..=num_cepstra`.
pub fn cepstra_from_energies(
    energies: &[f64],
    num_cepstra: usize,
    kind: SpectralKind,
) -> Result<CepstralVector> {
    if num_cepstra >= energies.len() {
        return Err(Error::DimensionMismatch {
            expected: num_cepstra + 1,
            found: energies.len(),
        });
    }
    let c = dct2(energies);
    Ok(CepstralVector {
        kind,
        coeffs: c[1..=num_cepstra].to_vec(),
    })
}

/// Cepstrum of the all-pole model `1/A(z)`:
/// `c_n = -a_n - (1/n) Σ_{k=1}^{n-1} k c_k a_{n-k}`, with `a_m = 0` for `m > p`.
/// The gain does not enter.
pub fn lpcc_from_lp(lp: &LpCoefficients, num_cepstra: usize) -> CepstralVector {
    let a = lp.coefficients();
    let a_at = |m: usize| {
        if m >= 1 && m <= a.len() {
            a[m - 1]
        } else {
            0.0
        }
    };
    let mut c = vec![0.0; num_cepstra + 1];
    for n in 1..=num_cepstra {
        let acc: f64 = (1..n).map(|k| k as f64 * c[k] * a_at(n - k)).sum();
        c[n] = -a_at(n) - acc / n as f64;
    }
    CepstralVector {
        kind: SpectralKind::Lpcc,
        coeffs: c.split_off(1),
    }
}

/// Spectral feature vectors of an utterance plus the number of degenerate
/// frames dropped (LPCC only; filterbank kinds never skip).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralExtraction {
    pub vectors: Vec<Vec<f64>>,
    pub skipped: usize,
}

/// Reusable extractor for one spectral configuration.
#[derive(Clone)]
pub struct SpectralExtractor {
    config: SpectralConfig,
    bank: Option<FilterBank>,
    fft: Option<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for SpectralExtractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralExtractor")
            .field("config", &self.config)
            .field("bank", &self.bank)
            .finish_non_exhaustive()
    }
}

impl SpectralExtractor {
    pub fn new(config: SpectralConfig, frame_len: usize, sample_rate: u32) -> Result<Self> {
        config.validate(frame_len)?;
        let scale = match config.kind {
            SpectralKind::Mfcc => Some(FilterScale::Mel),
            SpectralKind::Lfcc => Some(FilterScale::Linear),
            SpectralKind::Lpcc => None,
        };
        let bank = scale
            .map(|s| FilterBank::new(s, config.num_filters, config.fft_size, sample_rate))
            .transpose()?;
        let fft = bank
            .as_ref()
            .map(|_| FftPlanner::new().plan_fft_forward(config.fft_size));
        Ok(Self { config, bank, fft })
    }

    pub fn config(&self) -> &SpectralConfig {
        &self.config
    }

    pub fn filterbank(&self) -> Option<&FilterBank> {
        self.bank.as_ref()
    }

    pub fn frame(&self, frame: &[f64]) -> Result<CepstralVector> {
        match (&self.bank, &self.fft) {
            (Some(bank), Some(fft)) => {
                let spec = power_spectrum_with(frame, fft.as_ref());
                let e = filterbank_energies(&spec, bank)?;
                cepstra_from_energies(&e, self.config.num_cepstra, self.config.kind)
            }
            _ => {
                let lp = compute_lp(frame, self.config.lp_order)?;
                Ok(lpcc_from_lp(&lp, self.config.num_cepstra))
            }
        }
    }

    pub fn extract(&self, frames: &FrameSequence) -> Result<SpectralExtraction> {
        let mut vectors = Vec::with_capacity(frames.len());
        let mut skipped = 0;
        for f in frames.frames() {
            match self.frame(f) {
                Ok(v) => vectors.push(v.coeffs),
                Err(Error::DegenerateFrame(_)) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if vectors.is_empty() {
            return Err(Error::NoUsableFrames { skipped });
        }
        Ok(SpectralExtraction { vectors, skipped })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Naive O(n^2) DFT power oracle.
    fn naive_power(frame: &[f64], n: usize) -> Vec<f64> {
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &x) in frame.iter().enumerate() {
                    let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                    re += x * ang.cos();
                    im += x * ang.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    /// Naive DCT-II with orthonormal scaling, written independently.
    fn naive_dct(x: &[f64], k: usize) -> f64 {
        let n = x.len();
        let mut s = 0.0;
        for (i, v) in x.iter().enumerate() {
            s += v * (PI / n as f64 * (i as f64 + 0.5) * k as f64).cos();
        }
        s * if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        }
    }

    #[test]
    fn zero_frame_zero_spectrum() {
        assert!(power_spectrum(&[0.0; 160], 256).iter().all(|&p| p == 0.0));
    }

    #[test]
    fn bin_aligned_cosine_is_concentrated() {
        let n = 256;
        let frame: Vec<f64> = (0..n)
            .map(|t| (2.0 * PI * 8.0 * t as f64 / n as f64).cos())
            .collect();
        let p = power_spectrum(&frame, n);
        let total: f64 = p.iter().sum();
        assert!((p[8] / total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_naive_dft_and_parseval() {
        let frame: Vec<f64> = (0..160)
            .map(|t| (t * 37 % 29) as f64 / 29.0 - 0.5)
            .collect();
        let fast = power_spectrum(&frame, 256);
        let slow = naive_power(&frame, 256);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b));
        }
        // Parseval over the full two-sided spectrum.
        let time: f64 = frame.iter().map(|x| x * x).sum();
        let two_sided: f64 = fast[0] + fast[128] + 2.0 * fast[1..128].iter().sum::<f64>();
        assert!(((two_sided / 256.0) - time).abs() < 1e-9 * time);
    }

    #[test]
    fn zero_spectrum_hits_floor() {
        let bank = FilterBank::new(FilterScale::Mel, 20, 256, 8000).unwrap();
        let e = filterbank_energies(&vec![0.0; 129], &bank).unwrap();
        assert!(e.iter().all(|&v| v == LOG_ENERGY_FLOOR.ln()));
        assert!(filterbank_energies(&[0.0; 10], &bank).is_err());
    }

    #[test]
    fn flat_spectrum_gives_log_area() {
        let bank = FilterBank::new(FilterScale::Mel, 20, 256, 8000).unwrap();
        let e = filterbank_energies(&vec![1.0; 129], &bank).unwrap();
        for (j, w) in bank.weights().iter().enumerate() {
            let mut area = 0.0;
            for v in w {
                area += v;
            }
            assert!((e[j] - area.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn filterbank_shape() {
        for scale in [FilterScale::Mel, FilterScale::Linear] {
            let bank = FilterBank::new(scale, 20, 256, 8000).unwrap();
            assert_eq!(bank.num_filters(), 20);
            assert!(bank.centers_hz().windows(2).all(|w| w[0] < w[1]));
            for w in bank.weights() {
                assert!(w.iter().all(|&x| x >= 0.0));
                assert_eq!(w.iter().fold(0.0f64, |m, &x| m.max(x)), 1.0);
            }
            // Upper edge of filter j is the center of filter j+1: filter j's
            // support ends exactly where filter j+1 peaks.
            let bin_hz = 8000.0 / 256.0;
            for j in 0..19 {
                let next_center = bank.centers_hz()[j + 1];
                let last_nonzero = bank.weights()[j].iter().rposition(|&x| x > 0.0).unwrap();
                assert!(last_nonzero as f64 * bin_hz < next_center + 1e-9);
                assert!((last_nonzero + 1) as f64 * bin_hz >= next_center - 1e-9);
            }
        }
    }

    #[test]
    fn linear_areas_equal_mel_areas_grow() {
        let area =
            |b: &FilterBank| -> Vec<f64> { b.weights().iter().map(|w| w.iter().sum()).collect() };
        let lin = area(&FilterBank::new(FilterScale::Linear, 20, 256, 8000).unwrap());
        let mean = lin.iter().sum::<f64>() / lin.len() as f64;
        assert!(lin.iter().all(|a| (a / mean - 1.0).abs() < 0.05), "{lin:?}");

        let mel = area(&FilterBank::new(FilterScale::Mel, 20, 256, 8000).unwrap());
        // Triangle base widths grow with center frequency on the mel scale.
        assert!(mel[19] > 3.0 * mel[0]);
        let widths: Vec<f64> = {
            let b = FilterBank::new(FilterScale::Mel, 20, 256, 8000).unwrap();
            let c = b.centers_hz().to_vec();
            c.windows(2).map(|w| w[1] - w[0]).collect()
        };
        assert!(widths.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn constant_energies_give_zero_cepstra() {
        let c = cepstra_from_energies(&[3.5; 20], 19, SpectralKind::Mfcc).unwrap();
        assert_eq!(c.coeffs.len(), 19);
        assert!(c.coeffs.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn one_hot_energies_match_naive_dct() {
        let mut e = vec![0.0; 20];
        e[0] = 1.0;
        let c = cepstra_from_energies(&e, 19, SpectralKind::Mfcc).unwrap();
        for i in 1..20 {
            assert!((c.coeffs[i - 1] - naive_dct(&e, i)).abs() < 1e-14);
            let expected = (2.0f64 / 20.0).sqrt() * (PI * i as f64 * 0.5 / 20.0).cos();
            assert!((c.coeffs[i - 1] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn lpcc_flat_and_first_order() {
        let flat = LpCoefficients::new(vec![0.0; 19], 1.0).unwrap();
        assert!(lpcc_from_lp(&flat, 19).coeffs.iter().all(|&c| c == 0.0));

        let alpha = 0.6;
        let c = lpcc_from_lp(&LpCoefficients::new(vec![alpha], 1.0).unwrap(), 19).coeffs;
        // log(1/(1 + αz^-1)) = Σ (-1)^n α^n / n z^-n
        for (i, &v) in c.iter().enumerate() {
            let n = (i + 1) as i32;
            let expected = (-alpha).powi(n) / n as f64;
            assert!((v - expected).abs() < 1e-14);
        }
        assert!((c[0] + alpha).abs() < 1e-15);
        assert!((c[1] - alpha * alpha / 2.0).abs() < 1e-15);
    }

    /// Cepstrum of `1/A` by the spectral route: `c_n = 2 * IDFT(log|1/A|)[n]`.
    fn spectral_lpcc(a: &[f64], num: usize) -> Vec<f64> {
        let grid = 4096;
        let log_mag: Vec<f64> = (0..grid)
            .map(|k| {
                let w = 2.0 * PI * k as f64 / grid as f64;
                let (mut re, mut im) = (1.0, 0.0);
                for (i, ai) in a.iter().enumerate() {
                    re += ai * (w * (i + 1) as f64).cos();
                    im -= ai * (w * (i + 1) as f64).sin();
                }
                -0.5 * (re * re + im * im).ln()
            })
            .collect();
        (1..=num)
            .map(|n| {
                let s: f64 = log_mag
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (2.0 * PI * (n * k) as f64 / grid as f64).cos())
                    .sum();
                2.0 * s / grid as f64
            })
            .collect()
    }

    #[test]
    fn lpcc_recursion_matches_spectral_route() {
        // Stable model from known poles.
        let poles = [(0.9, 0.4), (0.8, 1.3), (0.85, 2.2)];
        let mut a = vec![1.0];
        for (r, th) in poles {
            let q = [1.0, -2.0 * r * f64::cos(th), r * r];
            let mut next = vec![0.0; a.len() + 2];
            for (i, ai) in a.iter().enumerate() {
                for (j, qj) in q.iter().enumerate() {
                    next[i + j] += ai * qj;
                }
            }
            a = next;
        }
        let lp = LpCoefficients::new(a[1..].to_vec(), 0.3).unwrap();
        let rec = lpcc_from_lp(&lp, 19).coeffs;
        let spec = spectral_lpcc(&a[1..], 19);
        for (x, y) in rec.iter().zip(&spec) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
        let other_gain = LpCoefficients::new(a[1..].to_vec(), 42.0).unwrap();
        assert_eq!(lpcc_from_lp(&other_gain, 19), lpcc_from_lp(&lp, 19));
    }

    #[test]
    fn extractor_yields_19_values_for_every_kind() {
        let frame: Vec<f64> = (0..160)
            .map(|t| ((t * 13 % 17) as f64 / 17.0 - 0.5) * 0.3)
            .collect();
        let fs = FrameSequence::new(vec![frame; 4], 160, "x").unwrap();
        for kind in [SpectralKind::Mfcc, SpectralKind::Lfcc, SpectralKind::Lpcc] {
            let cfg = SpectralConfig {
                kind,
                ..Default::default()
            };
            let ex = SpectralExtractor::new(cfg, 160, 8000).unwrap();
            let out = ex.extract(&fs).unwrap();
            assert_eq!(out.vectors.len(), 4);
            assert!(out
                .vectors
                .iter()
                .all(|v| v.len() == 19 && v.iter().all(|x| x.is_finite())));
        }
    }

    #[test]
    fn config_validation() {
        let bad = SpectralConfig {
            num_cepstra: 20,
            ..Default::default()
        };
        assert!(bad.validate(160).is_err());
        let bad = SpectralConfig {
            fft_size: 128,
            ..Default::default()
        };
        assert!(bad.validate(160).is_err());
        assert!(SpectralConfig::default().validate(160).is_ok());
    }

    proptest! {
        #[test]
        fn filterbank_scales_log_linearly(
            spec in prop::collection::vec(0.01f64..10.0, 129),
            alpha in 0.01f64..100.0,
        ) {
            let bank = FilterBank::new(FilterScale::Mel, 20, 256, 8000).unwrap();
            let base = filterbank_energies(&spec, &bank).unwrap();
            let scaled: Vec<f64> = spec.iter().map(|x| x * alpha).collect();
            let out = filterbank_energies(&scaled, &bank).unwrap();
            for (a, b) in base.iter().zip(&out) {
                prop_assert!((b - a - alpha.ln()).abs() < 1e-9);
            }
        }

        #[test]
        fn cepstra_ignore_dc_offset(
            e in prop::collection::vec(-20.0f64..5.0, 20),
            offset in -50.0f64..50.0,
        ) {
            let a = cepstra_from_energies(&e, 19, SpectralKind::Mfcc).unwrap();
            let shifted: Vec<f64> = e.iter().map(|x| x + offset).collect();
            let b = cepstra_from_energies(&shifted, 19, SpectralKind::Mfcc).unwrap();
            for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
