//! Linear prediction by the autocorrelation method and LP residual
//! computation.
//!
//! Sign convention: `s(n) = -Σ a(k) s(n-k) + e(n)`, so the inverse filter is
//! `A(z) = 1 + Σ a(k) z^-k` and the residual is `e(n) = s(n) + Σ a(k) s(n-k)`.

use crate::error::{Error, Result};

/// Relative diagonal loading added to the zero-lag autocorrelation.
pub const AUTOCORR_REGULARIZATION: f64 = 1e-9;

/// Predictor coefficients `a(1)..a(p)` and the model gain.
#[derive(Debug, Clone, PartialEq)]
pub struct LpCoefficients {
    a: Vec<f64>,
    gain: f64,
}

impl LpCoefficients {
    pub fn new(a: Vec<f64>, gain: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidConfig("LP order must be at least 1".into()));
        }
        if a.iter().any(|v| !v.is_finite()) || !(gain.is_finite() && gain >= 0.0) {
            return Err(Error::InvalidConfig(
                "non-finite LP coefficients or gain".into(),
            ));
        }
        Ok(Self { a, gain })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    /// Root-mean-square prediction error of the analysed frame.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// The inverse-filter polynomial `[1, a(1), ..., a(p)]`.
    pub fn inverse_filter_polynomial(&self) -> Vec<f64> {
        std::iter::once(1.0).chain(self.a.iter().copied()).collect()
    }
}

/// LP prediction error of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualFrame {
    samples: Vec<f64>,
    source_frame_index: usize,
}

impl ResidualFrame {
    pub fn new(samples: Vec<f64>, source_frame_index: usize) -> Self {
        Self {
            samples,
            source_frame_index,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn source_frame_index(&self) -> usize {
        self.source_frame_index
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Biased autocorrelation `r(k) = (1/N) Σ s(n) s(n-k)` for `k = 0..=max_lag`,
/// treating samples outside the frame as zero.
pub fn autocorrelation(frame: &[f64], max_lag: usize) -> Vec<f64> {
    let n = frame.len();
    (0..=max_lag)
        .map(|lag| {
            if lag >= n {
                return 0.0;
            }
            frame[lag..]
                .iter()
                .zip(frame)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Levinson-Durbin recursion on an autocorrelation sequence `r(0..=p)`.
///
/// Returns the coefficients under the `A(z) = 1 + Σ a(k) z^-k` convention and
/// the final prediction-error power.
pub fn levinson_durbin(r: &[f64]) -> Result<(Vec<f64>, f64)> {
    let order = r.len().saturating_sub(1);
    if order == 0 {
        return Err(Error::InvalidConfig("LP order must be at least 1".into()));
    }
    let mut err = r[0];
    if !(err > 0.0 && err.is_finite()) {
        return Err(Error::DegenerateFrame(
            "zero-lag autocorrelation is not positive",
        ));
    }
    let mut a = vec![0.0; order];
    let mut prev = vec![0.0; order];
    for i in 0..order {
        let acc = r[i + 1]
            + a[..i]
                .iter()
                .zip(r[1..=i].iter().rev())
                .map(|(aj, rj)| aj * rj)
                .sum::<f64>();
        let k = -acc / err;
        prev[..i].copy_from_slice(&a[..i]);
        for j in 0..i {
            a[j] = prev[j] + k * prev[i - 1 - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if !(err > 0.0 && err.is_finite()) {
            return Err(Error::DegenerateFrame("autocorrelation matrix is singular"));
        }
    }
    Ok((a, err))
}

/// LP analysis of one frame by the autocorrelation method.
///
/// The zero-lag autocorrelation is loaded by [`AUTOCORR_REGULARIZATION`]
/// times itself before solving. The gain is the RMS prediction error of the
/// zero-extended frame, `sqrt((1/N) Σ e(n)^2)` over the full convolution.
pub fn compute_lp(frame: &[f64], order: usize) -> Result<LpCoefficients> {
    if order == 0 {
        return Err(Error::InvalidConfig("LP order must be at least 1".into()));
    }
    if frame.len() <= order {
        return Err(Error::InvalidConfig(format!(
            "frame of {} samples is too short for LP order {order}",
            frame.len()
        )));
    }
    if frame.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateFrame("frame is identically zero"));
    }
    let mut r = autocorrelation(frame, order);
    let loading = AUTOCORR_REGULARIZATION * r[0];
    r[0] += loading;
    let (a, err) = levinson_durbin(&r)?;
    // Levinson's error power belongs to the loaded system; remove the loading
    // term to get the error power of `a` on the frame itself.
    let norm2: f64 = a.iter().map(|v| v * v).sum();
    let power = (err - loading * (1.0 + norm2)).max(0.0);
    LpCoefficients::new(a, power.sqrt())
}

/// Predictor output `ŝ(n) = -Σ a(k) s(n-k)` with zero history before the frame.
pub fn predict(frame: &[f64], lp: &LpCoefficients) -> Vec<f64> {
    let a = lp.coefficients();
    (0..frame.len())
        .map(|n| {
            -a.iter()
                .enumerate()
                .take(n)
                .map(|(k, ak)| ak * frame[n - 1 - k])
                .sum::<f64>()
        })
        .collect()
}

/// Inverse filtering by `A(z)`: `e(n) = s(n) + Σ a(k) s(n-k)`, frame-local
/// zero history.
pub fn inverse_filter(frame: &[f64], lp: &LpCoefficients) -> Vec<f64> {
    let a = lp.coefficients();
    (0..frame.len())
        .map(|n| {
            frame[n]
                + a.iter()
                    .enumerate()
                    .take(n)
                    .map(|(k, ak)| ak * frame[n - 1 - k])
                    .sum::<f64>()
        })
        .collect()
}

/// [`inverse_filter`] tagged with the source frame index.
pub fn residual_frame(frame: &[f64], lp: &LpCoefficients, index: usize) -> ResidualFrame {
    ResidualFrame::new(inverse_filter(frame, lp), index)
}

/// Drives the all-pole filter `1/A(z)` with `excitation` from zero state.
pub fn synthesize(excitation: &[f64], a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(excitation.len());
    for (n, &e) in excitation.iter().enumerate() {
        let fb: f64 = a
            .iter()
            .enumerate()
            .take(n)
            .map(|(k, ak)| ak * out[n - 1 - k])
            .sum();
        out.push(e - fb);
    }
    out
}
