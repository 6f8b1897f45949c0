//! Diagonal-covariance Gaussian mixture models.
//!
//! Training is LBG binary-splitting initialization ([`lbg_init`]) followed by
//! a fixed number of EM passes ([`em_train`]); [`train_gmm`] runs both on a
//! canonically ordered copy of the data so the result does not depend on the
//! order the vectors arrive in.

mod codec;
mod em;
mod lbg;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralKind;

pub use codec::{FORMAT_VERSION, MAGIC};
pub use em::{em_train, EmOutcome};
pub use lbg::lbg_init;

/// Smallest variance any component may carry, regardless of data scale.
pub const MIN_VARIANCE: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Which feature stream a model was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Hosmr,
    Mfcc,
    Lfcc,
    Lpcc,
}

impl FeatureKind {
    pub fn tag(self) -> u8 {
        match self {
            FeatureKind::Hosmr => 1,
            FeatureKind::Mfcc => 2,
            FeatureKind::Lfcc => 3,
            FeatureKind::Lpcc => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            1 => FeatureKind::Hosmr,
            2 => FeatureKind::Mfcc,
            3 => FeatureKind::Lfcc,
            4 => FeatureKind::Lpcc,
            _ => return None,
        })
    }
}

impl From<SpectralKind> for FeatureKind {
    fn from(k: SpectralKind) -> Self {
        match k {
            SpectralKind::Mfcc => FeatureKind::Mfcc,
            SpectralKind::Lfcc => FeatureKind::Lfcc,
            SpectralKind::Lpcc => FeatureKind::Lpcc,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Hosmr => "hosmr",
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Lfcc => "lfcc",
            FeatureKind::Lpcc => "lpcc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    /// Component count `M`; a power of two.
    pub components: usize,
    pub em_iterations: usize,
    /// Variance floor as a fraction of the global per-dimension variance.
    pub variance_floor_factor: f64,
    /// LBG split perturbation, in units of the global per-dimension std.
    pub lbg_split_epsilon: f64,
    /// Reserved for randomized tie-breaking; LBG and EM are currently fully
    /// deterministic and do not draw from it.
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            components: 8,
            em_iterations: 10,
            variance_floor_factor: 0.01,
            lbg_split_epsilon: 0.02,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.components.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "component count {} is not a power of two",
                self.components
            )));
        }
        if self.em_iterations == 0 {
            return Err(Error::InvalidConfig(
                "em_iterations must be at least 1".into(),
            ));
        }
        if !(self.variance_floor_factor > 0.0 && self.variance_floor_factor.is_finite()) {
            return Err(Error::InvalidConfig(
                "variance_floor_factor must be positive".into(),
            ));
        }
        if !(self.lbg_split_epsilon > 0.0 && self.lbg_split_epsilon.is_finite()) {
            return Err(Error::InvalidConfig(
                "lbg_split_epsilon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `λ = {p_i, μ_i, Σ_i}` with diagonal `Σ_i`.
#[derive(Debug, Clone)]
pub struct GmmModel {
    kind: FeatureKind,
    dim: usize,
    weights: Vec<f64>,
    /// Row-major `M x d`.
    means: Vec<f64>,
    /// Row-major `M x d`.
    variances: Vec<f64>,
    /// `log p_i - (d ln 2π + Σ ln σ²) / 2` per component.
    log_consts: Vec<f64>,
    /// Per-component `-(d ln 2π + Σ ln σ²) / 2`.
    log_norms: Vec<f64>,
}

impl PartialEq for GmmModel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.dim == other.dim
            && self.weights == other.weights
            && self.means == other.means
            && self.variances == other.variances
    }
}

impl GmmModel {
    /// Builds a model from row-major parameter arrays, checking the mixture
    /// constraints.
    pub fn new(
        kind: FeatureKind,
        dim: usize,
        weights: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
    ) -> Result<Self> {
        let m = weights.len();
        if m == 0 || dim == 0 {
            return Err(Error::InvalidConfig(
                "model needs at least one component and dimension".into(),
            ));
        }
        for (name, v) in [("means", &means), ("variances", &variances)] {
            if v.len() != m * dim {
                return Err(Error::InvalidConfig(format!(
                    "{name} has {} values, expected {}",
                    v.len(),
                    m * dim
                )));
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig(
                "mixture weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "mixture weights sum to {total}"
            )));
        }
        if means.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("non-finite mean".into()));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(
                "variances must be finite and positive".into(),
            ));
        }
        let log_norms: Vec<f64> = variances
            .chunks(dim)
            .map(|v| -0.5 * (dim as f64 * LN_2PI + v.iter().map(|s| s.ln()).sum::<f64>()))
            .collect();
        let log_consts = weights
            .iter()
            .zip(&log_norms)
            .map(|(w, n)| w.ln() + n)
            .collect();
        Ok(Self {
            kind,
            dim,
            weights,
            means,
            variances,
            log_consts,
            log_norms,
        })
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, i: usize) -> &[f64] {
        &self.means[i * self.dim..(i + 1) * self.dim]
    }

    pub fn variance(&self, i: usize) -> &[f64] {
        &self.variances[i * self.dim..(i + 1) * self.dim]
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    fn mahalanobis(&self, x: &[f64], i: usize) -> f64 {
        x.iter()
            .zip(self.mean(i))
            .zip(self.variance(i))
            .map(|((x, m), v)| {
                let d = x - m;
                d * d / v
            })
            .sum()
    }

    /// `log b_i(x)` for the diagonal Gaussian `i`.
    pub fn component_log_density(&self, x: &[f64], i: usize) -> Result<f64> {
        self.check_dim(x)?;
        if i >= self.components() {
            return Err(Error::InvalidConfig(format!("component {i} out of range")));
        }
        Ok(self.log_norms[i] - 0.5 * self.mahalanobis(x, i))
    }

    /// Fills `out[i] = log p_i + log b_i(x)` and returns their log-sum-exp.
    fn weighted_log_densities(&self, x: &[f64], out: &mut [f64]) -> f64 {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.log_consts[i] - 0.5 * self.mahalanobis(x, i);
        }
        log_sum_exp(out)
    }

    /// `log Σ_i p_i b_i(x)` by max-shifted summation.
    pub fn log_likelihood(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut buf = vec![0.0; self.components()];
        Ok(self.weighted_log_densities(x, &mut buf))
    }

    /// `Σ_t log p(x_t | λ)` over a feature sequence.
    pub fn total_log_likelihood(&self, xs: &[Vec<f64>]) -> Result<f64> {
        let mut buf = vec![0.0; self.components()];
        let mut total = 0.0;
        for x in xs {
            self.check_dim(x)?;
            total += self.weighted_log_densities(x, &mut buf);
        }
        Ok(total)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        codec::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        codec::decode(bytes)
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Per-dimension mean and (population) variance.
pub(crate) fn global_moments(data: &[Vec<f64>], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = data.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in data {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for x in data {
        for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

pub(crate) fn variance_floor(global_var: &[f64], factor: f64) -> Vec<f64> {
    global_var
        .iter()
        .map(|v| (factor * v).max(MIN_VARIANCE))
        .collect()
}

pub(crate) fn check_data(data: &[Vec<f64>]) -> Result<usize> {
    let dim = data
        .first()
        .map(Vec::len)
        .ok_or(Error::InsufficientData { have: 0, need: 1 })?;
    if dim == 0 {
        return Err(Error::InvalidConfig("zero-dimensional features".into()));
    }
    for x in data {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite feature value".into()));
        }
    }
    Ok(dim)
}

/// LBG initialization followed by EM, on a lexicographically sorted copy of
/// `data`.
pub fn train_gmm(data: &[Vec<f64>], kind: FeatureKind, cfg: &TrainingConfig) -> Result<EmOutcome> {
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let init = lbg_init(&sorted, kind, cfg)?;
    em_train(&sorted, &init, cfg)
}

/// Direct evaluation of the multivariate normal density, used as an oracle.
#[cfg(test)]
pub(crate) fn naive_density(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    use std::f64::consts::PI;
    let d = x.len() as f64;
    let det: f64 = var.iter().product();
    let mut quad = 0.0;
    for k in 0..x.len() {
        quad += (x[k] - mean[k]) * (x[k] - mean[k]) / var[k];
    }
    (1.0 / ((2.0 * PI).powf(d / 2.0) * det.sqrt())) * (-0.5 * quad).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    pub(crate) fn random_model(rng: &mut ChaCha8Rng, m: usize, d: usize) -> GmmModel {
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        GmmModel::new(
            FeatureKind::Mfcc,
            d,
            raw.iter().map(|w| w / s).collect(),
            (0..m * d).map(|_| rng.random_range(-3.0..3.0)).collect(),
            (0..m * d).map(|_| rng.random_range(0.2..2.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn standard_normal_peaks() {
        let m = GmmModel::new(FeatureKind::Hosmr, 1, vec![1.0], vec![0.0], vec![1.0]).unwrap();
        assert!(
            (m.component_log_density(&[0.0], 0).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-12
        );
        let m2 =
            GmmModel::new(FeatureKind::Hosmr, 2, vec![1.0], vec![0.0; 2], vec![1.0; 2]).unwrap();
        assert!(
            (m2.component_log_density(&[0.0, 0.0], 0).unwrap() + (2.0 * PI).ln()).abs() < 1e-12
        );
        assert_eq!(
            m2.log_likelihood(&[0.0, 0.0]).unwrap(),
            m2.component_log_density(&[0.0, 0.0], 0).unwrap()
        );
    }

    #[test]
    fn identical_components_collapse() {
        let one = GmmModel::new(
            FeatureKind::Mfcc,
            2,
            vec![1.0],
            vec![0.5, -1.0],
            vec![0.7, 1.3],
        )
        .unwrap();
        let two = GmmModel::new(
            FeatureKind::Mfcc,
            2,
            vec![0.5, 0.5],
            vec![0.5, -1.0, 0.5, -1.0],
            vec![0.7, 1.3, 0.7, 1.3],
        )
        .unwrap();
        for x in [[0.0, 0.0], [1.0, -2.0], [3.0, 4.0]] {
            assert_eq!(
                one.log_likelihood(&x).unwrap(),
                two.log_likelihood(&x).unwrap()
            );
        }
    }

    #[test]
    fn density_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let m = random_model(&mut rng, 4, 6);
            for _ in 0..20 {
                let x: Vec<f64> = (0..6).map(|_| rng.random_range(-4.0..4.0)).collect();
                for i in 0..4 {
                    let direct = naive_density(&x, m.mean(i), m.variance(i));
                    if direct > 1e-300 {
                        assert!(
                            (m.component_log_density(&x, i).unwrap() - direct.ln()).abs() < 1e-10
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn mixture_matches_linear_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_model(&mut rng, 8, 5);
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-4.0..4.0)).collect();
            let lin: f64 = (0..8)
                .map(|i| m.weights()[i] * naive_density(&x, m.mean(i), m.variance(i)))
                .sum();
            if lin > 1e-300 {
                assert!((m.log_likelihood(&x).unwrap() - lin.ln()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn far_points_do_not_underflow() {
        let m = GmmModel::new(
            FeatureKind::Mfcc,
            1,
            vec![0.5, 0.5],
            vec![0.0, 1.0],
            vec![1e-4, 1e-4],
        )
        .unwrap();
        let ll = m.log_likelihood(&[100.0]).unwrap();
        assert!(ll.is_finite() && ll < -1e7);
    }

    #[test]
    fn constructor_rejects_invalid() {
        assert!(GmmModel::new(
            FeatureKind::Mfcc,
            1,
            vec![0.5, 0.4],
            vec![0.0; 2],
            vec![1.0; 2]
        )
        .is_err());
        assert!(GmmModel::new(FeatureKind::Mfcc, 1, vec![1.0], vec![0.0], vec![0.0]).is_err());
        assert!(GmmModel::new(FeatureKind::Mfcc, 2, vec![1.0], vec![0.0], vec![1.0]).is_err());
        let m = GmmModel::new(FeatureKind::Mfcc, 2, vec![1.0], vec![0.0; 2], vec![1.0; 2]).unwrap();
        assert!(matches!(
            m.log_likelihood(&[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn training_config_validation() {
        assert!(TrainingConfig::default().validate().is_ok());
        for m in [0, 3, 6, 12] {
            let c = TrainingConfig {
                components: m,
                ..Default::default()
            };
            assert!(c.validate().is_err());
        }
        let c = TrainingConfig {
            em_iterations: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn feature_kind_tags_round_trip() {
        for k in [
            FeatureKind::Hosmr,
            FeatureKind::Mfcc,
            FeatureKind::Lfcc,
            FeatureKind::Lpcc,
        ] {
            assert_eq!(FeatureKind::from_tag(k.tag()), Some(k));
        }
        assert_eq!(FeatureKind::from_tag(0), None);
    }

    proptest! {
        #[test]
        fn permutation_invariant_training(seed in 0u64..20, swaps in prop::collection::vec((0usize..200, 0usize..200), 1..50)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<Vec<f64>> = (0..200)
                .map(|i| {
                    let c = if i % 2 == 0 { -2.0 } else { 2.0 };
                    vec![c + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
                })
                .collect();
            let mut shuffled = data.clone();
            for (a, b) in swaps {
                shuffled.swap(a, b);
            }
            let cfg = TrainingConfig { components: 4, ..Default::default() };
            let a = train_gmm(&data, FeatureKind::Hosmr, &cfg).unwrap();
            let b = train_gmm(&shuffled, FeatureKind::Hosmr, &cfg).unwrap();
            prop_assert_eq!(a.model, b.model);
        }
    }
}
