//! Run configuration shared by training, evaluation and single-utterance
//! identification. Stored as TOML; a trained model store keeps a copy so
//! test utterances go through exactly the same front end.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::PreprocessConfig;
use crate::gmm::TrainingConfig;
use crate::hosmr::HosmrConfig;
use crate::identification::FusionNormalization;
use crate::spectral::{SpectralConfig, SpectralKind};

/// Default configuration, commented. Parsing it yields
/// [`SystemConfig::default`].
pub const DEFAULT_CONFIG_TOML: &str = r#"# vocsid configuration

# Input sampling frequency in Hz; audio at any other rate is rejected.
sample_rate = 8000

[frontend]
# First-order pre-emphasis factor.
pre_emphasis = 0.97
# 20 ms frames at 8 kHz.
frame_len = 160
# 50% overlap.
frame_shift = 80
# Blocks at or below this fraction of the mean block energy are dropped as silence.
silence_energy_ratio = 0.06

[spectral]
# mfcc | lfcc | lpcc
kind = "mfcc"
# Triangular filters in the filterbank (mfcc, lfcc).
num_filters = 20
# Cepstral coefficients kept per frame, dc term excluded.
num_cepstra = 19
fft_size = 256
# All-pole order for lpcc.
lp_order = 19
# GMM components for the spectral stream.
components = 8

[residual]
# LP order of the inverse filter producing the residual.
lp_order = 17
# Central moments of orders 2..=num_moments+1.
num_moments = 6
# GMM components for the residual stream.
components = 8

[training]
em_iterations = 10
# Variance floor as a fraction of the global per-dimension variance.
variance_floor_factor = 0.01
# LBG split perturbation in units of the per-dimension standard deviation.
lbg_split_epsilon = 0.02
seed = 0

[fusion]
# Weight of the spectral score; the residual score gets 1 - eta.
eta = 0.5
# total | per_frame
normalization = "total"
"#;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralStreamConfig {
    pub kind: SpectralKind,
    pub num_filters: usize,
    pub num_cepstra: usize,
    pub fft_size: usize,
    pub lp_order: usize,
    pub components: usize,
}

impl SpectralStreamConfig {
    pub fn features(&self) -> SpectralConfig {
        SpectralConfig {
            kind: self.kind,
            num_filters: self.num_filters,
            num_cepstra: self.num_cepstra,
            fft_size: self.fft_size,
            lp_order: self.lp_order,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualStreamConfig {
    pub lp_order: usize,
    pub num_moments: usize,
    pub components: usize,
}

impl ResidualStreamConfig {
    pub fn features(&self) -> HosmrConfig {
        HosmrConfig {
            lp_order: self.lp_order,
            num_moments: self.num_moments,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmSettings {
    pub em_iterations: usize,
    pub variance_floor_factor: f64,
    pub lbg_split_epsilon: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionSettings {
    pub eta: f64,
    pub normalization: FusionNormalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub sample_rate: u32,
    pub frontend: PreprocessConfig,
    pub spectral: SpectralStreamConfig,
    pub residual: ResidualStreamConfig,
    pub training: EmSettings,
    pub fusion: FusionSettings,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let spectral = SpectralConfig::default();
        let hosmr = HosmrConfig::default();
        let training = TrainingConfig::default();
        Self {
            sample_rate: 8000,
            frontend: PreprocessConfig::default(),
            spectral: SpectralStreamConfig {
                kind: spectral.kind,
                num_filters: spectral.num_filters,
                num_cepstra: spectral.num_cepstra,
                fft_size: spectral.fft_size,
                lp_order: spectral.lp_order,
                components: training.components,
            },
            residual: ResidualStreamConfig {
                lp_order: hosmr.lp_order,
                num_moments: hosmr.num_moments,
                components: training.components,
            },
            training: EmSettings {
                em_iterations: training.em_iterations,
                variance_floor_factor: training.variance_floor_factor,
                lbg_split_epsilon: training.lbg_split_epsilon,
                seed: training.seed,
            },
            fusion: FusionSettings {
                eta: 0.5,
                normalization: FusionNormalization::Total,
            },
        }
    }
}

impl SystemConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be positive".into()));
        }
        self.frontend.validate()?;
        self.spectral.features().validate(self.frontend.frame_len)?;
        self.residual.features().validate()?;
        if self.residual.lp_order >= self.frontend.frame_len {
            return Err(Error::InvalidConfig(
                "residual lp_order must be below frame_len".into(),
            ));
        }
        self.spectral_training().validate()?;
        self.residual_training().validate()?;
        if !(0.0..=1.0).contains(&self.fusion.eta) {
            return Err(Error::InvalidConfig(format!(
                "eta {} not in [0, 1]",
                self.fusion.eta
            )));
        }
        Ok(())
    }

    fn training_with(&self, components: usize) -> TrainingConfig {
        TrainingConfig {
            components,
            em_iterations: self.training.em_iterations,
            variance_floor_factor: self.training.variance_floor_factor,
            lbg_split_epsilon: self.training.lbg_split_epsilon,
            seed: self.training.seed,
        }
    }

    pub fn spectral_training(&self) -> TrainingConfig {
        self.training_with(self.spectral.components)
    }

    pub fn residual_training(&self) -> TrainingConfig {
        self.training_with(self.residual.components)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_text_parses_to_default() {
        assert_eq!(
            SystemConfig::from_toml(DEFAULT_CONFIG_TOML).unwrap(),
            SystemConfig::default()
        );
    }

    #[test]
    fn serialized_round_trip() {
        let mut c = SystemConfig::default();
        c.spectral.kind = SpectralKind::Lpcc;
        c.fusion.eta = 0.25;
        assert_eq!(SystemConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        let t = DEFAULT_CONFIG_TOML.replace("eta = 0.5", "eta = 1.5");
        assert!(SystemConfig::from_toml(&t).is_err());
        let t = DEFAULT_CONFIG_TOML.replace(
            "components = 8\n\n[training]",
            "components = 6\n\n[training]",
        );
        assert!(SystemConfig::from_toml(&t).is_err());
        let t = DEFAULT_CONFIG_TOML.replace("seed = 0", "seed = 0\nbogus = 1");
        assert!(SystemConfig::from_toml(&t).is_err());
    }
}
