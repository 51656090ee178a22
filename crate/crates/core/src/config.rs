//! Run configuration: every tunable value, named profiles and a TOML
//! key-value file format. CLI flags are applied on top of a loaded file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::model::{InferenceConfig, ModelDims};
use crate::signal::StftConfig;
use crate::training::{LossConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// One decoder application.
    #[serde(rename = "nri")]
    Nri,
    /// Recurrent inference, at most 3 iterations, threshold 1e-2.
    #[serde(rename = "ris-s")]
    RisS,
    /// Recurrent inference, at most 10 iterations, threshold 1e-3.
    #[serde(rename = "ris-l")]
    RisL,
    /// Whatever `[inference]` says.
    #[serde(rename = "custom")]
    Custom,
}

impl Variant {
    pub fn preset(self) -> Option<InferenceConfig> {
        match self {
            Variant::Nri => Some(InferenceConfig::nri()),
            Variant::RisS => Some(InferenceConfig::ris_s()),
            Variant::RisL => Some(InferenceConfig::ris_l()),
            Variant::Custom => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Nri => "nri",
            Variant::RisS => "ris-s",
            Variant::RisL => "ris-l",
            Variant::Custom => "custom",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nri" => Ok(Variant::Nri),
            "ris-s" => Ok(Variant::RisS),
            "ris-l" => Ok(Variant::RisL),
            "custom" => Ok(Variant::Custom),
            other => Err(Error::Usage(format!(
                "unknown variant '{other}' (expected nri, ris-s or ris-l)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Full-scale values: 2049/4096/384 STFT, F=744, T=60, L=10.
    Paper,
    /// Reduced dimensions for CPU-scale experiments: 512/1024/128 STFT,
    /// F=186, T=30, L=5.
    Desk,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            other => Err(Error::Usage(format!(
                "unknown profile '{other}' (expected paper or desk)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Profile,
    pub variant: Variant,
    /// Griffin-Lim iterations used when resynthesising the voice.
    pub griffin_lim_iters: usize,
    pub stft: StftConfig,
    pub model: ModelDims,
    pub inference: InferenceConfig,
    pub loss: LossConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    #[serde(default)]
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn paper() -> Self {
        RunConfig {
            profile: Profile::Paper,
            variant: Variant::RisL,
            griffin_lim_iters: 10,
            stft: StftConfig::paper(),
            model: ModelDims::paper(),
            inference: InferenceConfig::ris_l(),
            loss: LossConfig::default(),
            train: TrainConfig::paper(),
            eval: EvalConfig::default(),
            paths: PathsConfig::default(),
        }
    }

    pub fn desk() -> Self {
        RunConfig {
            profile: Profile::Desk,
            variant: Variant::RisS,
            stft: StftConfig::desk(),
            model: ModelDims::desk(),
            inference: InferenceConfig::ris_s(),
            train: TrainConfig::desk(),
            ..Self::paper()
        }
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => Self::paper(),
            Profile::Desk => Self::desk(),
        }
    }

    /// Selects a variant and its recurrent-inference settings.
    pub fn set_variant(&mut self, variant: Variant) {
        self.variant = variant;
        if let Some(preset) = variant.preset() {
            self.inference = preset;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.model.validate()?;
        self.inference.validate()?;
        self.loss.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        if self.model.n_bins != self.stft.n_bins() {
            return Err(Error::Parameter(format!(
                "model expects {} bins but the STFT yields {}",
                self.model.n_bins,
                self.stft.n_bins()
            )));
        }
        if let Some(preset) = self.variant.preset() {
            if preset != self.inference {
                return Err(Error::Parameter(format!(
                    "variant {} requires inference settings {preset:?}, found {:?}",
                    self.variant.name(),
                    self.inference
                )));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_profile_round_trips_through_toml() {
        let cfg = RunConfig::paper();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.stft.n_bins(), 2049);
        assert_eq!(back.stft.hop, 384);
        assert_eq!(back.model.bands, 744);
        assert_eq!(back.train.learning_rate, 1e-4);
        assert_eq!(back.loss.lambda_mask, 1e-2);
    }

    #[test]
    fn desk_profile_is_consistent() {
        let cfg = RunConfig::desk();
        cfg.validate().unwrap();
        assert_eq!(cfg.stft.n_bins(), 513);
        assert_eq!((cfg.model.bands, cfg.model.seq_len, cfg.model.context), (186, 30, 5));
    }

    #[test]
    fn variant_presets() {
        let mut cfg = RunConfig::desk();
        cfg.set_variant(Variant::RisL);
        assert_eq!(cfg.inference.iter, 10);
        assert_eq!(cfg.inference.tau_term, 1e-3);
        cfg.set_variant(Variant::Nri);
        assert!(!cfg.inference.use_recurrent_inference);
        cfg.inference.iter = 4;
        assert!(cfg.validate().is_err());
        cfg.set_variant(Variant::Custom);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn inconsistent_dims_and_unknown_keys_are_rejected() {
        let mut cfg = RunConfig::desk();
        cfg.model.n_bins = 2049;
        assert!(cfg.validate().is_err());
        let text = RunConfig::desk().to_toml().replace("griffin_lim_iters", "gl_iters");
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Format(_))));
        assert!("ris-x".parse::<Variant>().is_err());
    }
}
