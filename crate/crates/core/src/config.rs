//! Run configuration, stored as TOML.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureConfig;
use crate::hmm::{Topology, TrainOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialization error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HmmConfig {
    pub num_states: usize,
    pub num_mixtures: usize,
    pub topology: Topology,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for HmmConfig {
    fn default() -> Self {
        Self {
            num_states: 5,
            num_mixtures: 3,
            topology: Topology::LeftToRight,
            max_iter: 40,
            rel_tol: 1e-4,
        }
    }
}

impl HmmConfig {
    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub features: FeatureConfig,
    pub hmm: HmmConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.features
            .mfcc
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let h = &self.hmm;
        if h.num_states == 0 || h.num_mixtures == 0 || h.max_iter == 0 {
            return Err(ConfigError::Invalid(
                "hmm.num_states, hmm.num_mixtures and hmm.max_iter must be >= 1".into(),
            ));
        }
        if !(h.rel_tol >= 0.0) {
            return Err(ConfigError::Invalid("hmm.rel_tol must be >= 0".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
        assert_eq!(cfg.features.dim(), 39);
    }

    #[test]
    fn partial_override() {
        let cfg = RunConfig::from_toml("seed = 9\n[hmm]\nnum_states = 3\ntopology = \"ergodic\"\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.hmm.num_states, 3);
        assert_eq!(cfg.hmm.topology, Topology::Ergodic);
        assert_eq!(cfg.hmm.num_mixtures, 3);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(RunConfig::from_toml("sed = 1"), Err(ConfigError::Parse(_))));
        assert!(RunConfig::from_toml("[hmm]\nstates = 3").is_err());
        assert!(RunConfig::from_toml("[features.mfcc]\nnum_ceps = 40").is_err());
        assert!(matches!(RunConfig::from_toml("[hmm]\nmax_iter = 0"), Err(ConfigError::Invalid(_))));
    }
}
