//! Run configuration: one JSON document with strict keys (unknown keys are
//! errors) covering every subsystem, plus the desk/paper scale profiles.

use crate::distill::BcConfig;
use crate::env::EnvConfig;
use crate::evalbench::EvalOptions;
use crate::rl::PpoConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleProfile {
    /// Laptop-scale defaults.
    Desk,
    /// Full-scale values: 1000 envs, 10000 iterations, 1000 episodes.
    Paper,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillSection {
    pub episodes: usize,
    pub encoder_seed: u64,
    pub bc: BcConfig,
}

impl Default for DistillSection {
    fn default() -> Self {
        DistillSection {
            episodes: 60,
            encoder_seed: crate::distill::ENCODER_SEED,
            bc: BcConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumSection {
    pub iterations_per_stage: u32,
}

impl Default for CurriculumSection {
    fn default() -> Self {
        CurriculumSection {
            iterations_per_stage: 500,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub n_envs: usize,
    pub episodes_per_env: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            n_envs: 10,
            episodes_per_env: 10,
        }
    }
}

/// The whole run configuration. `env` nests the physics and reward sections.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: String,
    pub profile: ScaleProfile,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub curriculum: CurriculumSection,
    pub distill: DistillSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: "out".to_string(),
            profile: ScaleProfile::Desk,
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            curriculum: CurriculumSection::default(),
            distill: DistillSection::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    /// Apply profile-scale values that the file did not override explicitly.
    /// The paper profile pins 1000 envs, 10000 iterations per stage, 1000
    /// dataset episodes.
    pub fn apply_profile(&mut self) {
        if self.profile == ScaleProfile::Paper {
            self.ppo.envs = 1000;
            self.ppo.iterations = 10_000;
            self.curriculum.iterations_per_stage = 10_000;
            self.distill.episodes = 1000;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ppo.envs == 0 || self.ppo.horizon == 0 {
            return Err(ConfigError::Invalid("ppo.envs and ppo.horizon must be positive".into()));
        }
        if self.ppo.minibatches == 0
            || (self.ppo.envs * self.ppo.horizon) % self.ppo.minibatches != 0
        {
            return Err(ConfigError::Invalid(
                "ppo.minibatches must divide envs * horizon".into(),
            ));
        }
        if !(self.ppo.clip > 0.0 && self.ppo.clip < 1.0) {
            return Err(ConfigError::Invalid("ppo.clip must lie in (0, 1)".into()));
        }
        if !(self.env.finger_smoothing > 0.0 && self.env.finger_smoothing <= 1.0) {
            return Err(ConfigError::Invalid(
                "env.finger_smoothing must lie in (0, 1]".into(),
            ));
        }
        if self.env.horizon == 0 {
            return Err(ConfigError::Invalid("env.horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.apply_profile();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        crate::io::atomic_write(path, text.as_bytes())?;
        Ok(())
    }

    /// Hash of the canonical serialized form; stamped into artifacts.
    /// The output directory is excluded: it does not affect behavior.
    pub fn hash(&self) -> u64 {
        let mut canon = self.clone();
        canon.output_dir = String::new();
        let text = serde_json::to_string(&canon).expect("config serializes");
        crate::io::fnv_bytes(text.as_bytes())
    }

    pub fn eval_options(&self, seed: u64) -> EvalOptions {
        EvalOptions {
            n_envs: self.eval.n_envs,
            episodes_per_env: self.eval.episodes_per_env,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrip() {
        let cfg = RunConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        let json = r#"{ "seed": 1, "not_a_key": true }"#;
        assert!(serde_json::from_str::<RunConfig>(json).is_err());
        let json = r#"{ "env": { "physics": { "palm_radius_typo": 0.2 } } }"#;
        assert!(serde_json::from_str::<RunConfig>(json).is_err());
        let json = r#"{ "env": { "reward": { "palm_coef": 1.0 } } }"#;
        assert!(serde_json::from_str::<RunConfig>(json).is_ok());
    }

    #[test]
    fn paper_profile_values() {
        let mut cfg = RunConfig {
            profile: ScaleProfile::Paper,
            ..Default::default()
        };
        cfg.apply_profile();
        assert_eq!(cfg.ppo.envs, 1000);
        assert_eq!(cfg.ppo.iterations, 10_000);
        assert_eq!(cfg.curriculum.iterations_per_stage, 10_000);
        assert_eq!(cfg.distill.episodes, 1000);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = RunConfig::default();
        cfg.ppo.minibatches = 7; // 2048 not divisible by 7
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.env.finger_smoothing = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
