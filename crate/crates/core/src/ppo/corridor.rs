//! Training on the corridor environment from one settings value or file.

use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::trainer::{CurveRow, Trainer};
use super::PpoConfig;
use crate::env::{EnvConfig, TrafficEnv};
use crate::error::{Error, Result};
use crate::network::{build_corridor, NetworkConfig};

/// Everything a corridor training run depends on.
///
/// ```toml
/// seed = 7
/// [ppo]
/// total_steps = 500000
/// n_actors = 4
/// [env]
/// scale_max = 2.0
/// [network]
/// # any NetworkConfig field
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub seed: u64,
    /// Collect rollouts on worker threads. Results do not depend on it.
    pub parallel: bool,
    pub ppo: PpoConfig,
    pub env: EnvConfig,
    pub network: NetworkConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            seed: 0,
            parallel: true,
            ppo: PpoConfig::default(),
            env: EnvConfig::default(),
            network: NetworkConfig::default(),
        }
    }
}

impl TrainSettings {
    /// Desk-scale defaults on the three-site network.
    pub fn mini() -> Self {
        TrainSettings {
            ppo: PpoConfig {
                n_actors: 4,
                total_steps: 500_000,
                ..PpoConfig::default()
            },
            network: NetworkConfig::mini(),
            ..TrainSettings::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("train settings", e.to_string()))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn trainer(&self) -> Result<Trainer<TrafficEnv>> {
        let net = build_corridor(&self.network)?;
        let envs = (0..self.ppo.n_actors)
            .map(|_| TrafficEnv::new(&net, self.env.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trainer::new(envs, self.ppo.clone(), self.seed)?.parallel(self.parallel))
    }

    /// Trains to the step budget and returns the final checkpoint with the
    /// training curve.
    pub fn run(&self, progress: impl FnMut(&CurveRow)) -> Result<(Checkpoint, Vec<CurveRow>)> {
        let mut t = self.trainer()?;
        t.train(progress)?;
        Ok((
            t.checkpoint(Some(self.env.clone()), Some(self.network.clone())),
            t.curve().to_vec(),
        ))
    }
}
