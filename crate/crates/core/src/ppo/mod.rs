//! Proximal policy optimization for the mixed categorical/Bernoulli action
//! space, written against `ndarray` with hand-derived gradients.

mod checkpoint;
mod corridor;
mod gae;
mod mlp;
mod policy;
mod rollout;
mod trainer;
mod update;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use corridor::TrainSettings;
pub use gae::gae;
pub use mlp::{orthogonal, Activation, Dense, ForwardCache, Mlp};
pub use policy::{sample_and_logprob, DistParams, PolicyOutput, PolicyParams, N_INT_CHOICES};
pub use rollout::{collect_rollouts, RolloutBatch, RolloutWorker};
pub use trainer::{write_curve_csv, CurveRow, Trainer};
pub use update::{grad_norm, loss_and_grad, ppo_update, Adam, LossStats, Minibatch, UpdateStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub lr: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub clip_eps: f64,
    pub vf_coef: f64,
    pub entropy_coef: f64,
    /// Action steps gathered across all actors between updates.
    pub update_every: usize,
    pub k_epochs: usize,
    pub n_minibatches: usize,
    pub n_actors: usize,
    /// Training budget in simulation steps.
    pub total_steps: u64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub max_grad_norm: Option<f64>,
    pub adam_eps: f64,
    pub obs_clip: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            lr: 1e-4,
            gamma: 0.99,
            lambda: 0.95,
            clip_eps: 0.2,
            vf_coef: 0.5,
            entropy_coef: 0.01,
            update_every: 1024,
            k_epochs: 4,
            n_minibatches: 4,
            n_actors: 24,
            total_steps: 6_000_000,
            hidden: vec![512, 256, 128, 64, 32],
            activation: Activation::Tanh,
            max_grad_norm: Some(0.5),
            adam_eps: 1e-5,
            obs_clip: 10.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !unit(self.gamma) {
            return Err(Error::config("gamma", "must lie in [0, 1)"));
        }
        if !unit(self.lambda) {
            return Err(Error::config("lambda", "must lie in [0, 1)"));
        }
        if !(self.clip_eps > 0.0) {
            return Err(Error::config("clip_eps", "must be > 0"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be a positive finite number"));
        }
        if !(self.vf_coef >= 0.0 && self.entropy_coef >= 0.0) {
            return Err(Error::config("vf_coef", "loss coefficients must be >= 0"));
        }
        if self.update_every == 0 || self.k_epochs == 0 || self.n_minibatches == 0 {
            return Err(Error::config("update_every", "update_every, k_epochs and n_minibatches must be > 0"));
        }
        if self.n_actors == 0 {
            return Err(Error::config("n_actors", "must be > 0"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden", "layer widths must be > 0"));
        }
        if self.max_grad_norm.is_some_and(|m| !(m > 0.0)) {
            return Err(Error::config("max_grad_norm", "must be > 0"));
        }
        if !(self.adam_eps > 0.0 && self.obs_clip > 0.0) {
            return Err(Error::config("adam_eps", "adam_eps and obs_clip must be > 0"));
        }
        Ok(())
    }

    /// Steps each actor takes per update so the aggregate reaches `update_every`.
    pub fn steps_per_actor(&self) -> usize {
        self.update_every.div_ceil(self.n_actors)
    }
}
