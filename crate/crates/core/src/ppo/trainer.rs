//! Training loop: alternate rollout collection and PPO updates.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, CheckpointMeta};
use super::policy::PolicyParams;
use super::rollout::{collect_rollouts, RolloutWorker};
use super::update::{ppo_update, Adam};
use super::PpoConfig;
use crate::env::{coordination_metric, EnvConfig, Environment, NormStats};
use crate::error::{Error, Result};
use crate::network::NetworkConfig;

/// One row of the training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub update: u64,
    pub sim_steps: u64,
    pub episodes: usize,
    /// Mean raw return of episodes finished during this rollout (NaN if none).
    pub mean_episode_return: f64,
    pub mean_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub coordination: f64,
}

pub struct Trainer<E> {
    cfg: PpoConfig,
    seed: u64,
    params: PolicyParams,
    opt: Adam,
    stats: NormStats,
    workers: Vec<RolloutWorker<E>>,
    rng: ChaCha8Rng,
    parallel: bool,
    updates: u64,
    sim_steps: u64,
    curve: Vec<CurveRow>,
}

impl<E: Environment + Send> Trainer<E> {
    /// Builds a trainer with one worker per environment; `cfg.n_actors` is
    /// overridden by the number of environments.
    pub fn new(envs: Vec<E>, mut cfg: PpoConfig, seed: u64) -> Result<Self> {
        if envs.is_empty() {
            return Err(Error::config("n_actors", "need at least one environment"));
        }
        cfg.n_actors = envs.len();
        cfg.validate()?;
        let obs_len = envs[0].obs_len();
        let n_mb = envs[0].n_midblocks();
        if envs.iter().any(|e| e.obs_len() != obs_len || e.n_midblocks() != n_mb) {
            return Err(Error::config("envs", "all environments must share observation and action shapes"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = PolicyParams::new(obs_len, n_mb, &cfg.hidden, cfg.activation, &mut rng);
        let opt = Adam::new(&params, cfg.lr, cfg.adam_eps);
        let workers = envs
            .into_iter()
            .enumerate()
            .map(|(i, e)| RolloutWorker::new(e, seed, i as u64 + 1, cfg.gamma, cfg.obs_clip))
            .collect();
        Ok(Trainer {
            cfg,
            seed,
            params,
            opt,
            stats: NormStats::new(obs_len),
            workers,
            rng,
            parallel: false,
            updates: 0,
            sim_steps: 0,
            curve: Vec::new(),
        })
    }

    /// Collects rollouts on worker threads; results are identical either way.
    pub fn parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    pub fn config(&self) -> &PpoConfig {
        &self.cfg
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn norm_stats(&self) -> &NormStats {
        &self.stats
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn sim_steps(&self) -> u64 {
        self.sim_steps
    }

    pub fn curve(&self) -> &[CurveRow] {
        &self.curve
    }

    pub fn workers(&self) -> &[RolloutWorker<E>] {
        &self.workers
    }

    /// One rollout plus one update.
    pub fn iterate(&mut self) -> Result<CurveRow> {
        let steps = self.cfg.steps_per_actor();
        let (batch, stats, finished) =
            collect_rollouts(&self.params, &mut self.workers, steps, &self.stats, &self.cfg, self.parallel)?;
        let (params, upd) = ppo_update(&self.params, &mut self.opt, &batch, &self.cfg, &mut self.rng)?;
        self.params = params;
        self.stats = stats;
        self.updates += 1;
        let per_action = self.workers[0].env.sim_steps_per_action();
        self.sim_steps += batch.len() as u64 * per_action;
        let last = upd.last();
        let row = CurveRow {
            update: self.updates,
            sim_steps: self.sim_steps,
            episodes: finished.len(),
            mean_episode_return: if finished.is_empty() {
                f64::NAN
            } else {
                finished.iter().sum::<f64>() / finished.len() as f64
            },
            mean_reward: batch.raw_rewards.iter().sum::<f64>() / batch.len() as f64,
            policy_loss: last.policy_loss,
            value_loss: last.value_loss,
            entropy: last.entropy,
            clip_fraction: last.clip_fraction,
            approx_kl: last.approx_kl,
            coordination: coordination_metric(&batch.actions),
        };
        self.curve.push(row);
        Ok(row)
    }

    /// Iterates until `cfg.total_steps` simulation steps have been collected,
    /// calling `progress` after every update.
    pub fn train(&mut self, mut progress: impl FnMut(&CurveRow)) -> Result<()> {
        while self.sim_steps < self.cfg.total_steps {
            let row = self.iterate()?;
            progress(&row);
        }
        Ok(())
    }

    pub fn checkpoint(&self, env: Option<EnvConfig>, network: Option<NetworkConfig>) -> Checkpoint {
        Checkpoint {
            meta: CheckpointMeta {
                obs_len: self.params.obs_len(),
                n_midblocks: self.params.n_midblocks(),
                hidden: self.params.hidden(),
                activation: self.cfg.activation,
                ppo: self.cfg.clone(),
                seed: self.seed,
                updates: self.updates,
                sim_steps: self.sim_steps,
                obs_count: self.stats.obs.count,
                ret_stats: self.stats.ret,
                env,
                network,
            },
            params: self.params.clone(),
            norm: self.stats.clone(),
        }
    }

    pub fn write_curve_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_curve_csv(path, &self.curve)
    }
}

pub fn write_curve_csv(path: impl AsRef<Path>, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
