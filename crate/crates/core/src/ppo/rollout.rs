//! Experience collection across several actors.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::gae::gae;
use super::policy::{sample_and_logprob, PolicyParams};
use super::PpoConfig;
use crate::env::{ActionVector, Environment, NormStats, Normalizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    /// Normalized observations, one row per action step.
    pub obs: Array2<f64>,
    pub actions: Vec<ActionVector>,
    pub logp: Vec<f64>,
    /// Normalized rewards used for the advantage estimates.
    pub rewards: Vec<f64>,
    pub raw_rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Standardized over the whole batch.
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Rows contributed by each actor, in actor order.
    pub actor_lens: Vec<usize>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.obs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check(&self) -> Result<()> {
        let n = self.len();
        let lens = [
            self.actions.len(),
            self.logp.len(),
            self.rewards.len(),
            self.raw_rewards.len(),
            self.values.len(),
            self.dones.len(),
            self.advantages.len(),
            self.returns.len(),
            self.actor_lens.iter().sum(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Length(format!("batch has {n} observations but field lengths {lens:?}")));
        }
        Ok(())
    }
}

/// One actor: an environment plus its private random stream and
/// normalization statistics.
#[derive(Debug, Clone)]
pub struct RolloutWorker<E> {
    pub env: E,
    rng: ChaCha8Rng,
    norm: Normalizer,
    obs: Option<Vec<f64>>,
    episode_return: f64,
}

struct Segment {
    obs: Vec<f64>,
    actions: Vec<ActionVector>,
    logp: Vec<f64>,
    rewards: Vec<f64>,
    raw_rewards: Vec<f64>,
    values: Vec<f64>,
    dones: Vec<bool>,
    bootstrap: f64,
    local: NormStats,
    finished: Vec<f64>,
}

impl<E: Environment> RolloutWorker<E> {
    /// `stream` separates the random streams of actors sharing a seed.
    pub fn new(env: E, seed: u64, stream: u64, gamma: f64, obs_clip: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let dim = env.obs_len();
        RolloutWorker {
            env,
            rng,
            norm: Normalizer::new(NormStats::new(dim), gamma, obs_clip),
            obs: None,
            episode_return: 0.0,
        }
    }

    fn collect(&mut self, params: &PolicyParams, base: &NormStats, steps: usize) -> Result<Segment> {
        self.norm.rebase(base.clone());
        let dim = self.env.obs_len();
        let mut seg = Segment {
            obs: Vec::with_capacity(steps * dim),
            actions: Vec::with_capacity(steps),
            logp: Vec::with_capacity(steps),
            rewards: Vec::with_capacity(steps),
            raw_rewards: Vec::with_capacity(steps),
            values: Vec::with_capacity(steps),
            dones: Vec::with_capacity(steps),
            bootstrap: 0.0,
            local: NormStats::new(dim),
            finished: Vec::new(),
        };
        for _ in 0..steps {
            let raw = match self.obs.take() {
                Some(o) => o,
                None => {
                    self.norm.reset_return();
                    self.episode_return = 0.0;
                    self.env.reset_random(&mut self.rng)?
                }
            };
            let x = self.norm.obs(&raw);
            let out = params.forward(&x)?;
            let (action, lp) = sample_and_logprob(&out.dist, &mut self.rng);
            let (next, r, done) = self.env.step_action(&action)?;
            let rn = self.norm.reward(r, done);
            self.episode_return += r;
            seg.obs.extend_from_slice(&x);
            seg.actions.push(action);
            seg.logp.push(lp);
            seg.rewards.push(rn);
            seg.raw_rewards.push(r);
            seg.values.push(out.value);
            seg.dones.push(done);
            if done {
                seg.finished.push(self.episode_return);
            } else {
                self.obs = Some(next);
            }
        }
        if let Some(next) = &self.obs {
            let x = self.norm.current().normalize_obs(next, self.norm_clip());
            seg.bootstrap = params.forward(&x)?.value;
        }
        seg.local = self.norm.local().clone();
        Ok(seg)
    }

    fn norm_clip(&self) -> f64 {
        self.norm.clip()
    }
}

/// Steps every actor `steps_per_actor` times with actions sampled from
/// `params`, resetting finished episodes. Each actor normalizes against
/// `stats` plus its own new samples; the merged statistics are returned
/// alongside the batch and the raw returns of completed episodes. The
/// result does not depend on `parallel`.
pub fn collect_rollouts<E: Environment + Send>(
    params: &PolicyParams,
    workers: &mut [RolloutWorker<E>],
    steps_per_actor: usize,
    stats: &NormStats,
    cfg: &PpoConfig,
    parallel: bool,
) -> Result<(RolloutBatch, NormStats, Vec<f64>)> {
    let segments: Vec<Result<Segment>> = if parallel {
        workers
            .par_iter_mut()
            .map(|w| w.collect(params, stats, steps_per_actor))
            .collect()
    } else {
        workers
            .iter_mut()
            .map(|w| w.collect(params, stats, steps_per_actor))
            .collect()
    };
    let segments = segments.into_iter().collect::<Result<Vec<_>>>()?;

    let dim = params.obs_len();
    let n: usize = segments.iter().map(|s| s.actions.len()).sum();
    let mut merged = stats.clone();
    let mut obs = Vec::with_capacity(n * dim);
    let mut batch = RolloutBatch {
        obs: Array2::zeros((0, dim)),
        actions: Vec::with_capacity(n),
        logp: Vec::with_capacity(n),
        rewards: Vec::with_capacity(n),
        raw_rewards: Vec::with_capacity(n),
        values: Vec::with_capacity(n),
        dones: Vec::with_capacity(n),
        advantages: Vec::with_capacity(n),
        returns: Vec::with_capacity(n),
        actor_lens: Vec::with_capacity(segments.len()),
    };
    let mut finished = Vec::new();
    for seg in segments {
        let (adv, ret) = gae(&seg.rewards, &seg.values, seg.bootstrap, &seg.dones, cfg.gamma, cfg.lambda)?;
        merged = merged.merge(&seg.local);
        batch.actor_lens.push(seg.actions.len());
        obs.extend(seg.obs);
        batch.actions.extend(seg.actions);
        batch.logp.extend(seg.logp);
        batch.rewards.extend(seg.rewards);
        batch.raw_rewards.extend(seg.raw_rewards);
        batch.values.extend(seg.values);
        batch.dones.extend(seg.dones);
        batch.advantages.extend(adv);
        batch.returns.extend(ret);
        finished.extend(seg.finished);
    }
    batch.obs = Array2::from_shape_vec((n, dim), obs).expect("rows have the observation length");
    standardize(&mut batch.advantages);
    Ok((batch, merged, finished))
}

fn standardize(v: &mut [f64]) {
    if v.len() < 2 {
        return;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    let std = std.max(1e-8);
    v.iter_mut().for_each(|x| *x = (*x - mean) / std);
}
