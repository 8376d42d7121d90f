//! Clipped-surrogate loss, its analytic gradient, and the Adam optimizer.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{sigmoid, DistParams, PolicyParams, N_INT_CHOICES};
use super::{PpoConfig, RolloutBatch};
use crate::env::ActionVector;
use crate::error::{Error, Result};

/// Slice of a batch used for one gradient step.
pub struct Minibatch<'a> {
    pub obs: ArrayView2<'a, f64>,
    pub actions: &'a [ActionVector],
    pub old_logp: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub total: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Mean loss over the minibatch and, optionally, its gradient.
pub fn loss_and_grad(
    params: &PolicyParams,
    mb: &Minibatch,
    cfg: &PpoConfig,
    want_grad: bool,
) -> (LossStats, Option<PolicyParams>) {
    let n = mb.obs.nrows();
    let nf = n as f64;
    let (logits, actor_cache) = params.actor.forward_cached(mb.obs);
    let (values, critic_cache) = params.critic.forward_cached(mb.obs);
    let k = logits.ncols();
    let mut d_logits = Array2::zeros((n, k));
    let mut d_values = Array2::zeros((n, 1));
    let mut s = LossStats::default();
    for i in 0..n {
        let row = logits.row(i);
        let dist = DistParams::from_logits(row.as_slice().expect("standard layout"));
        let action = &mb.actions[i];
        let adv = mb.advantages[i];
        let log_ratio = dist.log_prob(action) - mb.old_logp[i];
        let ratio = log_ratio.exp();
        let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        let (surr1, surr2) = (ratio * adv, clipped * adv);
        s.policy_loss -= surr1.min(surr2);
        if (ratio - 1.0).abs() > cfg.clip_eps {
            s.clip_fraction += 1.0;
        }
        s.approx_kl += (ratio - 1.0) - log_ratio;
        let h = dist.entropy();
        s.entropy += h;
        let v = values[[i, 0]];
        let verr = v - mb.returns[i];
        s.value_loss += verr * verr;
        if !want_grad {
            continue;
        }
        // d(-surrogate)/d logp; zero when the clipped branch is active.
        let c = if surr1 <= surr2 { -adv * ratio } else { 0.0 };
        let probs = dist.int_probs();
        let mut h_int = 0.0;
        for (&p, &lp) in probs.iter().zip(&dist.int_log_probs) {
            if p > 0.0 {
                h_int -= p * lp;
            }
        }
        for j in 0..N_INT_CHOICES {
            let onehot = if action.intersection as usize == j + 1 { 1.0 } else { 0.0 };
            let dlogp = onehot - probs[j];
            let dh = -probs[j] * (dist.int_log_probs[j] + h_int);
            d_logits[[i, j]] = (c * dlogp - cfg.entropy_coef * dh) / nf;
        }
        for (m, (&y, &b)) in dist.mb_logits.iter().zip(&action.midblock).enumerate() {
            let mu = sigmoid(y);
            let dlogp = if b { 1.0 - mu } else { -mu };
            let dh = -y * mu * (1.0 - mu);
            d_logits[[i, N_INT_CHOICES + m]] = (c * dlogp - cfg.entropy_coef * dh) / nf;
        }
        d_values[[i, 0]] = 2.0 * cfg.vf_coef * verr / nf;
    }
    s.policy_loss /= nf;
    s.value_loss /= nf;
    s.entropy /= nf;
    s.clip_fraction /= nf;
    s.approx_kl /= nf;
    s.total = s.policy_loss + cfg.vf_coef * s.value_loss - cfg.entropy_coef * s.entropy;
    let grads = want_grad.then(|| PolicyParams {
        actor: params.actor.backward(&actor_cache, d_logits),
        critic: params.critic.backward(&critic_cache, d_values),
    });
    (s, grads)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &PolicyParams, lr: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.params().iter().map(|s| vec![0.0; s.len()]).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut PolicyParams, grads: &PolicyParams) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .params_mut()
            .into_iter()
            .zip(grads.params())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

pub fn grad_norm(grads: &PolicyParams) -> f64 {
    grads
        .params()
        .iter()
        .flat_map(|s| s.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

fn scale_grads(grads: &mut PolicyParams, factor: f64) {
    for s in grads.params_mut() {
        s.iter_mut().for_each(|g| *g *= factor);
    }
}

/// Stats averaged over the minibatches of one epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub epochs: Vec<LossStats>,
    pub grad_steps: usize,
}

impl UpdateStats {
    pub fn first(&self) -> LossStats {
        self.epochs.first().copied().unwrap_or_default()
    }

    pub fn last(&self) -> LossStats {
        self.epochs.last().copied().unwrap_or_default()
    }
}

/// Runs `k_epochs` passes of shuffled minibatch descent over the batch.
/// The optimizer state is only advanced when the whole update succeeds.
pub fn ppo_update<R: Rng + ?Sized>(
    params: &PolicyParams,
    opt: &mut Adam,
    batch: &RolloutBatch,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<(PolicyParams, UpdateStats)> {
    batch.check()?;
    let n = batch.len();
    if n == 0 {
        return Err(Error::Length("empty rollout batch".into()));
    }
    let mut new = params.clone();
    let mut adam = opt.clone();
    let mut stats = UpdateStats::default();
    let n_mb = cfg.n_minibatches.clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.k_epochs {
        idx.shuffle(rng);
        let mut epoch = LossStats::default();
        for chunk in idx.chunks(n.div_ceil(n_mb)) {
            let obs = batch.obs.select(Axis(0), chunk);
            let actions: Vec<ActionVector> = chunk.iter().map(|&i| batch.actions[i].clone()).collect();
            let pick = |v: &[f64]| chunk.iter().map(|&i| v[i]).collect::<Vec<f64>>();
            let (old_logp, adv, ret) = (pick(&batch.logp), pick(&batch.advantages), pick(&batch.returns));
            let mb = Minibatch {
                obs: obs.view(),
                actions: &actions,
                old_logp: &old_logp,
                advantages: &adv,
                returns: &ret,
            };
            let (s, grads) = loss_and_grad(&new, &mb, cfg, true);
            let mut grads = grads.expect("requested");
            let norm = grad_norm(&grads);
            if !s.total.is_finite() || !norm.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss {} / gradient norm {} at grad step {}",
                    s.total, norm, stats.grad_steps
                )));
            }
            if let Some(max) = cfg.max_grad_norm {
                if norm > max {
                    scale_grads(&mut grads, max / norm);
                }
            }
            adam.step(&mut new, &grads);
            stats.grad_steps += 1;
            let w = chunk.len() as f64 / n as f64;
            epoch.total += w * s.total;
            epoch.policy_loss += w * s.policy_loss;
            epoch.value_loss += w * s.value_loss;
            epoch.entropy += w * s.entropy;
            epoch.clip_fraction += w * s.clip_fraction;
            epoch.approx_kl += w * s.approx_kl;
        }
        stats.epochs.push(epoch);
    }
    if !new.is_finite() {
        return Err(Error::NonFinite("parameters became non-finite".into()));
    }
    *opt = adam;
    Ok((new, stats))
}
