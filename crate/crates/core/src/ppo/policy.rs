//! Actor-critic with a categorical intersection head and independent
//! Bernoulli mid-block heads.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::mlp::{Activation, Mlp};
use crate::env::ActionVector;
use crate::error::{Error, Result};

pub const N_INT_CHOICES: usize = 4;

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub critic: Mlp,
}

/// Distribution parameters for one observation, kept in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct DistParams {
    pub int_log_probs: [f64; N_INT_CHOICES],
    pub mb_logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub int_probs: [f64; N_INT_CHOICES],
    pub mb_probs: Vec<f64>,
    pub value: f64,
    pub dist: DistParams,
}

impl DistParams {
    pub fn from_logits(logits: &[f64]) -> Self {
        let lp = log_softmax(&logits[..N_INT_CHOICES]);
        DistParams {
            int_log_probs: [lp[0], lp[1], lp[2], lp[3]],
            mb_logits: logits[N_INT_CHOICES..].to_vec(),
        }
    }

    /// Builds a distribution from explicit probabilities; 0 and 1 are allowed.
    pub fn from_probs(int_probs: [f64; N_INT_CHOICES], mb_probs: &[f64]) -> Self {
        DistParams {
            int_log_probs: int_probs.map(f64::ln),
            mb_logits: mb_probs.iter().map(|&m| m.ln() - (-m).ln_1p()).collect(),
        }
    }

    pub fn int_probs(&self) -> [f64; N_INT_CHOICES] {
        self.int_log_probs.map(f64::exp)
    }

    pub fn mb_probs(&self) -> Vec<f64> {
        self.mb_logits.iter().map(|&y| sigmoid(y)).collect()
    }

    pub fn log_prob(&self, action: &ActionVector) -> f64 {
        let mut lp = self.int_log_probs[action.intersection as usize - 1];
        for (&y, &b) in self.mb_logits.iter().zip(&action.midblock) {
            lp -= if b { softplus(-y) } else { softplus(y) };
        }
        lp
    }

    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for &lp in &self.int_log_probs {
            if lp.is_finite() {
                h -= lp.exp() * lp;
            }
        }
        for &y in &self.mb_logits {
            if y.is_finite() {
                // H = softplus(y) - y * sigmoid(y)
                h += softplus(y) - y * sigmoid(y);
            }
        }
        h
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ActionVector {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut choice = N_INT_CHOICES;
        for (i, p) in self.int_probs().iter().enumerate() {
            acc += p;
            if u < acc {
                choice = i + 1;
                break;
            }
        }
        // Guard against rounding leaving `u` above the final cumulative sum.
        if choice == N_INT_CHOICES && self.int_log_probs[N_INT_CHOICES - 1] == f64::NEG_INFINITY {
            choice = (0..N_INT_CHOICES)
                .rev()
                .find(|&i| self.int_log_probs[i].is_finite())
                .map_or(1, |i| i + 1);
        }
        let midblock = self
            .mb_logits
            .iter()
            .map(|&y| rng.random::<f64>() < sigmoid(y))
            .collect();
        ActionVector {
            intersection: choice as u8,
            midblock,
        }
    }

    /// Most likely action.
    pub fn mode(&self) -> ActionVector {
        let mut best = 0;
        for i in 1..N_INT_CHOICES {
            if self.int_log_probs[i] > self.int_log_probs[best] {
                best = i;
            }
        }
        ActionVector {
            intersection: best as u8 + 1,
            midblock: self.mb_logits.iter().map(|&y| y > 0.0).collect(),
        }
    }
}

/// Draws an action and returns it with its joint log-probability.
pub fn sample_and_logprob<R: Rng + ?Sized>(dist: &DistParams, rng: &mut R) -> (ActionVector, f64) {
    let a = dist.sample(rng);
    let lp = dist.log_prob(&a);
    (a, lp)
}

impl PolicyParams {
    pub fn new<R: Rng + ?Sized>(
        obs_len: usize,
        n_midblocks: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let gain = 2f64.sqrt();
        let mut sizes = vec![obs_len];
        sizes.extend_from_slice(hidden);
        let mut actor_sizes = sizes.clone();
        actor_sizes.push(N_INT_CHOICES + n_midblocks);
        sizes.push(1);
        PolicyParams {
            actor: Mlp::new(&actor_sizes, activation, gain, 0.01, rng),
            critic: Mlp::new(&sizes, activation, gain, 1.0, rng),
        }
    }

    pub fn zeros(obs_len: usize, n_midblocks: usize, hidden: &[usize], activation: Activation) -> Self {
        let mut sizes = vec![obs_len];
        sizes.extend_from_slice(hidden);
        let mut actor_sizes = sizes.clone();
        actor_sizes.push(N_INT_CHOICES + n_midblocks);
        sizes.push(1);
        PolicyParams {
            actor: Mlp::zeros(&actor_sizes, activation),
            critic: Mlp::zeros(&sizes, activation),
        }
    }

    pub fn obs_len(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn n_midblocks(&self) -> usize {
        self.actor.output_dim() - N_INT_CHOICES
    }

    pub fn hidden(&self) -> Vec<usize> {
        let s = self.actor.sizes();
        s[1..s.len() - 1].to_vec()
    }

    pub fn n_params(&self) -> usize {
        self.actor.n_params() + self.critic.n_params()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Actor slices followed by critic slices.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut p = self.actor.params();
        p.extend(self.critic.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.actor.params_mut();
        p.extend(self.critic.params_mut());
        p
    }

    pub fn forward(&self, obs: &[f64]) -> Result<PolicyOutput> {
        if obs.len() != self.obs_len() {
            return Err(Error::Shape {
                expected: self.obs_len(),
                actual: obs.len(),
            });
        }
        let x = ArrayView2::from_shape((1, obs.len()), obs).expect("contiguous slice");
        let (logits, values) = self.forward_batch(x);
        let dist = DistParams::from_logits(logits.row(0).as_slice().expect("standard layout"));
        Ok(PolicyOutput {
            int_probs: dist.int_probs(),
            mb_probs: dist.mb_probs(),
            value: values[0],
            dist,
        })
    }

    /// Raw head logits and values for a batch of observations.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> (Array2<f64>, Vec<f64>) {
        let logits = self.actor.forward(x);
        let values = self.critic.forward(x).column(0).to_vec();
        (logits, values)
    }
}
