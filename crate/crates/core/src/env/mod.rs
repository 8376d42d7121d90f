//! Reinforcement-learning environment around the corridor simulation.
//!
//! One action holds a phase request for every site over a fixed number of
//! simulation steps. Observations stack the per-step feature vectors of the
//! last action interval.

mod reward;
mod welford;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use reward::{
    compute_reward, RewardBreakdown, INT_APPROACHES, MB_APPROACHES, PED_SCALE, REWARD_FLOOR, VEH_SCALE,
};
pub use welford::{welford_update_and_normalize, Welford, WelfordVec, NORM_EPS};

use crate::demand::{generate_trips, DemandRates};
use crate::error::{Error, Result};
use crate::microsim::{Census, SimConfig, Simulation};
use crate::network::{CorridorNetwork, SiteKind};
use crate::signal::{
    count_switches, CorridorSignals, IntersectionPhase, MidBlockPhase, Phase, SiteSignal,
};

/// Intersection choice (1..=4) plus one flag per mid-block, `true` meaning
/// vehicles get the green.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionVector {
    pub intersection: u8,
    pub midblock: Vec<bool>,
}

impl ActionVector {
    pub fn new(intersection: u8, midblock: Vec<bool>) -> Result<Self> {
        IntersectionPhase::from_choice(intersection)?;
        Ok(ActionVector { intersection, midblock })
    }

    /// Per-site phase requests in site order.
    pub fn phases(&self, net: &CorridorNetwork) -> Result<Vec<Phase>> {
        if self.midblock.len() != net.n_midblocks() {
            return Err(Error::Length(format!(
                "action has {} mid-block flags, network has {} mid-blocks",
                self.midblock.len(),
                net.n_midblocks()
            )));
        }
        let int = IntersectionPhase::from_choice(self.intersection)?;
        let mut mb = self.midblock.iter();
        Ok(net
            .signals
            .iter()
            .map(|s| match s.kind {
                SiteKind::Intersection => Phase::Intersection(int),
                SiteKind::MidBlock => Phase::MidBlock(MidBlockPhase::from_vehicle_flag(
                    *mb.next().expect("length checked"),
                )),
            })
            .collect())
    }

    /// Inverse of [`ActionVector::phases`].
    pub fn from_phases(phases: &[Phase]) -> Self {
        let mut a = ActionVector {
            intersection: 1,
            midblock: Vec::new(),
        };
        for p in phases {
            match p {
                Phase::Intersection(i) => a.intersection = i.choice(),
                Phase::MidBlock(m) => a.midblock.push(*m == MidBlockPhase::VehicleFlow),
            }
        }
        a
    }

    /// One-hot intersection choice followed by the mid-block bits.
    pub fn encode(&self) -> Vec<f64> {
        let mut v = vec![0.0; 4];
        v[self.intersection as usize - 1] = 1.0;
        v.extend(self.midblock.iter().map(|&b| if b { 1.0 } else { 0.0 }));
        v
    }

    pub fn vehicle_greens(&self) -> usize {
        self.midblock.iter().filter(|&&b| b).count()
    }
}

/// Mean number of mid-block signals given to vehicles per action.
pub fn coordination_metric(actions: &[ActionVector]) -> f64 {
    if actions.is_empty() {
        return 0.0;
    }
    actions.iter().map(|a| a.vehicle_greens() as f64).sum::<f64>() / actions.len() as f64
}

/// Features per simulation step.
pub fn feature_dim(net: &CorridorNetwork) -> usize {
    4 + net.n_midblocks() + 5 * net.n_signals()
}

fn feature_row(action: &ActionVector, census: &Census) -> Vec<f64> {
    let mut row = action.encode();
    for v in &census.veh {
        row.extend(v.iter().map(|&c| c as f64));
    }
    for p in &census.ped {
        row.extend(p.iter().map(|&c| c as f64));
    }
    row
}

/// Stacked feature rows, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Observation {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub warmup_min: u64,
    pub warmup_max: u64,
    pub horizon_steps: u64,
    pub steps_per_action: u64,
    /// Training demand scales are drawn uniformly from this range.
    pub scale_min: f64,
    pub scale_max: f64,
    /// Rates at scale 1; defaults depend on the network.
    pub rates: Option<DemandRates>,
    pub sim: Option<SimConfig>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            warmup_min: 100,
            warmup_max: 250,
            horizon_steps: 600,
            steps_per_action: 10,
            scale_min: 1.0,
            scale_max: 2.25,
            rates: None,
            sim: None,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_action == 0 {
            return Err(Error::config("steps_per_action", "must be > 0"));
        }
        if self.horizon_steps == 0 || !self.horizon_steps.is_multiple_of(self.steps_per_action) {
            return Err(Error::config(
                "horizon_steps",
                "must be a positive multiple of steps_per_action",
            ));
        }
        if self.warmup_min < self.steps_per_action || self.warmup_max < self.warmup_min {
            return Err(Error::config(
                "warmup_min",
                "need steps_per_action <= warmup_min <= warmup_max",
            ));
        }
        if !(self.scale_min > 0.0 && self.scale_max >= self.scale_min && self.scale_max.is_finite()) {
            return Err(Error::config("scale_min", "need 0 < scale_min <= scale_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub warmup_steps: u64,
    pub horizon_steps: u64,
    pub demand_scale: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub action_index: u64,
    pub reward: RewardBreakdown,
    /// Phase changes across all sites during the interval.
    pub switches: usize,
    pub new_conflicts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    /// Clipped EI-MWAQ reward, not normalized.
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Minimal interface the trainer needs from an environment.
pub trait Environment {
    fn obs_len(&self) -> usize;
    fn n_midblocks(&self) -> usize;
    /// Starts a fresh training episode with randomized conditions.
    fn reset_random(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;
    /// Returns the raw observation, raw reward and done flag.
    fn step_action(&mut self, action: &ActionVector) -> Result<(Vec<f64>, f64, bool)>;
    /// Simulation steps covered by one action.
    fn sim_steps_per_action(&self) -> u64 {
        1
    }
}

#[derive(Debug, Clone)]
pub struct TrafficEnv {
    net: CorridorNetwork,
    cfg: EnvConfig,
    rates: DemandRates,
    sim_cfg: SimConfig,
    sim: Option<Simulation>,
    episode: Option<EpisodeConfig>,
    actions_taken: u64,
    rows: Vec<Vec<f64>>,
    phase_trace: Vec<Vec<Phase>>,
    last_phases: Vec<Phase>,
    light_trace: Option<Vec<Vec<SiteSignal>>>,
}

impl TrafficEnv {
    pub fn new(net: &CorridorNetwork, cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let rates = cfg.rates.clone().unwrap_or_else(|| DemandRates::for_network(net));
        rates.validate()?;
        let sim_cfg = cfg.sim.clone().unwrap_or_else(|| SimConfig::for_network(net));
        Ok(TrafficEnv {
            net: net.clone(),
            cfg,
            rates,
            sim_cfg,
            sim: None,
            episode: None,
            actions_taken: 0,
            rows: Vec::new(),
            phase_trace: Vec::new(),
            last_phases: Vec::new(),
            light_trace: None,
        })
    }

    pub fn network(&self) -> &CorridorNetwork {
        &self.net
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn feature_dim(&self) -> usize {
        feature_dim(&self.net)
    }

    pub fn stack(&self) -> usize {
        self.cfg.steps_per_action as usize
    }

    pub fn simulation(&self) -> Option<&Simulation> {
        self.sim.as_ref()
    }

    pub fn episode(&self) -> Option<&EpisodeConfig> {
        self.episode.as_ref()
    }

    /// Engaged phases of every site for each step since the warmup ended.
    pub fn phase_trace(&self) -> &[Vec<Phase>] {
        &self.phase_trace
    }

    /// Keeps the lights of every post-warmup step when enabled.
    pub fn record_lights(&mut self, on: bool) {
        self.light_trace = on.then(Vec::new);
    }

    pub fn light_trace(&self) -> &[Vec<SiteSignal>] {
        self.light_trace.as_deref().unwrap_or(&[])
    }

    pub fn is_done(&self) -> bool {
        self.actions_taken * self.cfg.steps_per_action >= self.horizon()
    }

    fn horizon(&self) -> u64 {
        self.episode.map_or(self.cfg.horizon_steps, |e| e.horizon_steps)
    }

    /// Draws warmup length, demand scale and demand seed for a training episode.
    pub fn sample_episode(&self, rng: &mut ChaCha8Rng) -> EpisodeConfig {
        let warmup_steps = rng.random_range(self.cfg.warmup_min..=self.cfg.warmup_max);
        let demand_scale = if self.cfg.scale_max > self.cfg.scale_min {
            rng.random_range(self.cfg.scale_min..=self.cfg.scale_max)
        } else {
            self.cfg.scale_min
        };
        EpisodeConfig {
            warmup_steps,
            horizon_steps: self.cfg.horizon_steps,
            demand_scale,
            seed: rng.random(),
        }
    }

    /// Starts an episode with a warmup drawn from `seed` at the given scale.
    pub fn reset(&mut self, seed: u64, demand_scale: f64) -> Result<Observation> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ep = self.sample_episode(&mut rng);
        ep.demand_scale = demand_scale;
        self.reset_episode(ep)
    }

    pub fn reset_episode(&mut self, ep: EpisodeConfig) -> Result<Observation> {
        if !(ep.demand_scale > 0.0) {
            return Err(Error::Range(format!("demand scale must be > 0, got {}", ep.demand_scale)));
        }
        if ep.warmup_steps < self.cfg.steps_per_action {
            return Err(Error::Range(format!(
                "warmup of {} steps is shorter than one action interval",
                ep.warmup_steps
            )));
        }
        if ep.horizon_steps == 0 || !ep.horizon_steps.is_multiple_of(self.cfg.steps_per_action) {
            return Err(Error::Range("horizon must be a positive multiple of the action interval".into()));
        }
        let span = (ep.warmup_steps + ep.horizon_steps) as f64;
        let demand = generate_trips(&self.net, &self.rates, ep.demand_scale, span, ep.seed)?;
        let mut sim = Simulation::new(
            &self.net,
            demand,
            CorridorSignals::FixedTime { dark_midblocks: false },
            self.sim_cfg.clone(),
        )?;
        self.rows.clear();
        let keep = self.cfg.steps_per_action;
        for t in 0..ep.warmup_steps {
            sim.step()?;
            if t + keep >= ep.warmup_steps {
                let action = ActionVector::from_phases(sim.phases());
                self.rows.push(feature_row(&action, &sim.census()));
            }
        }
        self.last_phases = sim.phases().to_vec();
        sim.signals = CorridorSignals::handover(&self.net, sim.time());
        sim.begin_horizon();
        self.sim = Some(sim);
        self.episode = Some(ep);
        self.actions_taken = 0;
        self.phase_trace.clear();
        if let Some(l) = &mut self.light_trace {
            l.clear();
        }
        Ok(self.observation())
    }

    fn observation(&self) -> Observation {
        Observation {
            rows: self.rows.len(),
            cols: self.feature_dim(),
            data: self.rows.concat(),
        }
    }

    /// Applies one action for a full interval.
    pub fn step(&mut self, action: &ActionVector) -> Result<StepOutcome> {
        if self.sim.is_none() || self.is_done() {
            return Err(Error::EpisodeDone);
        }
        let phases = action.phases(&self.net)?;
        let sim = self.sim.as_mut().expect("checked above");
        sim.signals.request(&phases)?;
        self.rows.clear();
        let mut new_conflicts = 0;
        let mut census = None;
        let mut trace = Vec::with_capacity(self.cfg.steps_per_action as usize + 1);
        trace.push(std::mem::take(&mut self.last_phases));
        for _ in 0..self.cfg.steps_per_action {
            new_conflicts += sim.step()?;
            let c = sim.census();
            self.rows.push(feature_row(action, &c));
            trace.push(sim.phases().to_vec());
            if let Some(l) = &mut self.light_trace {
                l.push(sim.lights().to_vec());
            }
            census = Some(c);
        }
        let switches = count_switches(&trace);
        self.last_phases = trace.pop().expect("non-empty");
        self.phase_trace.extend(trace.into_iter().skip(1));
        self.phase_trace.push(self.last_phases.clone());
        let census = census.expect("at least one step");
        let reward = compute_reward(&self.net, &census.wait);
        self.actions_taken += 1;
        let info = StepInfo {
            action_index: self.actions_taken,
            reward,
            switches,
            new_conflicts,
        };
        Ok(StepOutcome {
            obs: self.observation(),
            reward: reward.total,
            done: self.is_done(),
            info,
        })
    }
}

impl Environment for TrafficEnv {
    fn obs_len(&self) -> usize {
        self.stack() * self.feature_dim()
    }

    fn n_midblocks(&self) -> usize {
        self.net.n_midblocks()
    }

    fn reset_random(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let ep = self.sample_episode(rng);
        Ok(self.reset_episode(ep)?.data)
    }

    fn step_action(&mut self, action: &ActionVector) -> Result<(Vec<f64>, f64, bool)> {
        let out = self.step(action)?;
        Ok((out.obs.data, out.reward, out.done))
    }

    fn sim_steps_per_action(&self) -> u64 {
        self.cfg.steps_per_action
    }
}

/// Observation and return statistics used for normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub obs: WelfordVec,
    /// Statistics of the discounted running return.
    pub ret: Welford,
}

impl NormStats {
    pub fn new(obs_len: usize) -> Self {
        NormStats {
            obs: WelfordVec::new(obs_len),
            ret: Welford::default(),
        }
    }

    pub fn merge(&self, other: &NormStats) -> NormStats {
        NormStats {
            obs: self.obs.merge(&other.obs),
            ret: self.ret.merge(&other.ret),
        }
    }

    /// Normalizes an observation without updating the statistics.
    pub fn normalize_obs(&self, raw: &[f64], clip: f64) -> Vec<f64> {
        let mut x = raw.to_vec();
        self.obs.normalize(&mut x, clip);
        x
    }
}

/// Update-then-normalize wrapper for one actor. Statistics gathered since
/// the last [`Normalizer::rebase`] are kept apart so several actors can be
/// merged deterministically.
#[derive(Debug, Clone)]
pub struct Normalizer {
    base: NormStats,
    local: NormStats,
    running_return: f64,
    gamma: f64,
    clip: f64,
}

impl Normalizer {
    pub fn new(base: NormStats, gamma: f64, clip: f64) -> Self {
        let dim = base.obs.dim();
        Normalizer {
            base,
            local: NormStats::new(dim),
            running_return: 0.0,
            gamma,
            clip,
        }
    }

    pub fn rebase(&mut self, base: NormStats) {
        self.local = NormStats::new(base.obs.dim());
        self.base = base;
    }

    pub fn local(&self) -> &NormStats {
        &self.local
    }

    pub fn current(&self) -> NormStats {
        self.base.merge(&self.local)
    }

    pub fn obs(&mut self, raw: &[f64]) -> Vec<f64> {
        self.local.obs.update(raw);
        let mut x = raw.to_vec();
        self.base.obs.merge(&self.local.obs).normalize(&mut x, self.clip);
        x
    }

    /// Scales a reward by the running standard deviation of the discounted
    /// return (no mean subtraction).
    pub fn reward(&mut self, r: f64, done: bool) -> f64 {
        self.running_return = self.running_return * self.gamma + r;
        self.local.ret.update(self.running_return);
        if done {
            self.running_return = 0.0;
        }
        let stats = self.base.ret.merge(&self.local.ret);
        if stats.count < 2 {
            0.0
        } else {
            r / stats.std().max(NORM_EPS)
        }
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub fn reset_return(&mut self) {
        self.running_return = 0.0;
    }
}
