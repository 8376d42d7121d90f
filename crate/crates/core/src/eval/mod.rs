//! Controller benchmarks, metric aggregation and comparison tables.

mod report;

pub use report::{
    compare, improvement_pct, read_runs_csv, summarize, write_comparison_csv, write_runs_csv, write_summary_csv,
    CellSummary, Comparison, ComparisonRow, MeanStd, COMPARED_METRICS,
};

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::env::coordination_metric;
use crate::demand::{generate_trips, DemandRates};
use crate::env::{ActionVector, EnvConfig, EpisodeConfig, NormStats, TrafficEnv};
use crate::error::{Error, Result};
use crate::microsim::{HorizonTotals, SimConfig, Simulation};
use crate::network::{CorridorNetwork, SiteKind};
use crate::ppo::{load_checkpoint, Checkpoint, PolicyParams};
use crate::signal::{yellow_rule_holds, ControllerKind, CorridorSignals, Light, Phase, SiteSignal};

/// A trained policy with frozen normalization statistics.
#[derive(Debug, Clone)]
pub struct RlPolicy {
    pub params: PolicyParams,
    pub norm: NormStats,
    pub obs_clip: f64,
    /// Take the most likely action instead of sampling.
    pub greedy: bool,
}

impl RlPolicy {
    pub fn from_checkpoint(ck: &Checkpoint) -> Self {
        RlPolicy {
            params: ck.params.clone(),
            norm: ck.norm.clone(),
            obs_clip: ck.meta.ppo.obs_clip,
            greedy: true,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::from_checkpoint(&load_checkpoint(path)?))
    }

    /// Action for a raw observation. Sampling uses `rng` only when not greedy.
    pub fn act(&self, raw_obs: &[f64], rng: &mut impl rand::Rng) -> Result<ActionVector> {
        let x = self.norm.normalize_obs(raw_obs, self.obs_clip);
        let out = self.params.forward(&x)?;
        Ok(if self.greedy {
            out.dist.mode()
        } else {
            out.dist.sample(rng)
        })
    }
}

#[derive(Debug, Clone)]
pub enum Controller {
    Signalized,
    Unsignalized,
    Rl(Arc<RlPolicy>),
}

impl Controller {
    pub fn kind(&self) -> ControllerKind {
        match self {
            Controller::Signalized => ControllerKind::Fixed,
            Controller::Unsignalized => ControllerKind::Unsignalized,
            Controller::Rl(_) => ControllerKind::Rl,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkPlan {
    pub controllers: Vec<Controller>,
    pub scales: Vec<f64>,
    pub runs_per_cell: usize,
    /// Run `r` of every cell uses demand seed `seed + r`.
    pub seed: u64,
    pub warmup_steps: u64,
    pub horizon_steps: u64,
    pub steps_per_action: u64,
    pub rates: Option<DemandRates>,
    pub sim: Option<SimConfig>,
    pub parallel: bool,
}

/// 0.5, 0.75, ..., 2.75.
pub fn default_scales() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.25 * i as f64).collect()
}

impl Default for BenchmarkPlan {
    fn default() -> Self {
        BenchmarkPlan {
            controllers: vec![Controller::Signalized, Controller::Unsignalized],
            scales: default_scales(),
            runs_per_cell: 10,
            seed: 0,
            warmup_steps: 192,
            horizon_steps: 600,
            steps_per_action: 10,
            rates: None,
            sim: None,
            parallel: true,
        }
    }
}

impl BenchmarkPlan {
    pub fn validate(&self) -> Result<()> {
        if self.runs_per_cell == 0 {
            return Err(Error::config("runs_per_cell", "must be >= 1"));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::config("scales", "need at least one positive finite scale"));
        }
        if self.controllers.is_empty() {
            return Err(Error::config("controllers", "need at least one controller"));
        }
        if self.steps_per_action == 0
            || self.horizon_steps == 0
            || !self.horizon_steps.is_multiple_of(self.steps_per_action)
            || self.warmup_steps < self.steps_per_action
        {
            return Err(Error::config(
                "horizon_steps",
                "horizon must be a positive multiple of steps_per_action and warmup at least one interval",
            ));
        }
        Ok(())
    }
}

/// Safety counters over one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyAudit {
    /// Steps where some lit site showed green to two conflicting movements.
    pub conflicting_green_steps: u64,
    /// Conflict events at sites that were lit when they occurred.
    pub signalized_conflicts: u64,
    /// Movements whose green-to-red changes skipped the yellow interval.
    pub yellow_violations: u64,
}

impl SafetyAudit {
    pub fn is_clean(&self) -> bool {
        *self == SafetyAudit::default()
    }
}

/// Metrics of one (controller, scale, seed) run, collected after warmup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub controller: ControllerKind,
    pub scale: f64,
    pub run: usize,
    pub seed: u64,
    pub ped_count: u64,
    pub veh_count: u64,
    pub avg_wait_ped_s: f64,
    pub avg_wait_veh_s: f64,
    pub avg_wait_combined_s: f64,
    pub total_wait_ped_hr: f64,
    pub total_wait_veh_hr: f64,
    pub conflicts: u64,
    pub switches: u64,
    pub avg_simultaneous_mb_green: f64,
    pub conflicting_green_steps: u64,
    pub signalized_conflicts: u64,
    pub yellow_violations: u64,
}

impl RunReport {
    fn new(
        controller: ControllerKind,
        scale: f64,
        run: usize,
        seed: u64,
        totals: &HorizonTotals,
        switches: u64,
        coordination: f64,
        audit: SafetyAudit,
    ) -> Self {
        RunReport {
            controller,
            scale,
            run,
            seed,
            ped_count: totals.ped_count,
            veh_count: totals.veh_count,
            avg_wait_ped_s: totals.avg_ped_wait_s(),
            avg_wait_veh_s: totals.avg_veh_wait_s(),
            avg_wait_combined_s: totals.avg_combined_wait_s(),
            total_wait_ped_hr: totals.ped_wait_s / 3600.0,
            total_wait_veh_hr: totals.veh_wait_s / 3600.0,
            conflicts: totals.conflicts,
            switches,
            avg_simultaneous_mb_green: coordination,
            conflicting_green_steps: audit.conflicting_green_steps,
            signalized_conflicts: audit.signalized_conflicts,
            yellow_violations: audit.yellow_violations,
        }
    }

    pub fn audit(&self) -> SafetyAudit {
        SafetyAudit {
            conflicting_green_steps: self.conflicting_green_steps,
            signalized_conflicts: self.signalized_conflicts,
            yellow_violations: self.yellow_violations,
        }
    }
}

/// Per-step record kept while auditing a run.
struct Recorder {
    lit: Vec<bool>,
    phases: Vec<Vec<Phase>>,
    lights: Vec<Vec<SiteSignal>>,
    conflicting_green_steps: u64,
}

impl Recorder {
    fn new(lit: Vec<bool>, initial: Vec<Phase>) -> Self {
        Recorder {
            lit,
            phases: vec![initial],
            lights: Vec::new(),
            conflicting_green_steps: 0,
        }
    }

    fn push(&mut self, phases: &[Phase], lights: &[SiteSignal]) {
        if lights.iter().any(|s| matches!(s, SiteSignal::Lit(l) if l.has_conflict())) {
            self.conflicting_green_steps += 1;
        }
        self.phases.push(phases.to_vec());
        self.lights.push(lights.to_vec());
    }

    /// Engaged-phase changes at lit sites.
    fn switches(&self) -> u64 {
        self.phases
            .windows(2)
            .map(|w| {
                w[0].iter()
                    .zip(&w[1])
                    .zip(&self.lit)
                    .filter(|((a, b), lit)| **lit && a != b)
                    .count() as u64
            })
            .sum()
    }

    /// Count of yellow-rule violations over every lit movement.
    fn yellow_violations(&self, skip_pedestrian: bool) -> u64 {
        let n_sites = self.lit.len();
        let mut bad = 0;
        for site in 0..n_sites {
            let Some(SiteSignal::Lit(first)) = self.lights.first().map(|l| l[site]) else {
                continue;
            };
            for (m, _) in first.iter() {
                if skip_pedestrian && m.is_pedestrian() {
                    continue;
                }
                let seq: Vec<Light> = self
                    .lights
                    .iter()
                    .map(|l| match l[site] {
                        SiteSignal::Lit(x) => x.get(m),
                        SiteSignal::Dark => Light::Red,
                    })
                    .collect();
                if !yellow_rule_holds(&seq) {
                    bad += 1;
                }
            }
        }
        bad
    }
}

/// Mid-block vehicle greens implied by the engaged phases; dark sites count
/// as not green.
fn phases_to_action(phases: &[Phase], net: &CorridorNetwork, dark_midblocks: bool) -> ActionVector {
    let mut a = ActionVector::from_phases(phases);
    if dark_midblocks {
        a.midblock.iter_mut().for_each(|b| *b = false);
    }
    debug_assert_eq!(a.midblock.len(), net.n_midblocks());
    a
}

fn signalized_conflicts(sim: &Simulation, lit: &[bool], from_step: u64) -> u64 {
    sim.conflicts()
        .iter()
        .filter(|c| c.step >= from_step && lit[c.site])
        .count() as u64
}

/// Runs one episode of warmup plus horizon and collects its metrics.
pub fn run_episode(
    net: &CorridorNetwork,
    controller: &Controller,
    scale: f64,
    seed: u64,
    plan: &BenchmarkPlan,
) -> Result<RunReport> {
    let rates = plan.rates.clone().unwrap_or_else(|| DemandRates::for_network(net));
    let sim_cfg = plan.sim.clone().unwrap_or_else(|| SimConfig::for_network(net));
    match controller {
        Controller::Signalized | Controller::Unsignalized => {
            let dark = matches!(controller, Controller::Unsignalized);
            let span = (plan.warmup_steps + plan.horizon_steps) as f64;
            let demand = generate_trips(net, &rates, scale, span, seed)?;
            let mut sim = Simulation::new(net, demand, CorridorSignals::FixedTime { dark_midblocks: dark }, sim_cfg)?;
            sim.run(plan.warmup_steps)?;
            sim.begin_horizon();
            let lit: Vec<bool> = net
                .signals
                .iter()
                .map(|s| !(dark && s.kind == SiteKind::MidBlock))
                .collect();
            let mut rec = Recorder::new(lit.clone(), sim.phases().to_vec());
            let mut actions = Vec::new();
            for k in 0..plan.horizon_steps {
                sim.step()?;
                rec.push(sim.phases(), sim.lights());
                if k % plan.steps_per_action == 0 {
                    actions.push(phases_to_action(sim.phases(), net, dark));
                }
            }
            let audit = SafetyAudit {
                conflicting_green_steps: rec.conflicting_green_steps,
                signalized_conflicts: signalized_conflicts(&sim, &lit, plan.warmup_steps),
                // The fixed-time pedestrian clearance is shown as a long
                // flashing interval, so only vehicle movements are checked.
                yellow_violations: rec.yellow_violations(true),
            };
            Ok(RunReport::new(
                controller.kind(),
                scale,
                0,
                seed,
                &sim.horizon_totals(),
                rec.switches(),
                coordination_metric(&actions),
                audit,
            ))
        }
        Controller::Rl(policy) => {
            let cfg = EnvConfig {
                warmup_min: plan.warmup_steps,
                warmup_max: plan.warmup_steps,
                horizon_steps: plan.horizon_steps,
                steps_per_action: plan.steps_per_action,
                scale_min: scale,
                scale_max: scale,
                rates: Some(rates),
                sim: Some(sim_cfg),
            };
            let mut env = TrafficEnv::new(net, cfg)?;
            env.record_lights(true);
            let mut obs = env.reset_episode(EpisodeConfig {
                warmup_steps: plan.warmup_steps,
                horizon_steps: plan.horizon_steps,
                demand_scale: scale,
                seed,
            })?;
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let mut actions = Vec::new();
            let mut switches = 0;
            loop {
                let a = policy.act(obs.flat(), &mut rng)?;
                let out = env.step(&a)?;
                switches += out.info.switches as u64;
                actions.push(a);
                obs = out.obs;
                if out.done {
                    break;
                }
            }
            let lit = vec![true; net.n_signals()];
            let mut rec = Recorder::new(lit.clone(), Vec::new());
            for (p, l) in env.phase_trace().iter().zip(env.light_trace()) {
                rec.push(p, l);
            }
            let sim = env.simulation().expect("episode ran");
            let audit = SafetyAudit {
                conflicting_green_steps: rec.conflicting_green_steps,
                signalized_conflicts: signalized_conflicts(sim, &lit, plan.warmup_steps),
                yellow_violations: rec.yellow_violations(false),
            };
            Ok(RunReport::new(
                ControllerKind::Rl,
                scale,
                0,
                seed,
                &sim.horizon_totals(),
                switches,
                coordination_metric(&actions),
                audit,
            ))
        }
    }
}

/// Every (controller, scale, run) cell of the plan, in plan order.
pub fn run_benchmark(plan: &BenchmarkPlan, net: &CorridorNetwork) -> Result<Vec<RunReport>> {
    plan.validate()?;
    let cells: Vec<(&Controller, f64, usize)> = plan
        .controllers
        .iter()
        .flat_map(|c| {
            plan.scales
                .iter()
                .flat_map(move |&s| (0..plan.runs_per_cell).map(move |r| (c, s, r)))
        })
        .collect();
    let run = |&(c, s, r): &(&Controller, f64, usize)| {
        let seed = plan.seed.wrapping_add(r as u64);
        run_episode(net, c, s, seed, plan).map(|mut rep| {
            rep.run = r;
            rep
        })
    };
    let out: Vec<Result<RunReport>> = if plan.parallel {
        cells.par_iter().map(run).collect()
    } else {
        cells.iter().map(run).collect()
    };
    out.into_iter().collect()
}
