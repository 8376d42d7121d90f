//! Independent reference computations shared by the integration tests and
//! the acceptance harness.

#![allow(dead_code)]

use corridor_atsc::demand::{generate_trips, DemandRates};
use corridor_atsc::microsim::{SimConfig, Simulation, WaitSnapshot};
use corridor_atsc::network::{CorridorNetwork, SiteKind};
use corridor_atsc::signal::{
    movements, CorridorSignals, IntersectionPhase, Light, MidBlockPhase, Movement, Phase, SiteLights, SiteSignal,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const YELLOW: usize = 4;

/// Reward evaluated straight from the written definition, one term at a time.
pub fn reward_oracle(net: &CorridorNetwork, snap: &WaitSnapshot) -> (f64, f64) {
    let mut q_int_veh = 0.0;
    let mut q_int_ped = 0.0;
    let mut mb_veh = Vec::new();
    let mut mb_ped = Vec::new();
    for (i, site) in net.signals.iter().enumerate() {
        let s = &snap.sites[i];
        let nw_veh = f64::from(s.n_wait_veh) * s.max_wait_veh_s;
        let nw_ped = f64::from(s.n_wait_ped) * s.max_wait_ped_s;
        if site.kind == SiteKind::Intersection {
            q_int_veh = nw_veh / (8.0 * 4.0);
            q_int_ped = nw_ped / (10.0 * 4.0);
        } else {
            mb_veh.push(nw_veh / (8.0 * 2.0));
            mb_ped.push(nw_ped / 10.0);
        }
    }
    let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let raw = -(q_int_veh.exp() + q_int_ped.exp() + l2(&mb_veh).exp() + l2(&mb_ped).exp());
    (raw, raw.clamp(-1e5, 0.0))
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Explicit double sum of discounted TD residuals, restarting after a done.
pub fn gae_brute(r: &[f64], v: &[f64], boot: f64, done: &[bool], g: f64, l: f64) -> Vec<f64> {
    let n = r.len();
    let next_v = |t: usize| if done[t] { 0.0 } else if t + 1 < n { v[t + 1] } else { boot };
    let delta: Vec<f64> = (0..n).map(|t| r[t] + g * next_v(t) - v[t]).collect();
    (0..n)
        .map(|t| {
            let mut a = 0.0;
            let mut w = 1.0;
            for k in t..n {
                a += w * delta[k];
                if done[k] {
                    break;
                }
                w *= g * l;
            }
            a
        })
        .collect()
}

/// Mean and population variance in two passes.
pub fn two_pass(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Checks one movement's light sequence: every yellow run follows a green and
/// lasts exactly four steps, and green never turns red directly. A trailing
/// partial yellow run is allowed.
pub fn yellow_edges_ok(seq: &[Light]) -> bool {
    let mut i = 0;
    while i < seq.len() {
        if seq[i] == Light::Green && i + 1 < seq.len() && seq[i + 1] != Light::Green {
            if seq[i + 1] != Light::Yellow {
                return false;
            }
            let mut k = i + 1;
            while k < seq.len() && seq[k] == Light::Yellow {
                k += 1;
            }
            let run = k - i - 1;
            if k < seq.len() && run != YELLOW {
                return false;
            }
            if k == seq.len() && run > YELLOW {
                return false;
            }
            i = k;
        } else {
            if seq[i] == Light::Yellow && (i == 0 || !matches!(seq[i - 1], Light::Green | Light::Yellow)) {
                return false;
            }
            i += 1;
        }
    }
    true
}

/// True when a pedestrian movement and a vehicle movement crossing its
/// crosswalk are both not red.
pub fn conflicting_greens(lights: &SiteLights, kind: SiteKind) -> bool {
    let pairs: &[(Movement, Movement)] = match kind {
        SiteKind::Intersection => &[
            (Movement::PedArterial, Movement::ArterialThrough),
            (Movement::PedArterial, Movement::ArterialLeft),
            (Movement::PedCross, Movement::CrossThrough),
            (Movement::PedCross, Movement::CrossLeft),
        ],
        SiteKind::MidBlock => &[(Movement::MbPedestrian, Movement::MbVehicle)],
    };
    pairs
        .iter()
        .any(|&(p, v)| lights.get(p) != Light::Red && lights.get(v) != Light::Red)
}

pub fn random_phase(kind: SiteKind, rng: &mut impl Rng) -> Phase {
    match kind {
        SiteKind::Intersection => Phase::Intersection(IntersectionPhase::ALL[rng.random_range(0..4)]),
        SiteKind::MidBlock => Phase::MidBlock(MidBlockPhase::from_vehicle_flag(rng.random_bool(0.5))),
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct InterlockAudit {
    pub steps: u64,
    pub actions: u64,
    pub yellow_violations: u64,
    pub conflict_steps: u64,
}

/// Drives interlocked signals with `actions` random phase vectors, each held
/// for a random 1..=10 steps, and audits every emitted light sequence.
pub fn audit_random_interlock(net: &CorridorNetwork, actions: u64, seed: u64) -> InterlockAudit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut signals = CorridorSignals::handover(net, rng.random_range(0..10_000));
    let mut seqs: Vec<Vec<Vec<Light>>> = net
        .signals
        .iter()
        .map(|s| vec![Vec::new(); movements(s.kind).len()])
        .collect();
    let mut audit = InterlockAudit::default();
    let mut t = 0;
    for _ in 0..actions {
        let phases: Vec<Phase> = net.signals.iter().map(|s| random_phase(s.kind, &mut rng)).collect();
        signals.request(&phases).expect("valid phases");
        audit.actions += 1;
        for _ in 0..rng.random_range(1..=10) {
            let (lights, _) = signals.advance(net, t);
            t += 1;
            audit.steps += 1;
            let mut bad = false;
            for (i, sig) in lights.iter().enumerate() {
                let SiteSignal::Lit(l) = sig else { panic!("interlocked sites are never dark") };
                bad |= conflicting_greens(l, net.signals[i].kind);
                for (k, &m) in movements(net.signals[i].kind).iter().enumerate() {
                    seqs[i][k].push(l.get(m));
                }
            }
            audit.conflict_steps += u64::from(bad);
        }
    }
    // The handover may start inside a fixed-time yellow; skip to the first red.
    for site in &seqs {
        for seq in site {
            let start = seq.iter().position(|&l| l == Light::Red).unwrap_or(seq.len());
            if !yellow_edges_ok(&seq[start..]) {
                audit.yellow_violations += 1;
            }
        }
    }
    audit
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Fixed,
    Unsignalized,
    RandomInterlock,
}

#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct PhysicsAudit {
    pub steps: u64,
    pub vehicle_observations: u64,
    pub min_gap_m: f64,
    pub collisions: u64,
    pub speed_violations: u64,
    pub ped_speed_violations: u64,
    pub wait_decreases: u64,
    pub crossing_order_violations: u64,
}

/// Crossing progress of pedestrian leg `k`: 0 approaching, 1 queued,
/// 2 crossing, 3 done.
fn crossing_rank(p: &corridor_atsc::microsim::Pedestrian, k: usize) -> u8 {
    use corridor_atsc::microsim::PedState;
    if p.leg > k {
        return 3;
    }
    if p.leg < k {
        return 0;
    }
    match p.state {
        PedState::Walking => 0,
        PedState::Queued { .. } => 1,
        PedState::Crossing { .. } => 2,
    }
}

/// Runs `steps` simulation steps under `control` and checks gaps, speed
/// bounds, wait monotonicity and the order of pedestrian crossing states.
pub fn audit_physics(net: &CorridorNetwork, control: Control, scale: f64, steps: u64, seed: u64) -> PhysicsAudit {
    use corridor_atsc::microsim::PedLeg;
    use std::collections::HashMap;

    let rates = DemandRates::for_network(net);
    let demand = generate_trips(net, &rates, scale, steps as f64, seed).expect("demand");
    let cfg = SimConfig::for_network(net);
    let v0 = cfg.idm.v0;
    let len = cfg.idm.length_m;
    let signals = match control {
        Control::Fixed => CorridorSignals::FixedTime { dark_midblocks: false },
        Control::Unsignalized => CorridorSignals::FixedTime { dark_midblocks: true },
        Control::RandomInterlock => CorridorSignals::handover(net, 0),
    };
    let mut sim = Simulation::new(net, demand, signals, cfg).expect("sim");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut audit = PhysicsAudit { min_gap_m: f64::INFINITY, ..Default::default() };
    let mut veh_wait: HashMap<u64, f64> = HashMap::new();
    let mut ped_wait: HashMap<u64, f64> = HashMap::new();
    let mut ped_rank: HashMap<(u64, usize), u8> = HashMap::new();
    for t in 0..steps {
        if control == Control::RandomInterlock && t % 10 == 0 {
            let phases: Vec<Phase> = net.signals.iter().map(|s| random_phase(s.kind, &mut rng)).collect();
            sim.signals.request(&phases).expect("valid phases");
        }
        sim.step().expect("step");
        audit.steps += 1;

        let mut by_lane: HashMap<_, Vec<f64>> = HashMap::new();
        for v in sim.vehicles() {
            audit.vehicle_observations += 1;
            by_lane.entry(v.lane()).or_default().push(v.pos_m);
            if !(v.speed >= 0.0 && v.speed <= v0 + 1e-9) {
                audit.speed_violations += 1;
            }
            let prev = veh_wait.insert(v.id, v.wait.cumulative_s).unwrap_or(0.0);
            if v.wait.cumulative_s < prev {
                audit.wait_decreases += 1;
            }
        }
        for pos in by_lane.values_mut() {
            pos.sort_by(f64::total_cmp);
            for w in pos.windows(2) {
                let gap = w[1] - len - w[0];
                audit.min_gap_m = audit.min_gap_m.min(gap);
                if gap <= 0.0 {
                    audit.collisions += 1;
                }
            }
        }
        for p in sim.pedestrians() {
            if p.speed != 0.0 && (p.speed - net.ped_speed_mps).abs() > 1e-12 {
                audit.ped_speed_violations += 1;
            }
            let prev = ped_wait.insert(p.id, p.wait.cumulative_s).unwrap_or(0.0);
            if p.wait.cumulative_s < prev {
                audit.wait_decreases += 1;
            }
            for (k, leg) in p.legs.iter().enumerate() {
                if !matches!(leg, PedLeg::Cross { .. }) {
                    continue;
                }
                let now = crossing_rank(p, k);
                let before = ped_rank.insert((p.id, k), now);
                if let Some(b) = before {
                    // Ranks never go back, and nobody is done without being seen crossing.
                    if now < b || (now == 3 && b < 2) {
                        audit.crossing_order_violations += 1;
                    }
                }
            }
        }
    }
    audit
}
