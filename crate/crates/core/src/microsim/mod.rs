//! Discrete-time (1 s) microsimulation of vehicles and pedestrians.
//!
//! Vehicles follow the IDM along their lane with virtual leaders at stop
//! lines they must respect. Pedestrians walk the sidewalks at a constant
//! speed and cross where their route requires it.

mod idm;
mod pedestrian;
mod vehicle;

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use idm::{idm_accel, IdmParams};
pub use pedestrian::{pedestrian_route, CrossingState, PedLeg, PedState, Pedestrian};
pub use vehicle::{vehicle_route, LegExit, RouteLeg, Vehicle};

use crate::demand::{DemandSchedule, Side, Trip, TripEvent};
use crate::error::{Error, Result};
use crate::network::{AgentKind, CorridorNetwork, Lane, SiteKind, Zone};
use crate::signal::{CorridorSignals, Light, Phase, SiteSignal};

/// Clearance kept when a vehicle is pinned behind an obstacle.
const MIN_GAP_M: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub idm: IdmParams,
    /// Hardest braking a vehicle applies; stops that need more are skipped.
    pub max_decel_mps2: f64,
    pub veh_wait_speed_mps: f64,
    pub ped_wait_speed_mps: f64,
    pub lookahead_m: f64,
    pub record_trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            idm: IdmParams::default(),
            max_decel_mps2: 4.5,
            veh_wait_speed_mps: 0.2,
            ped_wait_speed_mps: 0.5,
            lookahead_m: 150.0,
            record_trace: false,
        }
    }
}

impl SimConfig {
    pub fn for_network(net: &CorridorNetwork) -> Self {
        SimConfig {
            idm: IdmParams {
                v0: net.speed_limit_mps,
                ..IdmParams::default()
            },
            ..SimConfig::default()
        }
    }
}

/// Waiting-time bookkeeping shared by both agent kinds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WaitClock {
    pub cumulative_s: f64,
    /// Length of the current uninterrupted wait.
    pub continuous_s: f64,
    /// Waiting accrued while the metric horizon is open.
    pub horizon_s: f64,
    pub in_horizon: bool,
}

impl WaitClock {
    fn tick(&mut self, waiting: bool, horizon: bool) {
        if horizon {
            self.in_horizon = true;
        }
        if waiting {
            self.cumulative_s += 1.0;
            self.continuous_s += 1.0;
            if horizon {
                self.horizon_s += 1.0;
            }
        } else {
            self.continuous_s = 0.0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConflictEvent {
    pub step: u64,
    pub site: usize,
    pub vehicle: u64,
    pub pedestrian: u64,
}

/// Completed trip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub id: u64,
    pub kind: AgentKind,
    pub spawn_s: f64,
    pub end_s: u64,
    pub wait: WaitClock,
}

/// Waiting agents in one site's incoming zones.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SiteWait {
    pub n_wait_veh: u32,
    pub max_wait_veh_s: f64,
    pub n_wait_ped: u32,
    pub max_wait_ped_s: f64,
}

/// Waiting agents of every site at one instant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WaitSnapshot {
    pub sites: Vec<SiteWait>,
}

impl WaitSnapshot {
    pub fn empty(n_sites: usize) -> Self {
        WaitSnapshot {
            sites: vec![SiteWait::default(); n_sites],
        }
    }
}

/// Zone occupancy and waiting counts of every site at one instant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Census {
    /// Vehicles per site in (incoming, inside, outgoing).
    pub veh: Vec<[u32; 3]>,
    /// Pedestrians per site in (incoming, outgoing).
    pub ped: Vec<[u32; 2]>,
    pub wait: WaitSnapshot,
}

/// Totals over the metric horizon, including agents still in the network.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HorizonTotals {
    pub veh_count: u64,
    pub veh_wait_s: f64,
    pub ped_count: u64,
    pub ped_wait_s: f64,
    pub conflicts: u64,
    pub steps: u64,
}

impl HorizonTotals {
    pub fn avg_veh_wait_s(&self) -> f64 {
        ratio(self.veh_wait_s, self.veh_count)
    }

    pub fn avg_ped_wait_s(&self) -> f64 {
        ratio(self.ped_wait_s, self.ped_count)
    }

    /// Total waiting of all agents divided by the number of agents.
    pub fn avg_combined_wait_s(&self) -> f64 {
        ratio(self.veh_wait_s + self.ped_wait_s, self.veh_count + self.ped_count)
    }
}

fn ratio(total: f64, n: u64) -> f64 {
    if n == 0 { 0.0 } else { total / n as f64 }
}

#[derive(Debug, Clone)]
struct Pending {
    id: u64,
    trip: crate::demand::VehicleTrip,
    legs: Vec<RouteLeg>,
    spawn_s: f64,
}

/// Full simulation state. Deterministic given the network, the demand
/// schedule and the sequence of signal requests.
#[derive(Debug, Clone)]
pub struct Simulation {
    net: CorridorNetwork,
    cfg: SimConfig,
    t: u64,
    pub signals: CorridorSignals,
    lights: Vec<SiteSignal>,
    phases: Vec<Phase>,
    vehicles: Vec<Vehicle>,
    peds: Vec<Pedestrian>,
    events: Vec<TripEvent>,
    next_event: usize,
    backlog: [VecDeque<Pending>; 4],
    next_id: u64,
    conflicts: Vec<ConflictEvent>,
    conflict_pairs: BTreeSet<(u64, u64)>,
    finished: Vec<TripRecord>,
    horizon_start: Option<u64>,
    horizon_conflicts: u64,
    lane_sites: [Vec<(usize, f64)>; 4],
    trace: Option<String>,
}

impl Simulation {
    pub fn new(
        net: &CorridorNetwork,
        demand: DemandSchedule,
        signals: CorridorSignals,
        cfg: SimConfig,
    ) -> Result<Self> {
        cfg.idm.validate()?;
        if !(cfg.max_decel_mps2 >= cfg.idm.b) {
            return Err(Error::config("max_decel_mps2", "must be >= idm.b"));
        }
        if let CorridorSignals::Interlocked(locks) = &signals {
            if locks.len() != net.n_signals() {
                return Err(Error::Length(format!(
                    "{} interlocks for {} sites",
                    locks.len(),
                    net.n_signals()
                )));
            }
        }
        let lane_sites = Lane::ALL.map(|lane| {
            let mut v: Vec<(usize, f64)> = (0..net.n_signals())
                .filter_map(|s| net.lane_exists(lane).then(|| net.stop_line(s, lane)).flatten().map(|x| (s, x)))
                .collect();
            v.sort_by(|a, b| a.1.total_cmp(&b.1));
            v
        });
        let mut events = demand.events;
        events.sort_by(|a, b| a.spawn_time_s.total_cmp(&b.spawn_time_s));
        Ok(Simulation {
            net: net.clone(),
            trace: cfg.record_trace.then(String::new),
            cfg,
            t: 0,
            signals,
            lights: Vec::new(),
            phases: Vec::new(),
            vehicles: Vec::new(),
            peds: Vec::new(),
            events,
            next_event: 0,
            backlog: Default::default(),
            next_id: 0,
            conflicts: Vec::new(),
            conflict_pairs: BTreeSet::new(),
            finished: Vec::new(),
            horizon_start: None,
            horizon_conflicts: 0,
            lane_sites,
        })
    }

    pub fn network(&self) -> &CorridorNetwork {
        &self.net
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Number of completed steps.
    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn pedestrians(&self) -> &[Pedestrian] {
        &self.peds
    }

    /// Lights shown during the last step.
    pub fn lights(&self) -> &[SiteSignal] {
        &self.lights
    }

    /// Engaged phase of every site during the last step.
    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn conflicts(&self) -> &[ConflictEvent] {
        &self.conflicts
    }

    pub fn finished(&self) -> &[TripRecord] {
        &self.finished
    }

    pub fn backlog_len(&self) -> usize {
        self.backlog.iter().map(|q| q.len()).sum()
    }

    pub fn trace(&self) -> Option<&str> {
        self.trace.as_deref()
    }

    pub fn take_trace(&mut self) -> Option<String> {
        self.trace.as_mut().map(std::mem::take)
    }

    /// Puts a vehicle directly on its first lane, bypassing the entry queue.
    pub fn place_vehicle(&mut self, trip: crate::demand::VehicleTrip, pos_m: f64, speed: f64) -> Result<u64> {
        let legs = vehicle_route(&self.net, &trip)?;
        if !(pos_m >= 0.0 && pos_m < legs[0].end_m && (0.0..=self.cfg.idm.v0).contains(&speed)) {
            return Err(Error::Range(format!("cannot place vehicle at {pos_m} m, {speed} m/s")));
        }
        let id = self.next_id;
        self.next_id += 1;
        self.vehicles.push(Vehicle {
            id,
            trip,
            legs,
            leg: 0,
            pos_m,
            speed,
            committed: Vec::new(),
            wait: WaitClock::default(),
            spawn_s: self.t as f64,
        });
        Ok(id)
    }

    /// Puts a pedestrian at the start of its route.
    pub fn place_pedestrian(&mut self, trip: crate::demand::PedestrianTrip) -> Result<u64> {
        let legs = pedestrian_route(&self.net, &trip)?;
        let id = self.next_id;
        self.next_id += 1;
        self.peds.push(Pedestrian {
            id,
            legs,
            leg: 0,
            side: trip.origin_side,
            x_m: trip.origin_m,
            state: PedState::Walking,
            speed: self.net.ped_speed_mps,
            last_crossing: None,
            wait: WaitClock::default(),
            spawn_s: self.t as f64,
        });
        Ok(id)
    }

    /// Starts accumulating horizon metrics from the next step on.
    pub fn begin_horizon(&mut self) {
        self.horizon_start = Some(self.t);
        self.horizon_conflicts = 0;
        for v in &mut self.vehicles {
            v.wait.horizon_s = 0.0;
            v.wait.in_horizon = false;
        }
        for p in &mut self.peds {
            p.wait.horizon_s = 0.0;
            p.wait.in_horizon = false;
        }
        for r in &mut self.finished {
            r.wait.in_horizon = false;
        }
    }

    pub fn horizon_totals(&self) -> HorizonTotals {
        let mut h = HorizonTotals {
            conflicts: self.horizon_conflicts,
            steps: self.horizon_start.map_or(0, |s| self.t - s),
            ..HorizonTotals::default()
        };
        let mut add = |kind: AgentKind, w: &WaitClock| {
            if !w.in_horizon {
                return;
            }
            match kind {
                AgentKind::Vehicle => {
                    h.veh_count += 1;
                    h.veh_wait_s += w.horizon_s;
                }
                AgentKind::Pedestrian => {
                    h.ped_count += 1;
                    h.ped_wait_s += w.horizon_s;
                }
            }
        };
        for r in &self.finished {
            add(r.kind, &r.wait);
        }
        for v in &self.vehicles {
            add(AgentKind::Vehicle, &v.wait);
        }
        for p in &self.peds {
            add(AgentKind::Pedestrian, &p.wait);
        }
        h
    }

    /// Advances the simulation by one second. Returns the number of new
    /// conflicts recorded during the step.
    pub fn step(&mut self) -> Result<usize> {
        let (lights, phases) = self.signals.advance(&self.net, self.t);
        self.lights = lights;
        self.phases = phases;
        self.spawn()?;
        self.step_vehicles()?;
        self.step_pedestrians()?;
        let mut new = 0;
        for c in detect_conflicts(self) {
            if self.conflict_pairs.insert((c.vehicle, c.pedestrian)) {
                self.conflicts.push(c);
                new += 1;
            }
        }
        if self.horizon_start.is_some() {
            self.horizon_conflicts += new as u64;
        }
        self.t += 1;
        if self.trace.is_some() {
            self.write_trace();
        }
        Ok(new)
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn spawn(&mut self) -> Result<()> {
        let now = self.t as f64 + 1.0;
        while let Some(ev) = self.events.get(self.next_event) {
            if ev.spawn_time_s >= now {
                break;
            }
            let ev = *ev;
            self.next_event += 1;
            let id = self.next_id;
            self.next_id += 1;
            match ev.trip {
                Trip::Vehicle(trip) => {
                    let legs = vehicle_route(&self.net, &trip)?;
                    self.backlog[legs[0].lane.index()].push_back(Pending {
                        id,
                        trip,
                        legs,
                        spawn_s: ev.spawn_time_s,
                    });
                }
                Trip::Pedestrian(trip) => {
                    let legs = pedestrian_route(&self.net, &trip)?;
                    self.peds.push(Pedestrian {
                        id,
                        legs,
                        leg: 0,
                        side: trip.origin_side,
                        x_m: trip.origin_m,
                        state: PedState::Walking,
                        speed: self.net.ped_speed_mps,
                        last_crossing: None,
                        wait: WaitClock::default(),
                        spawn_s: ev.spawn_time_s,
                    });
                }
            }
        }
        let p = self.cfg.idm;
        for lane in Lane::ALL {
            if self.backlog[lane.index()].is_empty() {
                continue;
            }
            let first = self
                .vehicles
                .iter()
                .filter(|v| v.lane() == lane)
                .min_by(|a, b| a.pos_m.total_cmp(&b.pos_m));
            let speed = match first {
                None => p.v0,
                Some(v) => {
                    let gap = v.pos_m - p.length_m;
                    if gap >= p.s0 + p.v0 * p.headway_s {
                        p.v0
                    } else if gap > p.s0 {
                        v.speed.min(p.v0)
                    } else {
                        continue;
                    }
                }
            };
            let head = self.backlog[lane.index()].pop_front().expect("checked above");
            self.vehicles.push(Vehicle {
                id: head.id,
                trip: head.trip,
                legs: head.legs,
                leg: 0,
                pos_m: 0.0,
                speed,
                committed: Vec::new(),
                wait: WaitClock::default(),
                spawn_s: head.spawn_s,
            });
        }
        Ok(())
    }

    /// Whether a vehicle can merge onto `lane` at the junction centre.
    fn can_insert(&self, lane: Lane, positions: &[(Lane, f64, f64)]) -> bool {
        let p = &self.cfg.idm;
        let at = self.net.junction_centre(lane);
        positions.iter().filter(|(l, _, _)| *l == lane).all(|&(_, pos, v)| {
            if pos > at {
                pos - p.length_m - at >= p.s0
            } else {
                at - p.length_m - pos >= p.s0 + p.stopping_distance(v)
            }
        })
    }

    fn dark_claims(&self) -> Vec<bool> {
        let mut claims = vec![false; self.net.n_signals()];
        for p in &self.peds {
            if let Some(s) = p.claimed_site() {
                claims[s] = true;
            }
        }
        claims
    }

    /// Stop line (if any) the vehicle must treat as a standing obstacle, and
    /// sites it newly commits to pass.
    fn stop_target(&self, v: &Vehicle, claims: &[bool], insert_ok: &[bool; 4]) -> (Option<f64>, Vec<usize>) {
        let leg = v.route_leg();
        let b = self.cfg.idm.b;
        let mut commits = Vec::new();
        for &(site, stop) in &self.lane_sites[leg.lane.index()] {
            let d = stop - v.pos_m;
            if d <= 0.0 || stop >= leg.end_m {
                continue;
            }
            if d > self.cfg.lookahead_m {
                break;
            }
            let required = v.speed * v.speed / (2.0 * d);
            let committed = v.committed.contains(&site);
            let lit = matches!(self.lights[site], SiteSignal::Lit(_));
            let must = match self.lights[site] {
                SiteSignal::Dark => claims[site],
                SiteSignal::Lit(l) => {
                    let m = if self.net.signals[site].kind == SiteKind::MidBlock {
                        crate::signal::Movement::MbVehicle
                    } else {
                        leg.movement
                    };
                    match l.get(m) {
                        Light::Green => false,
                        Light::Yellow if committed => false,
                        Light::Yellow if required > b => {
                            commits.push(site);
                            false
                        }
                        Light::Yellow => true,
                        Light::Red => !committed,
                    }
                }
            };
            if !must {
                continue;
            }
            if required > self.cfg.max_decel_mps2 {
                if lit {
                    commits.push(site);
                }
                continue;
            }
            return (Some(stop), commits);
        }
        if let LegExit::Insert(target) = leg.exit {
            if !insert_ok[target.index()] && leg.end_m > v.pos_m {
                return (Some(leg.end_m), commits);
            }
        }
        (None, commits)
    }

    fn step_vehicles(&mut self) -> Result<()> {
        let n = self.vehicles.len();
        let p = self.cfg.idm;
        let positions: Vec<(Lane, f64, f64)> =
            self.vehicles.iter().map(|v| (v.lane(), v.pos_m, v.speed)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            positions[a]
                .0
                .cmp(&positions[b].0)
                .then(positions[a].1.total_cmp(&positions[b].1))
        });
        let mut leader: Vec<Option<usize>> = vec![None; n];
        for w in order.windows(2) {
            if positions[w[0]].0 == positions[w[1]].0 {
                leader[w[0]] = Some(w[1]);
            }
        }
        let claims = self.dark_claims();
        let insert_ok = Lane::ALL.map(|l| l.is_arterial() && self.can_insert(l, &positions));

        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let v = &self.vehicles[i];
            let mut cap = f64::INFINITY;
            let lead = match leader[i] {
                Some(j) => {
                    let rear = positions[j].1 - p.length_m;
                    cap = rear - MIN_GAP_M;
                    Some((positions[j].2, rear - v.pos_m))
                }
                None => None,
            };
            let mut a = idm_accel(v.speed, lead, &p)?;
            let (stop, commits) = self.stop_target(v, &claims, &insert_ok);
            if let Some(stop) = stop {
                let d = (stop - v.pos_m).max(MIN_GAP_M);
                a = a.min(idm_accel(v.speed, Some((0.0, d)), &p)?);
                cap = cap.min(stop - MIN_GAP_M);
            }
            let a = a.max(-self.cfg.max_decel_mps2);
            let mut speed = (v.speed + a).clamp(0.0, p.v0);
            let mut pos = v.pos_m + speed;
            if pos > cap {
                pos = cap.max(v.pos_m);
                speed = pos - v.pos_m;
            }
            next.push((pos, speed, commits));
        }

        let horizon = self.horizon_start.is_some();
        let mut leaving = Vec::new();
        let mut merging = Vec::new();
        for (i, (pos, speed, commits)) in next.into_iter().enumerate() {
            let thr = self.cfg.veh_wait_speed_mps;
            let lane_sites = &self.lane_sites;
            let v = &mut self.vehicles[i];
            v.pos_m = pos;
            v.speed = speed;
            v.committed.extend(commits);
            let lane = v.lane();
            v.committed.retain(|s| {
                lane_sites[lane.index()]
                    .iter()
                    .any(|&(site, stop)| site == *s && stop > pos)
            });
            v.wait.tick(speed < thr, horizon);
            let leg = *v.route_leg();
            if pos >= leg.end_m {
                match leg.exit {
                    LegExit::Leave => leaving.push(i),
                    LegExit::Insert(target) => merging.push((i, target)),
                }
            }
        }
        for (i, target) in merging {
            let positions: Vec<(Lane, f64, f64)> =
                self.vehicles.iter().map(|v| (v.lane(), v.pos_m, v.speed)).collect();
            let v = &self.vehicles[i];
            if self.can_insert(target, &positions) {
                let at = self.net.junction_centre(target);
                let v = &mut self.vehicles[i];
                v.leg += 1;
                v.pos_m = at;
                v.committed.clear();
            } else {
                let end = v.route_leg().end_m;
                let prev = v.pos_m - v.speed;
                let v = &mut self.vehicles[i];
                v.pos_m = (end - MIN_GAP_M).max(prev);
                v.speed = 0.0;
            }
        }
        let end_s = self.t + 1;
        let mut k = 0;
        let leaving: BTreeSet<usize> = leaving.into_iter().collect();
        self.vehicles.retain(|v| {
            let keep = !leaving.contains(&k);
            k += 1;
            if !keep {
                self.finished.push(TripRecord {
                    id: v.id,
                    kind: AgentKind::Vehicle,
                    spawn_s: v.spawn_s,
                    end_s,
                    wait: v.wait,
                });
            }
            keep
        });
        Ok(())
    }

    /// Whether a vehicle is close enough to a dark crosswalk that a
    /// pedestrian arriving now should let it pass first.
    fn vehicle_threat(&self, site: usize) -> bool {
        let inside = self.net.inside_len(site) + self.cfg.idm.length_m;
        self.vehicles.iter().any(|v| {
            let lane = v.lane();
            if !lane.is_arterial() || v.route_leg().end_m <= self.stop_of(site, lane) {
                return false;
            }
            let d = self.stop_of(site, lane) - v.pos_m;
            if d > 0.0 {
                d <= self.cfg.idm.stopping_distance(v.speed) && v.speed > 0.0
            } else {
                -d < inside
            }
        })
    }

    fn stop_of(&self, site: usize, lane: Lane) -> f64 {
        self.net.stop_line(site, lane).expect("arterial lanes pass every site")
    }

    fn may_cross(&self, leg: &PedLeg, queued: bool) -> bool {
        let PedLeg::Cross { site, movement, .. } = *leg else {
            return true;
        };
        match self.lights[site] {
            SiteSignal::Lit(l) => l.get(movement) == Light::Green,
            SiteSignal::Dark => queued || !self.vehicle_threat(site),
        }
    }

    fn step_pedestrians(&mut self) -> Result<()> {
        let horizon = self.horizon_start.is_some();
        let speed = self.net.ped_speed_mps;
        let mut done = Vec::new();
        for i in 0..self.peds.len() {
            let mut ped = self.peds[i].clone();
            let mut budget = speed;
            let mut finished = false;
            loop {
                let Some(leg) = ped.legs.get(ped.leg).copied() else {
                    finished = true;
                    break;
                };
                match (leg, ped.state) {
                    (PedLeg::Walk { to_m }, _) => {
                        let dist = (to_m - ped.x_m).abs();
                        if dist <= budget {
                            ped.x_m = to_m;
                            budget -= dist;
                            bump_last(&mut ped, dist);
                            ped.leg += 1;
                            match ped.legs.get(ped.leg) {
                                None => {
                                    finished = true;
                                    break;
                                }
                                Some(next) => {
                                    if self.may_cross(next, false) {
                                        ped.state = PedState::Crossing { progress_m: 0.0 };
                                    } else {
                                        ped.state = PedState::Queued { steps: 0 };
                                        break;
                                    }
                                }
                            }
                        } else {
                            ped.x_m += (to_m - ped.x_m).signum() * budget;
                            bump_last(&mut ped, budget);
                            break;
                        }
                    }
                    (PedLeg::Cross { .. }, PedState::Queued { steps }) => {
                        if self.may_cross(&leg, true) {
                            ped.state = PedState::Crossing { progress_m: 0.0 };
                        } else {
                            ped.state = PedState::Queued { steps: steps + 1 };
                            break;
                        }
                    }
                    (PedLeg::Cross { site, length_m, exit_side, exit_m, .. }, PedState::Crossing { progress_m }) => {
                        let progress = progress_m + budget;
                        if progress >= length_m {
                            budget = progress - length_m;
                            ped.side = exit_side;
                            ped.x_m = exit_m;
                            ped.last_crossing = Some((site, length_m));
                            ped.state = PedState::Walking;
                            ped.leg += 1;
                            if ped.leg == ped.legs.len() {
                                finished = true;
                                break;
                            }
                        } else {
                            ped.state = PedState::Crossing { progress_m: progress };
                            break;
                        }
                    }
                    (PedLeg::Cross { .. }, PedState::Walking) => {
                        if self.may_cross(&leg, false) {
                            ped.state = PedState::Crossing { progress_m: 0.0 };
                        } else {
                            ped.state = PedState::Queued { steps: 0 };
                            break;
                        }
                    }
                }
            }
            let waiting = matches!(ped.state, PedState::Queued { .. }) && !finished;
            ped.speed = if waiting { 0.0 } else { speed };
            ped.wait.tick(ped.speed < self.cfg.ped_wait_speed_mps, horizon);
            self.peds[i] = ped;
            if finished {
                done.push(i);
            }
        }
        let end_s = self.t + 1;
        for &i in done.iter().rev() {
            let p = self.peds.remove(i);
            self.finished.push(TripRecord {
                id: p.id,
                kind: AgentKind::Pedestrian,
                spawn_s: p.spawn_s,
                end_s,
                wait: p.wait,
            });
        }
        Ok(())
    }

    /// Zone occupancy and waiting agents per site.
    pub fn census(&self) -> Census {
        let n = self.net.n_signals();
        let mut c = Census {
            veh: vec![[0; 3]; n],
            ped: vec![[0; 2]; n],
            wait: WaitSnapshot::empty(n),
        };
        for v in &self.vehicles {
            let waiting = v.speed < self.cfg.veh_wait_speed_mps;
            for &(site, stop) in &self.lane_sites[v.lane().index()] {
                let zone = self
                    .net
                    .zone_membership(site, v.pos_m - stop, AgentKind::Vehicle)
                    .expect("site ids come from the network");
                let slot = match zone {
                    Zone::Incoming => 0,
                    Zone::Inside => 1,
                    Zone::Outgoing => 2,
                    Zone::None => continue,
                };
                c.veh[site][slot] += 1;
                if slot == 0 && waiting {
                    let w = &mut c.wait.sites[site];
                    w.n_wait_veh += 1;
                    w.max_wait_veh_s = w.max_wait_veh_s.max(v.wait.continuous_s);
                }
            }
        }
        for p in &self.peds {
            let waiting = p.speed < self.cfg.ped_wait_speed_mps;
            let mut mark = |site: usize, offset: f64| {
                match self.net.zone_membership(site, offset, AgentKind::Pedestrian) {
                    Ok(Zone::Incoming) => {
                        c.ped[site][0] += 1;
                        if waiting {
                            let w = &mut c.wait.sites[site];
                            w.n_wait_ped += 1;
                            w.max_wait_ped_s = w.max_wait_ped_s.max(p.wait.continuous_s);
                        }
                    }
                    Ok(Zone::Outgoing) => c.ped[site][1] += 1,
                    _ => {}
                }
            };
            if let Some((site, dist)) = p.next_crossing() {
                mark(site, -dist);
            }
            if let (Some(PedLeg::Cross { site, .. }), PedState::Crossing { progress_m }) =
                (p.legs.get(p.leg), p.state)
            {
                mark(*site, progress_m.max(1e-9));
            }
            if let Some((site, offset)) = p.last_crossing {
                mark(site, offset);
            }
        }
        c
    }

    pub fn wait_snapshot(&self) -> WaitSnapshot {
        self.census().wait
    }

    fn write_trace(&mut self) {
        let mut out = String::new();
        let _ = write!(out, "S {}", self.t);
        for (sig, ph) in self.lights.iter().zip(&self.phases) {
            let _ = write!(out, " {}:{}", ph, sig.code());
        }
        out.push('\n');
        for v in &self.vehicles {
            let _ = writeln!(
                out,
                "V {} {} {} {:.6} {:.6} {} {}",
                self.t,
                v.id,
                v.lane().name(),
                v.pos_m,
                v.speed,
                v.wait.cumulative_s,
                v.wait.continuous_s
            );
        }
        for p in &self.peds {
            let side = match p.side {
                Side::West => 'w',
                Side::East => 'e',
            };
            let _ = writeln!(
                out,
                "P {} {} {} {:.6} {} {} {}",
                self.t,
                p.id,
                side,
                p.x_m,
                p.state.label(),
                p.wait.cumulative_s,
                p.wait.continuous_s
            );
        }
        if let Some(t) = &mut self.trace {
            t.push_str(&out);
        }
    }
}

fn bump_last(ped: &mut Pedestrian, dist: f64) {
    if let Some((_, off)) = &mut ped.last_crossing {
        *off += dist;
    }
}

/// Vehicle-pedestrian pairs that are currently in conflict at unsignalized
/// crosswalks: the pedestrian is on the crosswalk while the vehicle would
/// need more than the comfortable deceleration to stop before it, or is
/// already moving through it. Signalized sites never produce conflicts.
pub fn detect_conflicts(sim: &Simulation) -> Vec<ConflictEvent> {
    let mut out = Vec::new();
    let b = sim.cfg.idm.b;
    for p in &sim.peds {
        let Some(site) = p.crossing_site() else {
            continue;
        };
        if sim.lights.get(site) != Some(&SiteSignal::Dark) {
            continue;
        }
        let inside = sim.net.inside_len(site) + sim.cfg.idm.length_m;
        for v in &sim.vehicles {
            let lane = v.lane();
            if !lane.is_arterial() {
                continue;
            }
            let stop = sim.stop_of(site, lane);
            if v.route_leg().end_m <= stop {
                continue;
            }
            let d = stop - v.pos_m;
            let hit = if d > 0.0 {
                v.speed * v.speed / (2.0 * d) > b
            } else {
                -d < inside && v.speed > 0.0
            };
            if hit {
                out.push(ConflictEvent {
                    step: sim.t,
                    site,
                    vehicle: v.id,
                    pedestrian: p.id,
                });
            }
        }
    }
    out
}
