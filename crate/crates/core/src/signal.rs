//! Signal phases, the yellow interlock, and the fixed-time baseline plans.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{CorridorNetwork, SiteKind};

/// Mandatory yellow inserted before any green movement turns red.
pub const YELLOW_STEPS: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Light {
    Green,
    Yellow,
    Red,
}

impl Light {
    pub fn symbol(self) -> char {
        match self {
            Light::Green => 'G',
            Light::Yellow => 'y',
            Light::Red => 'r',
        }
    }
}

/// Controlled movements. The first six belong to the intersection, the last
/// two to a mid-block crosswalk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Movement {
    /// Arterial through and right-turn traffic.
    ArterialThrough,
    ArterialLeft,
    /// Cross-street through and right-turn traffic.
    CrossThrough,
    CrossLeft,
    /// Crosswalks across the arterial (north and south legs).
    PedArterial,
    /// Crosswalks across the cross street (east and west legs).
    PedCross,
    MbVehicle,
    MbPedestrian,
}

impl Movement {
    pub const INTERSECTION: [Movement; 6] = [
        Movement::ArterialThrough,
        Movement::ArterialLeft,
        Movement::CrossThrough,
        Movement::CrossLeft,
        Movement::PedArterial,
        Movement::PedCross,
    ];
    pub const MIDBLOCK: [Movement; 2] = [Movement::MbVehicle, Movement::MbPedestrian];

    pub fn is_pedestrian(self) -> bool {
        matches!(
            self,
            Movement::PedArterial | Movement::PedCross | Movement::MbPedestrian
        )
    }

    fn slot(self) -> usize {
        match self {
            Movement::ArterialThrough | Movement::MbVehicle => 0,
            Movement::ArterialLeft | Movement::MbPedestrian => 1,
            Movement::CrossThrough => 2,
            Movement::CrossLeft => 3,
            Movement::PedArterial => 4,
            Movement::PedCross => 5,
        }
    }

    /// Vehicle movements whose path crosses this pedestrian movement's crosswalks.
    pub fn conflicts(self) -> &'static [Movement] {
        match self {
            Movement::PedArterial => &[Movement::ArterialThrough, Movement::ArterialLeft],
            Movement::PedCross => &[Movement::CrossThrough, Movement::CrossLeft],
            Movement::MbPedestrian => &[Movement::MbVehicle],
            _ => &[],
        }
    }
}

pub fn movements(kind: SiteKind) -> &'static [Movement] {
    match kind {
        SiteKind::Intersection => &Movement::INTERSECTION,
        SiteKind::MidBlock => &Movement::MIDBLOCK,
    }
}

/// The four safe intersection configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntersectionPhase {
    /// Choice 1: arterial (N-S) vehicles plus the complementary crosswalks
    /// over the cross street.
    ArterialFlow,
    /// Choice 2: cross-street (E-W) vehicles plus the crosswalks over the arterial.
    CrossFlow,
    /// Choice 3: protected left turns from every approach, pedestrians held.
    LeftTurns,
    /// Choice 4: every crosswalk walks, all vehicles held.
    AllPedestrian,
}

impl IntersectionPhase {
    pub const ALL: [IntersectionPhase; 4] = [
        IntersectionPhase::ArterialFlow,
        IntersectionPhase::CrossFlow,
        IntersectionPhase::LeftTurns,
        IntersectionPhase::AllPedestrian,
    ];

    pub fn choice(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_choice(choice: u8) -> Result<Self> {
        match choice {
            1..=4 => Ok(Self::ALL[choice as usize - 1]),
            _ => Err(Error::Range(format!(
                "intersection choice must be 1..=4, got {choice}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MidBlockPhase {
    /// Choice 1: vehicles flow, pedestrians held.
    VehicleFlow,
    /// Choice 2: pedestrians cross, vehicles held.
    PedestrianCrossing,
}

impl MidBlockPhase {
    pub fn choice(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_vehicle_flag(vehicle: bool) -> Self {
        if vehicle {
            MidBlockPhase::VehicleFlow
        } else {
            MidBlockPhase::PedestrianCrossing
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Intersection(IntersectionPhase),
    MidBlock(MidBlockPhase),
}

impl Phase {
    pub fn kind(self) -> SiteKind {
        match self {
            Phase::Intersection(_) => SiteKind::Intersection,
            Phase::MidBlock(_) => SiteKind::MidBlock,
        }
    }

    pub fn choice(self) -> u8 {
        match self {
            Phase::Intersection(p) => p.choice(),
            Phase::MidBlock(p) => p.choice(),
        }
    }

    pub fn greens(self) -> &'static [Movement] {
        use IntersectionPhase::*;
        use Movement::*;
        match self {
            Phase::Intersection(ArterialFlow) => &[ArterialThrough, ArterialLeft, PedCross],
            Phase::Intersection(CrossFlow) => &[CrossThrough, CrossLeft, PedArterial],
            Phase::Intersection(LeftTurns) => &[ArterialLeft, CrossLeft],
            Phase::Intersection(AllPedestrian) => &[PedArterial, PedCross],
            Phase::MidBlock(MidBlockPhase::VehicleFlow) => &[MbVehicle],
            Phase::MidBlock(MidBlockPhase::PedestrianCrossing) => &[MbPedestrian],
        }
    }

    pub fn is_green(self, m: Movement) -> bool {
        self.greens().contains(&m)
    }

    pub fn lights(self) -> SiteLights {
        let mut lights = SiteLights::all_red(self.kind());
        for &m in self.greens() {
            lights.set(m, Light::Green);
        }
        lights
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.choice())
    }
}

/// Light shown to every movement of one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteLights {
    pub kind: SiteKind,
    slots: [Light; 6],
}

impl SiteLights {
    pub fn all_red(kind: SiteKind) -> Self {
        SiteLights {
            kind,
            slots: [Light::Red; 6],
        }
    }

    pub fn get(&self, m: Movement) -> Light {
        self.slots[m.slot()]
    }

    pub fn set(&mut self, m: Movement, light: Light) {
        self.slots[m.slot()] = light;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Movement, Light)> + '_ {
        movements(self.kind).iter().map(move |&m| (m, self.get(m)))
    }

    /// True when a walking pedestrian movement shares the step with a
    /// conflicting vehicle movement that is green or yellow.
    pub fn has_conflict(&self) -> bool {
        self.iter().any(|(m, l)| {
            m.is_pedestrian()
                && l == Light::Green
                && m.conflicts().iter().any(|&v| self.get(v) != Light::Red)
        })
    }

    pub fn code(&self) -> String {
        self.iter().map(|(_, l)| l.symbol()).collect()
    }
}

/// What a site shows during one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SiteSignal {
    Lit(SiteLights),
    /// Unsignalized crosswalk: pedestrians have the right of way.
    Dark,
}

impl SiteSignal {
    pub fn code(&self) -> String {
        match self {
            SiteSignal::Lit(l) => l.code(),
            SiteSignal::Dark => "-".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
enum Transition {
    Steady,
    Yellow(u8),
    Cleared,
}

/// Per-site interlock that inserts the yellow interval for every movement
/// losing green before a requested phase engages.
///
/// Requests take effect from the next step. While a change is pending, a new
/// request replaces the target; movements that must additionally give up
/// green start their own yellow.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interlock {
    current: Phase,
    pending: Option<Phase>,
    transitions: [Transition; 6],
}

impl Interlock {
    pub fn new(phase: Phase) -> Self {
        Interlock {
            current: phase,
            pending: None,
            transitions: [Transition::Steady; 6],
        }
    }

    /// Continues a fixed-time plan mid-transition so that no interval is cut
    /// short at the handover.
    pub fn from_fixed(state: &FixedTimeState) -> Self {
        let mut lock = Interlock::new(state.phase);
        if let Some(next) = state.next_phase {
            lock.pending = Some(next);
            for (m, light) in state.lights.iter() {
                if !state.phase.is_green(m) {
                    continue;
                }
                lock.transitions[m.slot()] = match light {
                    Light::Yellow => Transition::Yellow(state.remaining as u8),
                    _ => Transition::Cleared,
                };
            }
        }
        lock
    }

    pub fn current(&self) -> Phase {
        self.current
    }

    pub fn pending(&self) -> Option<Phase> {
        self.pending
    }

    pub fn yellow_remaining(&self) -> u8 {
        self.transitions
            .iter()
            .map(|t| match t {
                Transition::Yellow(k) => *k,
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn in_transition(&self) -> bool {
        self.pending.is_some()
    }

    /// Queues a phase request. Range errors are raised by the caller when
    /// decoding actions; a phase of the wrong site kind is rejected here.
    pub fn request(&mut self, target: Phase) -> Result<()> {
        if target.kind() != self.current.kind() {
            return Err(Error::Range(format!(
                "phase {target:?} does not belong to a {:?} site",
                self.current.kind()
            )));
        }
        if self.pending.is_none() && target == self.current {
            return Ok(());
        }
        self.pending = Some(target);
        for &m in self.current.greens() {
            if !target.is_green(m) && self.transitions[m.slot()] == Transition::Steady {
                self.transitions[m.slot()] = Transition::Yellow(YELLOW_STEPS);
            }
        }
        Ok(())
    }

    /// Produces the lights for the current step and advances the timers.
    /// Returns the lights and whether a different phase engaged this step.
    pub fn advance(&mut self) -> (SiteLights, bool) {
        let mut switched = false;
        if let Some(target) = self.pending {
            let yellow_left = self
                .transitions
                .iter()
                .any(|t| matches!(t, Transition::Yellow(_)));
            if !yellow_left {
                switched = target != self.current;
                self.current = target;
                self.pending = None;
                self.transitions = [Transition::Steady; 6];
            }
        }
        let mut lights = SiteLights::all_red(self.current.kind());
        for &m in movements(self.current.kind()) {
            let light = match self.transitions[m.slot()] {
                Transition::Yellow(_) => Light::Yellow,
                Transition::Cleared => Light::Red,
                Transition::Steady if self.current.is_green(m) => Light::Green,
                Transition::Steady => Light::Red,
            };
            lights.set(m, light);
        }
        for t in &mut self.transitions {
            if let Transition::Yellow(k) = *t {
                *t = if k <= 1 {
                    Transition::Cleared
                } else {
                    Transition::Yellow(k - 1)
                };
            }
        }
        (lights, switched)
    }

    /// Applies the request (if any) after the step's lights are produced.
    pub fn step(&mut self, request: Option<Phase>) -> Result<(SiteLights, bool)> {
        let out = self.advance();
        if let Some(target) = request {
            self.request(target)?;
        }
        Ok(out)
    }
}

/// Named interval of a fixed-time plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Interval {
    Green,
    Yellow,
    AllRed,
    PedWalk,
    PedClearance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedTimeState {
    /// Phase whose green is running or ending.
    pub phase: Phase,
    pub interval: Interval,
    pub lights: SiteLights,
    /// Set during yellow, all-red and pedestrian clearance.
    pub in_transition: bool,
    /// Phase that engages once the transition completes.
    pub next_phase: Option<Phase>,
    /// Steps left in the current interval, including this one.
    pub remaining: u32,
}

pub const INTERSECTION_CYCLE_S: u64 = 192;
pub const MIDBLOCK_CYCLE_S: u64 = 62;

/// (duration, interval, phase) rows of the intersection plan.
pub const INTERSECTION_PLAN: [(u64, Interval, IntersectionPhase); 6] = [
    (90, Interval::Green, IntersectionPhase::ArterialFlow),
    (4, Interval::Yellow, IntersectionPhase::ArterialFlow),
    (2, Interval::AllRed, IntersectionPhase::ArterialFlow),
    (90, Interval::Green, IntersectionPhase::CrossFlow),
    (4, Interval::Yellow, IntersectionPhase::CrossFlow),
    (2, Interval::AllRed, IntersectionPhase::CrossFlow),
];

/// Vehicle green, yellow, red clearance, pedestrian walk, pedestrian clearance.
pub const MIDBLOCK_PLAN: [(u64, Interval, MidBlockPhase); 5] = [
    (40, Interval::Green, MidBlockPhase::VehicleFlow),
    (4, Interval::Yellow, MidBlockPhase::VehicleFlow),
    (2, Interval::AllRed, MidBlockPhase::VehicleFlow),
    (7, Interval::PedWalk, MidBlockPhase::PedestrianCrossing),
    (9, Interval::PedClearance, MidBlockPhase::PedestrianCrossing),
];

/// Pedestrian clearance interval: crossing length over walking speed,
/// rounded to the nearest second.
pub fn clearance_interval_s(crosswalk_length: f64, walking_speed: f64) -> u32 {
    (crosswalk_length / walking_speed).round() as u32
}

fn locate<T: Copy>(plan: &[(u64, Interval, T)], t: u64) -> (usize, u64) {
    let period: u64 = plan.iter().map(|r| r.0).sum();
    let mut tau = t % period;
    for (i, row) in plan.iter().enumerate() {
        if tau < row.0 {
            return (i, row.0 - tau);
        }
        tau -= row.0;
    }
    unreachable!("offset is always inside one period")
}

pub fn fixed_time_intersection(t: u64) -> FixedTimeState {
    let (i, remaining) = locate(&INTERSECTION_PLAN, t);
    let (_, interval, p) = INTERSECTION_PLAN[i];
    let phase = Phase::Intersection(p);
    let next = Phase::Intersection(match p {
        IntersectionPhase::ArterialFlow => IntersectionPhase::CrossFlow,
        _ => IntersectionPhase::ArterialFlow,
    });
    let mut lights = SiteLights::all_red(SiteKind::Intersection);
    match interval {
        Interval::Green => lights = phase.lights(),
        Interval::Yellow => {
            for &m in phase.greens() {
                lights.set(m, Light::Yellow);
            }
        }
        _ => {}
    }
    let in_transition = interval != Interval::Green;
    FixedTimeState {
        phase,
        interval,
        lights,
        in_transition,
        next_phase: in_transition.then_some(next),
        remaining: remaining as u32,
    }
}

pub fn fixed_time_midblock(t: u64) -> FixedTimeState {
    let (i, remaining) = locate(&MIDBLOCK_PLAN, t);
    let (_, interval, p) = MIDBLOCK_PLAN[i];
    let phase = Phase::MidBlock(p);
    let mut lights = SiteLights::all_red(SiteKind::MidBlock);
    let next = match interval {
        Interval::Green => {
            lights.set(Movement::MbVehicle, Light::Green);
            None
        }
        Interval::Yellow => {
            lights.set(Movement::MbVehicle, Light::Yellow);
            Some(MidBlockPhase::PedestrianCrossing)
        }
        Interval::AllRed => Some(MidBlockPhase::PedestrianCrossing),
        Interval::PedWalk => {
            lights.set(Movement::MbPedestrian, Light::Green);
            None
        }
        Interval::PedClearance => {
            lights.set(Movement::MbPedestrian, Light::Yellow);
            Some(MidBlockPhase::VehicleFlow)
        }
    };
    FixedTimeState {
        phase,
        interval,
        lights,
        in_transition: next.is_some(),
        next_phase: next.map(Phase::MidBlock),
        remaining: remaining as u32,
    }
}

pub fn fixed_time_site(kind: SiteKind, t: u64) -> FixedTimeState {
    match kind {
        SiteKind::Intersection => fixed_time_intersection(t),
        SiteKind::MidBlock => fixed_time_midblock(t),
    }
}

/// Counts engaged-phase changes over a per-step trace of phases (one row per
/// step, one column per signal).
pub fn count_switches(trace: &[Vec<Phase>]) -> usize {
    trace
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).filter(|(a, b)| a != b).count())
        .sum()
}

/// Which controller drives the corridor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Fixed-time plans everywhere.
    Fixed,
    /// Mid-blocks dark, intersection on its fixed-time plan.
    Unsignalized,
    /// Policy actions through the interlock.
    Rl,
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" | "signalized" => Ok(ControllerKind::Fixed),
            "unsignalized" => Ok(ControllerKind::Unsignalized),
            "rl" => Ok(ControllerKind::Rl),
            other => Err(Error::Range(format!("unknown controller `{other}`"))),
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerKind::Fixed => "fixed",
            ControllerKind::Unsignalized => "unsignalized",
            ControllerKind::Rl => "rl",
        })
    }
}

/// Live signal state of the whole corridor.
#[derive(Debug, Clone, PartialEq)]
pub enum CorridorSignals {
    /// Every site runs its fixed-time plan, optionally with dark mid-blocks.
    FixedTime { dark_midblocks: bool },
    Interlocked(Vec<Interlock>),
}

impl CorridorSignals {
    /// Switches from fixed-time to interlocked control at step `t` without
    /// truncating any running transition.
    pub fn handover(net: &CorridorNetwork, t: u64) -> Self {
        CorridorSignals::Interlocked(
            net.signals
                .iter()
                .map(|s| Interlock::from_fixed(&fixed_time_site(s.kind, t)))
                .collect(),
        )
    }

    /// Lights for step `t` plus the engaged phase of every site.
    pub fn advance(&mut self, net: &CorridorNetwork, t: u64) -> (Vec<SiteSignal>, Vec<Phase>) {
        match self {
            CorridorSignals::FixedTime { dark_midblocks } => net
                .signals
                .iter()
                .map(|s| {
                    let st = fixed_time_site(s.kind, t);
                    let sig = if *dark_midblocks && s.kind == SiteKind::MidBlock {
                        SiteSignal::Dark
                    } else {
                        SiteSignal::Lit(st.lights)
                    };
                    (sig, st.phase)
                })
                .unzip(),
            CorridorSignals::Interlocked(locks) => locks
                .iter_mut()
                .map(|l| {
                    let (lights, _) = l.advance();
                    (SiteSignal::Lit(lights), l.current())
                })
                .unzip(),
        }
    }

    pub fn request(&mut self, phases: &[Phase]) -> Result<()> {
        match self {
            CorridorSignals::Interlocked(locks) => {
                if phases.len() != locks.len() {
                    return Err(Error::Range(format!(
                        "expected {} phases, got {}",
                        locks.len(),
                        phases.len()
                    )));
                }
                for (l, &p) in locks.iter_mut().zip(phases) {
                    l.request(p)?;
                }
                Ok(())
            }
            CorridorSignals::FixedTime { .. } => Err(Error::Domain(
                "fixed-time signals do not accept phase requests".into(),
            )),
        }
    }
}

/// Checks one movement's light sequence: every green-to-red change must pass
/// through exactly `YELLOW_STEPS` yellow steps.
pub fn yellow_rule_holds(seq: &[Light]) -> bool {
    let mut i = 0;
    while i < seq.len() {
        match seq[i] {
            Light::Yellow => {
                let start = i;
                while i < seq.len() && seq[i] == Light::Yellow {
                    i += 1;
                }
                let run = i - start;
                let preceded_by_green = start > 0 && seq[start - 1] == Light::Green;
                let truncated = start == 0 || i == seq.len();
                if !truncated && (run != YELLOW_STEPS as usize || !preceded_by_green) {
                    return false;
                }
            }
            Light::Green => {
                if i + 1 < seq.len() && seq[i + 1] == Light::Red {
                    return false;
                }
                i += 1;
            }
            Light::Red => i += 1,
        }
    }
    true
}
