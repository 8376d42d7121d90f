use serde::{Deserialize, Serialize};

use crate::demand::{PedestrianTrip, Side};
use crate::error::{Error, Result};
use crate::network::{CorridorNetwork, Leg, SiteKind};
use crate::signal::Movement;

use super::WaitClock;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PedLeg {
    /// Walk along the current sidewalk to `to_m`.
    Walk { to_m: f64 },
    Cross {
        site: usize,
        crosswalk: usize,
        movement: Movement,
        length_m: f64,
        exit_side: Side,
        exit_m: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PedState {
    Walking,
    /// Standing at the curb. `steps` counts completed waiting steps.
    Queued { steps: u32 },
    Crossing { progress_m: f64 },
}

/// Progress through one crossing leg of a pedestrian's route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrossingState {
    Approaching,
    Queued,
    Crossing,
    Done,
}

impl PedState {
    pub fn label(&self) -> &'static str {
        match self {
            PedState::Walking => "walk",
            PedState::Queued { .. } => "queue",
            PedState::Crossing { .. } => "cross",
        }
    }
}

fn crosswalk_index(net: &CorridorNetwork, site: usize, leg: Option<Leg>) -> Result<usize> {
    net.signals[site]
        .crosswalks
        .iter()
        .position(|c| c.leg == leg)
        .ok_or_else(|| Error::Domain(format!("site {site} has no crosswalk on leg {leg:?}")))
}

fn cross_leg(net: &CorridorNetwork, site: usize, leg: Option<Leg>, exit_side: Side, exit_m: f64) -> Result<PedLeg> {
    let crosswalk = crosswalk_index(net, site, leg)?;
    let movement = match leg {
        None => Movement::MbPedestrian,
        Some(Leg::North | Leg::South) => Movement::PedArterial,
        Some(Leg::East | Leg::West) => Movement::PedCross,
    };
    Ok(PedLeg::Cross {
        site,
        crosswalk,
        movement,
        length_m: net.signals[site].crosswalks[crosswalk].length_m,
        exit_side,
        exit_m,
    })
}

fn walk(net: &CorridorNetwork, side: Side, from: f64, to: f64, legs: &mut Vec<PedLeg>) -> Result<()> {
    if net.cross_street_at_int {
        let int = net.intersection_id();
        let p = net.intersection().position_m;
        let half = net.crosswalk_length_m / 2.0;
        let (lo, hi) = (from.min(to), from.max(to));
        if lo < p - half && hi > p + half {
            let dir = (to - from).signum();
            let near = p - dir * half;
            let far = p + dir * half;
            let leg = match side {
                Side::West => Leg::West,
                Side::East => Leg::East,
            };
            legs.push(PedLeg::Walk { to_m: near });
            legs.push(cross_leg(net, int, Some(leg), side, far)?);
            legs.push(PedLeg::Walk { to_m: to });
            return Ok(());
        }
    }
    legs.push(PedLeg::Walk { to_m: to });
    Ok(())
}

/// Walking and crossing legs for a pedestrian trip.
pub fn pedestrian_route(net: &CorridorNetwork, trip: &PedestrianTrip) -> Result<Vec<PedLeg>> {
    let mut legs = Vec::new();
    let mut side = trip.origin_side;
    let mut x = trip.origin_m;
    if let Some(site) = trip.crossing_site {
        let s = net.site(site)?;
        let (leg, curb) = match s.kind {
            SiteKind::MidBlock => (None, s.position_m),
            SiteKind::Intersection => {
                let want = if x < s.position_m { Leg::South } else { Leg::North };
                let idx = crosswalk_index(net, site, Some(want))?;
                (Some(want), s.crosswalks[idx].position_m)
            }
        };
        walk(net, side, x, curb, &mut legs)?;
        side = side.other();
        legs.push(cross_leg(net, site, leg, side, curb)?);
        x = curb;
    }
    if side != trip.destination_side {
        return Err(Error::Domain("pedestrian trip changes side without a crossing".into()));
    }
    walk(net, side, x, trip.destination_m, &mut legs)?;
    Ok(legs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pedestrian {
    pub id: u64,
    pub legs: Vec<PedLeg>,
    pub leg: usize,
    pub side: Side,
    pub x_m: f64,
    pub state: PedState,
    pub speed: f64,
    /// Most recent crossing and the walked offset from its starting curb.
    pub last_crossing: Option<(usize, f64)>,
    pub wait: WaitClock,
    pub spawn_s: f64,
}

impl Pedestrian {
    /// Site and curb distance of the next crossing, if the pedestrian is
    /// walking towards or queued at one.
    pub fn next_crossing(&self) -> Option<(usize, f64)> {
        match (self.legs.get(self.leg)?, self.state) {
            (PedLeg::Cross { site, .. }, PedState::Queued { .. }) => Some((*site, 0.0)),
            (PedLeg::Walk { to_m }, PedState::Walking) => match self.legs.get(self.leg + 1)? {
                PedLeg::Cross { site, .. } => Some((*site, (to_m - self.x_m).abs())),
                PedLeg::Walk { .. } => None,
            },
            _ => None,
        }
    }

    /// Site of the crossing this pedestrian is on or queued for.
    pub fn claimed_site(&self) -> Option<usize> {
        match (self.legs.get(self.leg)?, self.state) {
            (PedLeg::Cross { site, .. }, PedState::Queued { .. } | PedState::Crossing { .. }) => Some(*site),
            _ => None,
        }
    }

    /// State of the crossing at route leg `leg`.
    pub fn crossing_state(&self, leg: usize) -> CrossingState {
        use std::cmp::Ordering::*;
        match self.leg.cmp(&leg) {
            Less => CrossingState::Approaching,
            Greater => CrossingState::Done,
            Equal => match self.state {
                PedState::Walking => CrossingState::Approaching,
                PedState::Queued { .. } => CrossingState::Queued,
                PedState::Crossing { .. } => CrossingState::Crossing,
            },
        }
    }

    pub fn crossing_site(&self) -> Option<usize> {
        match (self.legs.get(self.leg)?, self.state) {
            (PedLeg::Cross { site, .. }, PedState::Crossing { .. }) => Some(*site),
            _ => None,
        }
    }
}
