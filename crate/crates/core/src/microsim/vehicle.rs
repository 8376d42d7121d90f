use serde::{Deserialize, Serialize};

use crate::demand::{Endpoint, VehicleTrip};
use crate::error::{Error, Result};
use crate::network::{CorridorNetwork, Lane};
use crate::signal::Movement;

use super::WaitClock;

/// What happens when a vehicle reaches the end of a route leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LegExit {
    Leave,
    /// Merge onto an arterial lane at the junction centre.
    Insert(Lane),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteLeg {
    pub lane: Lane,
    pub start_m: f64,
    pub end_m: f64,
    /// Signal movement used at the intersection.
    pub movement: Movement,
    pub exit: LegExit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Turn {
    Through,
    Left,
    Right,
}

fn entry_lane(origin: Endpoint) -> Lane {
    match origin {
        Endpoint::South => Lane::Northbound,
        Endpoint::North => Lane::Southbound,
        Endpoint::West => Lane::Eastbound,
        Endpoint::East => Lane::Westbound,
    }
}

fn turn(origin: Endpoint, destination: Endpoint) -> Option<Turn> {
    use Endpoint::*;
    Some(match (origin, destination) {
        (South, North) | (North, South) | (West, East) | (East, West) => Turn::Through,
        (South, West) | (North, East) | (West, North) | (East, South) => Turn::Left,
        (South, East) | (North, West) | (West, South) | (East, North) => Turn::Right,
        _ => return None,
    })
}

/// Lane legs a vehicle follows from its origin to its destination.
pub fn vehicle_route(net: &CorridorNetwork, trip: &VehicleTrip) -> Result<Vec<RouteLeg>> {
    let bad = || {
        Error::Domain(format!(
            "no route from {:?} to {:?} on this network",
            trip.origin, trip.destination
        ))
    };
    let turn = turn(trip.origin, trip.destination).ok_or_else(bad)?;
    let lane = entry_lane(trip.origin);
    if !net.lane_exists(lane) || (turn != Turn::Through && !net.cross_street_at_int) {
        return Err(bad());
    }
    let left = turn == Turn::Left;
    if lane.is_arterial() {
        let movement = if left { Movement::ArterialLeft } else { Movement::ArterialThrough };
        let end_m = match turn {
            Turn::Through => net.lane_length(lane),
            _ => net.junction_centre(lane),
        };
        return Ok(vec![RouteLeg {
            lane,
            start_m: 0.0,
            end_m,
            movement,
            exit: LegExit::Leave,
        }]);
    }
    let movement = if left { Movement::CrossLeft } else { Movement::CrossThrough };
    if turn == Turn::Through {
        return Ok(vec![RouteLeg {
            lane,
            start_m: 0.0,
            end_m: net.lane_length(lane),
            movement,
            exit: LegExit::Leave,
        }]);
    }
    let target = if trip.destination == Endpoint::North { Lane::Northbound } else { Lane::Southbound };
    Ok(vec![
        RouteLeg {
            lane,
            start_m: 0.0,
            end_m: net.junction_centre(lane),
            movement,
            exit: LegExit::Insert(target),
        },
        RouteLeg {
            lane: target,
            start_m: net.junction_centre(target),
            end_m: net.lane_length(target),
            movement: Movement::ArterialThrough,
            exit: LegExit::Leave,
        },
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u64,
    pub trip: VehicleTrip,
    pub legs: Vec<RouteLeg>,
    pub leg: usize,
    /// Front bumper in the current lane's travel coordinate.
    pub pos_m: f64,
    pub speed: f64,
    /// Sites whose stop line this vehicle decided to pass on yellow.
    pub committed: Vec<usize>,
    pub wait: WaitClock,
    pub spawn_s: f64,
}

impl Vehicle {
    pub fn route_leg(&self) -> &RouteLeg {
        &self.legs[self.leg]
    }

    pub fn lane(&self) -> Lane {
        self.legs[self.leg].lane
    }
}
