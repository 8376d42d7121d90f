//! Poisson trip schedules for vehicles and pedestrians.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::CorridorNetwork;

/// Where vehicles enter and leave the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    /// South end of the arterial.
    South,
    North,
    /// West end of the cross street.
    West,
    East,
}

impl Endpoint {
    pub const ALL: [Endpoint; 4] = [Endpoint::South, Endpoint::North, Endpoint::West, Endpoint::East];

    pub fn is_arterial(self) -> bool {
        matches!(self, Endpoint::South | Endpoint::North)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    West,
    East,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::West => Side::East,
            Side::East => Side::West,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleTrip {
    pub origin: Endpoint,
    pub destination: Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedestrianTrip {
    pub origin_side: Side,
    pub origin_m: f64,
    pub destination_side: Side,
    pub destination_m: f64,
    /// Site used to cross the arterial; `None` for sidewalk-only trips.
    pub crossing_site: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Trip {
    Vehicle(VehicleTrip),
    Pedestrian(PedestrianTrip),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripEvent {
    pub spawn_time_s: f64,
    pub trip: Trip,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DemandSchedule {
    pub events: Vec<TripEvent>,
}

impl DemandSchedule {
    pub fn vehicles(&self) -> impl Iterator<Item = &VehicleTrip> {
        self.events.iter().filter_map(|e| match &e.trip {
            Trip::Vehicle(v) => Some(v),
            _ => None,
        })
    }

    pub fn pedestrians(&self) -> impl Iterator<Item = &PedestrianTrip> {
        self.events.iter().filter_map(|e| match &e.trip {
            Trip::Pedestrian(p) => Some(p),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdWeights {
    /// Origin/destination weights of the vehicle endpoints, ordered
    /// south, north, west, east.
    pub vehicle_endpoints: [f64; 4],
    /// Weight of each site as a crossing location; uniform when empty.
    pub crossing_sites: Vec<f64>,
}

impl Default for OdWeights {
    fn default() -> Self {
        OdWeights {
            vehicle_endpoints: [1.0; 4],
            crossing_sites: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandRates {
    pub ped_per_hr: f64,
    pub veh_per_hr: f64,
    pub crossing_fraction: f64,
    /// Half-width of the sidewalk stretch around a crossing site where its
    /// pedestrians start and end.
    pub access_radius_m: f64,
    pub od_weights: OdWeights,
}

impl Default for DemandRates {
    fn default() -> Self {
        DemandRates {
            ped_per_hr: 2223.0,
            veh_per_hr: 202.0,
            crossing_fraction: 0.44,
            access_radius_m: 40.0,
            od_weights: OdWeights::default(),
        }
    }
}

impl DemandRates {
    /// Pedestrian demand prorated to the number of sites so that each site
    /// sees the same crossing load as on the full corridor.
    pub fn for_network(net: &CorridorNetwork) -> Self {
        let base = DemandRates::default();
        DemandRates {
            ped_per_hr: base.ped_per_hr * net.n_signals() as f64 / 8.0,
            access_radius_m: if net.mini { 25.0 } else { base.access_radius_m },
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("ped_per_hr", self.ped_per_hr), ("veh_per_hr", self.veh_per_hr)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.crossing_fraction) {
            return Err(Error::config("crossing_fraction", "must lie in [0, 1]"));
        }
        if !(self.access_radius_m.is_finite() && self.access_radius_m >= 0.0) {
            return Err(Error::config("access_radius_m", "must be finite and >= 0"));
        }
        let w = &self.od_weights;
        if w.vehicle_endpoints.iter().any(|x| !x.is_finite() || *x < 0.0)
            || w.crossing_sites.iter().any(|x| !x.is_finite() || *x < 0.0)
        {
            return Err(Error::config("od_weights", "weights must be finite and >= 0"));
        }
        Ok(())
    }
}

pub const MIN_SCALE: f64 = 0.25;
pub const MAX_SCALE: f64 = 4.0;

fn poisson_times(rng: &mut ChaCha8Rng, per_hr: f64, horizon_s: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if per_hr <= 0.0 {
        return out;
    }
    let exp = Exp::new(per_hr / 3600.0).expect("rate is positive");
    let mut t = exp.sample(rng);
    while t < horizon_s {
        out.push(t);
        t += exp.sample(rng);
    }
    out
}

/// Sidewalk position outside the cross-street gap, clamped to the corridor.
fn sidewalk_point(net: &CorridorNetwork, x: f64) -> f64 {
    let x = x.clamp(0.0, net.length_m);
    if !net.cross_street_at_int {
        return x;
    }
    let p = net.intersection().position_m;
    let half = net.crosswalk_length_m / 2.0;
    if (x - p).abs() <= half {
        if x < p { p - half - 0.5 } else { p + half + 0.5 }
    } else {
        x
    }
}

/// Generates a demand schedule. `scale = 0` yields an empty schedule; other
/// scales must lie in `[0.25, 4]`.
pub fn generate_trips(
    net: &CorridorNetwork,
    rates: &DemandRates,
    scale: f64,
    horizon_s: f64,
    seed: u64,
) -> Result<DemandSchedule> {
    rates.validate()?;
    if !(horizon_s.is_finite() && horizon_s > 0.0) {
        return Err(Error::Range(format!("horizon must be > 0, got {horizon_s}")));
    }
    if scale == 0.0 {
        return Ok(DemandSchedule::default());
    }
    if !(MIN_SCALE..=MAX_SCALE).contains(&scale) {
        return Err(Error::Range(format!(
            "demand scale must be 0 or lie in [{MIN_SCALE}, {MAX_SCALE}], got {scale}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let endpoints: Vec<Endpoint> = Endpoint::ALL
        .into_iter()
        .filter(|e| e.is_arterial() || net.cross_street_at_int)
        .collect();
    let endpoint_w: Vec<f64> = endpoints
        .iter()
        .map(|e| rates.od_weights.vehicle_endpoints[*e as usize])
        .collect();
    let site_w = if rates.od_weights.crossing_sites.is_empty() {
        vec![1.0; net.n_signals()]
    } else if rates.od_weights.crossing_sites.len() == net.n_signals() {
        rates.od_weights.crossing_sites.clone()
    } else {
        return Err(Error::config(
            "od_weights.crossing_sites",
            format!("expected {} weights", net.n_signals()),
        ));
    };
    let site_pick = WeightedIndex::new(&site_w)
        .map_err(|e| Error::config("od_weights.crossing_sites", e.to_string()))?;

    let mut events = Vec::new();
    for t in poisson_times(&mut rng, rates.veh_per_hr * scale, horizon_s) {
        let o = WeightedIndex::new(&endpoint_w)
            .map_err(|e| Error::config("od_weights.vehicle_endpoints", e.to_string()))?
            .sample(&mut rng);
        let mut dest_w = endpoint_w.clone();
        dest_w[o] = 0.0;
        let d = WeightedIndex::new(&dest_w)
            .map_err(|e| Error::config("od_weights.vehicle_endpoints", e.to_string()))?
            .sample(&mut rng);
        events.push(TripEvent {
            spawn_time_s: t,
            trip: Trip::Vehicle(VehicleTrip {
                origin: endpoints[o],
                destination: endpoints[d],
            }),
        });
    }

    let r = rates.access_radius_m;
    for t in poisson_times(&mut rng, rates.ped_per_hr * scale, horizon_s) {
        let origin_side = if rng.random::<bool>() { Side::East } else { Side::West };
        let trip = if rng.random::<f64>() < rates.crossing_fraction {
            let site = site_pick.sample(&mut rng);
            let x = net.signals[site].position_m;
            PedestrianTrip {
                origin_side,
                origin_m: sidewalk_point(net, x + rng.random_range(-r..=r)),
                destination_side: origin_side.other(),
                destination_m: sidewalk_point(net, x + rng.random_range(-r..=r)),
                crossing_site: Some(site),
            }
        } else {
            PedestrianTrip {
                origin_side,
                origin_m: sidewalk_point(net, rng.random_range(0.0..=net.length_m)),
                destination_side: origin_side,
                destination_m: sidewalk_point(net, rng.random_range(0.0..=net.length_m)),
                crossing_site: None,
            }
        };
        events.push(TripEvent {
            spawn_time_s: t,
            trip: Trip::Pedestrian(trip),
        });
    }
    events.sort_by(|a, b| a.spawn_time_s.total_cmp(&b.spawn_time_s));
    Ok(DemandSchedule { events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_corridor, NetworkConfig};

    fn net() -> CorridorNetwork {
        build_corridor(&NetworkConfig::default()).unwrap()
    }

    #[test]
    fn zero_scale_is_empty() {
        let s = generate_trips(&net(), &DemandRates::default(), 0.0, 3600.0, 1).unwrap();
        assert!(s.events.is_empty());
    }

    #[test]
    fn out_of_range_scale_rejected() {
        for bad in [-1.0, 0.1, 4.5, f64::NAN] {
            assert!(matches!(
                generate_trips(&net(), &DemandRates::default(), bad, 3600.0, 1),
                Err(Error::Range(_))
            ));
        }
    }

    #[test]
    fn deterministic_and_sorted() {
        let a = generate_trips(&net(), &DemandRates::default(), 1.5, 900.0, 42).unwrap();
        let b = generate_trips(&net(), &DemandRates::default(), 1.5, 900.0, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.events.windows(2).all(|w| w[0].spawn_time_s <= w[1].spawn_time_s));
        assert!(a.events.iter().all(|e| (0.0..900.0).contains(&e.spawn_time_s)));
    }

    #[test]
    fn endpoints_are_valid() {
        let n = net();
        let s = generate_trips(&n, &DemandRates::default(), 2.0, 3600.0, 3).unwrap();
        let p = n.intersection().position_m;
        for v in s.vehicles() {
            assert_ne!(v.origin, v.destination);
        }
        for ped in s.pedestrians() {
            for x in [ped.origin_m, ped.destination_m] {
                assert!((0.0..=n.length_m).contains(&x));
                assert!((x - p).abs() > n.crosswalk_length_m / 2.0);
            }
            match ped.crossing_site {
                Some(site) => {
                    assert!(site < n.n_signals());
                    assert_ne!(ped.origin_side, ped.destination_side);
                }
                None => assert_eq!(ped.origin_side, ped.destination_side),
            }
        }
    }

    #[test]
    fn crossing_weights_are_honoured() {
        let n = net();
        let mut rates = DemandRates::default();
        rates.od_weights.crossing_sites = vec![0.0; 8];
        rates.od_weights.crossing_sites[5] = 1.0;
        let s = generate_trips(&n, &rates, 1.0, 3600.0, 9).unwrap();
        assert!(s
            .pedestrians()
            .filter_map(|p| p.crossing_site)
            .all(|site| site == 5));
        rates.od_weights.crossing_sites = vec![1.0; 3];
        assert!(generate_trips(&n, &rates, 1.0, 3600.0, 9).is_err());
    }
}
