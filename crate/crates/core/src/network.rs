//! Corridor geometry: one arterial with a single signalized intersection and
//! a row of mid-block crosswalks.
//!
//! Geometry is one-dimensional. The arterial runs south to north from `x = 0`
//! to `x = length_m`, with one lane per direction and a sidewalk on each side.
//! The intersecting street is represented by two stub approaches (eastbound
//! and westbound) that end at the junction.
//!
//! Every vehicle lane has its own travel coordinate that increases in the
//! direction of travel. Stop lines sit at the upstream edge of each crosswalk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FULL_MIDBLOCKS: usize = 7;
pub const INTERSECTION_CROSSWALKS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    Intersection,
    MidBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneSpec {
    pub upstream_m: f64,
    pub downstream_m: f64,
}

impl ZoneSpec {
    pub const VEHICLE_DEFAULT: ZoneSpec = ZoneSpec {
        upstream_m: 50.0,
        downstream_m: 20.0,
    };
    pub const PEDESTRIAN_DEFAULT: ZoneSpec = ZoneSpec {
        upstream_m: 8.0,
        downstream_m: 8.0,
    };
}

/// Which road a crosswalk crosses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spans {
    /// Crosses the arterial (connects the east and west sidewalks).
    Arterial,
    /// Crosses the intersecting street along one arterial sidewalk.
    CrossStreet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leg {
    North,
    South,
    East,
    West,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crosswalk {
    pub leg: Option<Leg>,
    pub spans: Spans,
    /// Longitudinal position of the crosswalk centre along the arterial.
    pub position_m: f64,
    /// Walking distance from curb to curb.
    pub length_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSite {
    pub id: usize,
    pub kind: SiteKind,
    pub position_m: f64,
    pub crosswalks: Vec<Crosswalk>,
    pub veh_zone: ZoneSpec,
    pub ped_zone: ZoneSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    Vehicle,
    Pedestrian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Zone {
    Incoming,
    Inside,
    Outgoing,
    None,
}

/// Vehicle lanes. Cross-street stubs only exist when the network has an
/// intersecting street.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Lane {
    Northbound,
    Southbound,
    Eastbound,
    Westbound,
}

impl Lane {
    pub const ALL: [Lane; 4] = [
        Lane::Northbound,
        Lane::Southbound,
        Lane::Eastbound,
        Lane::Westbound,
    ];

    pub fn is_arterial(self) -> bool {
        matches!(self, Lane::Northbound | Lane::Southbound)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Lane::Northbound => "nb",
            Lane::Southbound => "sb",
            Lane::Eastbound => "eb",
            Lane::Westbound => "wb",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    pub kind: SiteKind,
    pub position_m: f64,
    #[serde(default)]
    pub veh_zone: Option<ZoneSpec>,
    #[serde(default)]
    pub ped_zone: Option<ZoneSpec>,
}

/// On-disk network description (TOML). See the README for the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub length_m: f64,
    pub main_lanes_per_direction: u32,
    pub cross_street_at_int: bool,
    pub sidewalk_width_m: f64,
    /// Width of the painted crosswalk band, measured along the road.
    pub crossing_width_m: f64,
    /// Curb-to-curb distance of every crosswalk (also the width of the
    /// intersecting street and of the arterial).
    pub crosswalk_length_m: f64,
    pub cross_approach_m: f64,
    pub speed_limit_mps: f64,
    pub ped_speed_mps: f64,
    /// Relax the one-intersection-plus-seven-mid-blocks count check.
    pub mini: bool,
    pub sites: Vec<SiteConfig>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let sites = (0..8)
            .map(|k| SiteConfig {
                kind: if k == 3 {
                    SiteKind::Intersection
                } else {
                    SiteKind::MidBlock
                },
                position_m: 60.0 + 90.0 * k as f64,
                veh_zone: None,
                ped_zone: None,
            })
            .collect();
        NetworkConfig {
            length_m: 750.0,
            main_lanes_per_direction: 1,
            cross_street_at_int: true,
            sidewalk_width_m: 4.0,
            crossing_width_m: 4.0,
            // 32 ft
            crosswalk_length_m: 9.75,
            cross_approach_m: 100.0,
            speed_limit_mps: 13.89,
            ped_speed_mps: 2.78,
            mini: false,
            sites,
        }
    }
}

impl NetworkConfig {
    /// Desk-scale network: 200 m with one intersection flanked by two
    /// mid-block crosswalks.
    pub fn mini() -> Self {
        let site = |kind, position_m| SiteConfig {
            kind,
            position_m,
            veh_zone: None,
            ped_zone: None,
        };
        NetworkConfig {
            length_m: 200.0,
            mini: true,
            sites: vec![
                site(SiteKind::MidBlock, 40.0),
                site(SiteKind::Intersection, 100.0),
                site(SiteKind::MidBlock, 160.0),
            ],
            ..NetworkConfig::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("network", e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

/// Immutable corridor geometry. Shareable across simulation instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorNetwork {
    pub length_m: f64,
    pub signals: Vec<SignalSite>,
    pub main_lanes_per_direction: u32,
    pub cross_street_at_int: bool,
    pub sidewalk_width_m: f64,
    pub crossing_width_m: f64,
    pub crosswalk_length_m: f64,
    pub cross_approach_m: f64,
    pub speed_limit_mps: f64,
    pub ped_speed_mps: f64,
    pub mini: bool,
    intersection: usize,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite and > 0, got {v}")))
    }
}

fn check_zone(field: &str, zone: &ZoneSpec, lo: f64, hi: f64) -> Result<()> {
    if !(zone.upstream_m.is_finite() && (lo..=hi).contains(&zone.upstream_m)) {
        return Err(Error::config(
            format!("{field}.upstream_m"),
            format!("must lie in [{lo}, {hi}], got {}", zone.upstream_m),
        ));
    }
    positive(&format!("{field}.downstream_m"), zone.downstream_m)
}

/// Builds and validates a corridor from its configuration.
pub fn build_corridor(config: &NetworkConfig) -> Result<CorridorNetwork> {
    positive("length_m", config.length_m)?;
    positive("sidewalk_width_m", config.sidewalk_width_m)?;
    positive("crossing_width_m", config.crossing_width_m)?;
    positive("crosswalk_length_m", config.crosswalk_length_m)?;
    positive("cross_approach_m", config.cross_approach_m)?;
    positive("speed_limit_mps", config.speed_limit_mps)?;
    positive("ped_speed_mps", config.ped_speed_mps)?;
    if config.main_lanes_per_direction != 1 {
        return Err(Error::config(
            "main_lanes_per_direction",
            "only single-lane approaches are modeled",
        ));
    }

    let n_int = config
        .sites
        .iter()
        .filter(|s| s.kind == SiteKind::Intersection)
        .count();
    let n_mb = config.sites.len() - n_int;
    if n_int != 1 {
        return Err(Error::config(
            "sites",
            format!("expected exactly 1 intersection site, found {n_int}"),
        ));
    }
    if config.mini {
        if n_mb == 0 {
            return Err(Error::config("sites", "expected at least 1 mid-block site"));
        }
    } else if n_mb != FULL_MIDBLOCKS {
        return Err(Error::config(
            "sites",
            format!("expected {FULL_MIDBLOCKS} mid-block sites, found {n_mb}"),
        ));
    }

    let mut prev = f64::NEG_INFINITY;
    let mut signals = Vec::with_capacity(config.sites.len());
    let mut intersection = 0;
    for (id, site) in config.sites.iter().enumerate() {
        let field = format!("sites[{id}]");
        let x = site.position_m;
        if !x.is_finite() || x < 0.0 || x > config.length_m {
            return Err(Error::config(
                format!("{field}.position_m"),
                format!("must lie within [0, {}], got {x}", config.length_m),
            ));
        }
        if x <= prev {
            return Err(Error::config(
                format!("{field}.position_m"),
                "site positions must be strictly increasing",
            ));
        }
        prev = x;
        let veh_zone = site.veh_zone.unwrap_or(ZoneSpec::VEHICLE_DEFAULT);
        let ped_zone = site.ped_zone.unwrap_or(ZoneSpec::PEDESTRIAN_DEFAULT);
        check_zone(&format!("{field}.veh_zone"), &veh_zone, 15.0, 100.0)?;
        check_zone(&format!("{field}.ped_zone"), &ped_zone, 5.0, 10.0)?;

        let len = config.crosswalk_length_m;
        let crosswalks = match site.kind {
            SiteKind::MidBlock => vec![Crosswalk {
                leg: None,
                spans: Spans::Arterial,
                position_m: x,
                length_m: len,
            }],
            SiteKind::Intersection => {
                intersection = id;
                let off = len / 2.0 + config.crossing_width_m / 2.0;
                vec![
                    Crosswalk {
                        leg: Some(Leg::South),
                        spans: Spans::Arterial,
                        position_m: x - off,
                        length_m: len,
                    },
                    Crosswalk {
                        leg: Some(Leg::North),
                        spans: Spans::Arterial,
                        position_m: x + off,
                        length_m: len,
                    },
                    Crosswalk {
                        leg: Some(Leg::West),
                        spans: Spans::CrossStreet,
                        position_m: x,
                        length_m: len,
                    },
                    Crosswalk {
                        leg: Some(Leg::East),
                        spans: Spans::CrossStreet,
                        position_m: x,
                        length_m: len,
                    },
                ]
            }
        };
        signals.push(SignalSite {
            id,
            kind: site.kind,
            position_m: x,
            crosswalks,
            veh_zone,
            ped_zone,
        });
    }

    // Controlled areas must not overlap or leave the corridor.
    let net = CorridorNetwork {
        length_m: config.length_m,
        signals,
        main_lanes_per_direction: config.main_lanes_per_direction,
        cross_street_at_int: config.cross_street_at_int,
        sidewalk_width_m: config.sidewalk_width_m,
        crossing_width_m: config.crossing_width_m,
        crosswalk_length_m: config.crosswalk_length_m,
        cross_approach_m: config.cross_approach_m,
        speed_limit_mps: config.speed_limit_mps,
        ped_speed_mps: config.ped_speed_mps,
        mini: config.mini,
        intersection,
    };
    for pair in net.signals.windows(2) {
        let a = &pair[0];
        let b = &pair[1];
        if a.position_m + net.half_inside(a.id) >= b.position_m - net.half_inside(b.id) {
            return Err(Error::config(
                format!("sites[{}].position_m", b.id),
                "controlled areas of adjacent sites overlap",
            ));
        }
    }
    for s in &net.signals {
        let half = net.half_inside(s.id);
        if s.position_m - half < 0.0 || s.position_m + half > net.length_m {
            return Err(Error::config(
                format!("sites[{}].position_m", s.id),
                "controlled area extends past the corridor ends",
            ));
        }
    }
    Ok(net)
}

impl CorridorNetwork {
    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn intersection_id(&self) -> usize {
        self.intersection
    }

    pub fn intersection(&self) -> &SignalSite {
        &self.signals[self.intersection]
    }

    /// Mid-block site ids in corridor order.
    pub fn midblock_ids(&self) -> Vec<usize> {
        self.signals
            .iter()
            .filter(|s| s.kind == SiteKind::MidBlock)
            .map(|s| s.id)
            .collect()
    }

    pub fn n_midblocks(&self) -> usize {
        self.signals.len() - 1
    }

    /// Index of a mid-block site among the mid-blocks (0-based), if it is one.
    pub fn midblock_index(&self, site: usize) -> Option<usize> {
        match self.signals.get(site)?.kind {
            SiteKind::Intersection => None,
            SiteKind::MidBlock => Some(if site < self.intersection { site } else { site - 1 }),
        }
    }

    pub fn site(&self, id: usize) -> Result<&SignalSite> {
        self.signals.get(id).ok_or(Error::Index {
            index: id,
            len: self.signals.len(),
        })
    }

    /// Length of the controlled area along a vehicle's path: the crosswalk
    /// band at a mid-block, or band + junction + band at the intersection.
    pub fn inside_len(&self, site: usize) -> f64 {
        match self.signals[site].kind {
            SiteKind::MidBlock => self.crossing_width_m,
            SiteKind::Intersection => 2.0 * self.crossing_width_m + self.crosswalk_length_m,
        }
    }

    pub fn half_inside(&self, site: usize) -> f64 {
        self.inside_len(site) / 2.0
    }

    pub fn lane_exists(&self, lane: Lane) -> bool {
        lane.is_arterial() || self.cross_street_at_int
    }

    /// Travel length of a lane. Cross stubs end at the far edge of the junction.
    pub fn lane_length(&self, lane: Lane) -> f64 {
        if lane.is_arterial() {
            self.length_m
        } else {
            self.cross_approach_m + self.inside_len(self.intersection)
        }
    }

    /// Converts a corridor position to the lane's travel coordinate.
    pub fn lane_coord(&self, lane: Lane, x: f64) -> f64 {
        match lane {
            Lane::Northbound => x,
            Lane::Southbound => self.length_m - x,
            _ => x,
        }
    }

    /// Stop line of `site` in the travel coordinate of `lane`, or `None` if
    /// the lane does not pass the site.
    pub fn stop_line(&self, site: usize, lane: Lane) -> Option<f64> {
        let s = &self.signals[site];
        match lane {
            Lane::Northbound | Lane::Southbound => {
                Some(self.lane_coord(lane, s.position_m) - self.half_inside(site))
            }
            Lane::Eastbound | Lane::Westbound => {
                (s.kind == SiteKind::Intersection && self.cross_street_at_int)
                    .then_some(self.cross_approach_m)
            }
        }
    }

    /// Point inside the junction where turning vehicles leave their lane.
    pub fn junction_centre(&self, lane: Lane) -> f64 {
        let site = self.intersection;
        self.stop_line(site, lane).expect("every lane reaches the junction")
            + self.half_inside(site)
    }

    /// Classifies an agent's longitudinal offset from a site's stop line
    /// (negative upstream, positive past it, in the agent's direction of
    /// travel). For pedestrians the reference is the curb where the crossing
    /// starts; pedestrians on the crosswalk count as outgoing.
    pub fn zone_membership(&self, signal_id: usize, offset_m: f64, kind: AgentKind) -> Result<Zone> {
        let site = self.site(signal_id)?;
        Ok(match kind {
            AgentKind::Vehicle => {
                let inside = self.inside_len(signal_id);
                if offset_m < 0.0 {
                    if offset_m >= -site.veh_zone.upstream_m {
                        Zone::Incoming
                    } else {
                        Zone::None
                    }
                } else if offset_m < inside {
                    Zone::Inside
                } else if offset_m < inside + site.veh_zone.downstream_m {
                    Zone::Outgoing
                } else {
                    Zone::None
                }
            }
            AgentKind::Pedestrian => {
                if offset_m <= 0.0 {
                    if offset_m >= -site.ped_zone.upstream_m {
                        Zone::Incoming
                    } else {
                        Zone::None
                    }
                } else if offset_m <= self.crosswalk_length_m + site.ped_zone.downstream_m {
                    Zone::Outgoing
                } else {
                    Zone::None
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_corridor_matches_reference_layout() {
        let net = build_corridor(&NetworkConfig::default()).unwrap();
        assert_eq!(net.length_m, 750.0);
        assert_eq!(net.n_signals(), 8);
        assert_eq!(net.speed_limit_mps, 13.89);
        assert_eq!(net.n_midblocks(), 7);
        assert_eq!(net.intersection().crosswalks.len(), 4);
        for id in net.midblock_ids() {
            assert_eq!(net.signals[id].crosswalks.len(), 1);
        }
    }

    #[test]
    fn missing_midblocks_rejected() {
        let mut cfg = NetworkConfig::default();
        cfg.sites.retain(|s| s.kind == SiteKind::Intersection);
        let err = build_corridor(&cfg).unwrap_err().to_string();
        assert!(err.contains("expected 7 mid-block sites"), "{err}");
    }

    #[test]
    fn mini_network_relaxes_count() {
        let net = build_corridor(&NetworkConfig::mini()).unwrap();
        assert_eq!(net.n_signals(), 3);
        assert_eq!(net.n_midblocks(), 2);
        assert_eq!(net.intersection_id(), 1);

        let mut cfg = NetworkConfig::mini();
        cfg.mini = false;
        assert!(build_corridor(&cfg).is_err());
    }

    #[test]
    fn invalid_fields_are_named() {
        let cfg = NetworkConfig {
            ped_speed_mps: 0.0,
            ..NetworkConfig::default()
        };
        assert!(build_corridor(&cfg).unwrap_err().to_string().contains("ped_speed_mps"));

        let mut cfg = NetworkConfig::default();
        cfg.sites[2].veh_zone = Some(ZoneSpec {
            upstream_m: 120.0,
            downstream_m: 20.0,
        });
        assert!(build_corridor(&cfg).unwrap_err().to_string().contains("sites[2].veh_zone"));

        let mut cfg = NetworkConfig::default();
        cfg.sites[4].position_m = cfg.sites[3].position_m;
        assert!(build_corridor(&cfg).unwrap_err().to_string().contains("sites[4].position_m"));

        let mut cfg = NetworkConfig::default();
        cfg.sites[0].ped_zone = Some(ZoneSpec {
            upstream_m: 4.0,
            downstream_m: 8.0,
        });
        assert!(build_corridor(&cfg).is_err());
    }

    #[test]
    fn zone_examples() {
        let net = build_corridor(&NetworkConfig::default()).unwrap();
        let mb3 = net.midblock_ids()[2];
        let mut cfg = NetworkConfig::default();
        cfg.sites[mb3].veh_zone = Some(ZoneSpec {
            upstream_m: 100.0,
            downstream_m: 20.0,
        });
        let wide = build_corridor(&cfg).unwrap();

        assert_eq!(net.zone_membership(mb3, -30.0, AgentKind::Vehicle).unwrap(), Zone::Incoming);
        assert_eq!(wide.zone_membership(mb3, -120.0, AgentKind::Vehicle).unwrap(), Zone::None);
        assert_eq!(net.zone_membership(mb3, 1.0, AgentKind::Vehicle).unwrap(), Zone::Inside);
        assert_eq!(net.zone_membership(mb3, 10.0, AgentKind::Vehicle).unwrap(), Zone::Outgoing);
        assert_eq!(
            net.zone_membership(mb3, -6.0, AgentKind::Pedestrian).unwrap(),
            Zone::Incoming
        );
        assert_eq!(
            net.zone_membership(mb3, 3.0, AgentKind::Pedestrian).unwrap(),
            Zone::Outgoing
        );
        assert!(matches!(
            net.zone_membership(9, 0.0, AgentKind::Vehicle),
            Err(Error::Index { index: 9, .. })
        ));
    }

    #[test]
    fn stop_lines_mirror_between_directions() {
        let net = build_corridor(&NetworkConfig::default()).unwrap();
        for s in 0..net.n_signals() {
            let nb = net.stop_line(s, Lane::Northbound).unwrap();
            let sb = net.stop_line(s, Lane::Southbound).unwrap();
            let inside = net.inside_len(s);
            assert!((nb + inside + sb - net.length_m).abs() < 1e-9);
        }
        assert!(net.stop_line(0, Lane::Eastbound).is_none());
        assert_eq!(net.stop_line(net.intersection_id(), Lane::Eastbound), Some(100.0));
    }

    #[test]
    fn toml_round_trip_is_deterministic() {
        let text = toml::to_string(&NetworkConfig::default()).unwrap();
        let a = build_corridor(&NetworkConfig::from_toml_str(&text).unwrap()).unwrap();
        let b = build_corridor(&NetworkConfig::from_toml_str(&text).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, build_corridor(&NetworkConfig::default()).unwrap());
    }
}
