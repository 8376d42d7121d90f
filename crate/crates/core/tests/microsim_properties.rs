mod common;

use common::{audit_physics, Control};
use corridor_atsc::demand::{DemandSchedule, Endpoint, VehicleTrip};
use corridor_atsc::microsim::{SimConfig, Simulation};
use corridor_atsc::network::{build_corridor, NetworkConfig};
use corridor_atsc::signal::{CorridorSignals, IntersectionPhase, Interlock, MidBlockPhase, Phase};
use proptest::prelude::*;

fn full() -> corridor_atsc::network::CorridorNetwork {
    build_corridor(&NetworkConfig::default()).unwrap()
}

#[test]
fn physics_holds_under_every_controller() {
    let net = full();
    for control in [Control::Fixed, Control::Unsignalized, Control::RandomInterlock] {
        let a = audit_physics(&net, control, 2.75, 3_500, 21);
        assert!(a.vehicle_observations > 10_000, "{control:?}: {a:?}");
        assert_eq!(a.collisions, 0, "{control:?}: {a:?}");
        assert_eq!(a.speed_violations, 0, "{control:?}: {a:?}");
        assert_eq!(a.ped_speed_violations, 0, "{control:?}: {a:?}");
        assert_eq!(a.wait_decreases, 0, "{control:?}: {a:?}");
        assert_eq!(a.crossing_order_violations, 0, "{control:?}: {a:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn physics_holds_for_random_demand(seed in any::<u64>(), scale in 0.25f64..4.0, mini in any::<bool>()) {
        let net = build_corridor(&if mini { NetworkConfig::mini() } else { NetworkConfig::default() }).unwrap();
        let a = audit_physics(&net, Control::RandomInterlock, scale, 1_300, seed);
        prop_assert_eq!(a.collisions, 0, "{:?}", a);
        prop_assert_eq!(a.speed_violations + a.ped_speed_violations, 0, "{:?}", a);
        prop_assert_eq!(a.wait_decreases + a.crossing_order_violations, 0, "{:?}", a);
    }
}

/// Ten northbound vehicles held by a permanent red at the first site.
#[test]
fn platoon_behind_red_never_collides_and_waits_replay_from_trace() {
    let net = full();
    let mut cfg = SimConfig::for_network(&net);
    cfg.record_trace = true;
    let mut locks: Vec<Interlock> = net
        .signals
        .iter()
        .map(|s| {
            Interlock::new(match s.kind {
                corridor_atsc::network::SiteKind::Intersection => {
                    Phase::Intersection(IntersectionPhase::CrossFlow)
                }
                corridor_atsc::network::SiteKind::MidBlock => Phase::MidBlock(MidBlockPhase::PedestrianCrossing),
            })
        })
        .collect();
    locks.iter_mut().for_each(|l| {
        l.advance();
    });
    let mut sim = Simulation::new(&net, DemandSchedule::default(), CorridorSignals::Interlocked(locks), cfg).unwrap();
    let trip = VehicleTrip { origin: Endpoint::South, destination: Endpoint::North };
    for k in 0..10 {
        sim.place_vehicle(trip, 2.0 + 5.5 * k as f64, 0.0).unwrap();
    }
    sim.run(600).unwrap();
    let trace = sim.take_trace().unwrap();

    // Replay: per vehicle, count steps with speed below the waiting threshold.
    let mut replay = std::collections::BTreeMap::<u64, (u64, f64)>::new();
    let mut positions = std::collections::BTreeMap::<u64, Vec<(u64, f64)>>::new();
    for line in trace.lines().filter(|l| l.starts_with("V ")) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let (t, id, pos, speed, cum): (u64, u64, f64, f64, f64) =
            (f[1].parse().unwrap(), f[2].parse().unwrap(), f[4].parse().unwrap(), f[5].parse().unwrap(), f[6].parse().unwrap());
        let e = replay.entry(id).or_default();
        if speed < 0.2 {
            e.0 += 1;
        }
        e.1 = cum;
        positions.entry(t).or_default().push((id, pos));
    }
    assert_eq!(replay.len(), 10);
    for (id, (count, cum)) in &replay {
        assert_eq!(*count as f64, *cum, "vehicle {id}");
    }
    for ps in positions.values() {
        let mut xs: Vec<f64> = ps.iter().map(|p| p.1).collect();
        xs.sort_by(f64::total_cmp);
        for w in xs.windows(2) {
            assert!(w[1] - 5.0 - w[0] > 0.0);
        }
    }
    let total: f64 = sim.vehicles().iter().map(|v| v.wait.cumulative_s).sum();
    assert_eq!(total, replay.values().map(|v| v.1).sum::<f64>());
    assert!(total > 0.0);
}

#[test]
fn serialized_traces_are_byte_identical() {
    let net = build_corridor(&NetworkConfig::mini()).unwrap();
    let run = || {
        let rates = corridor_atsc::demand::DemandRates::for_network(&net);
        let d = corridor_atsc::demand::generate_trips(&net, &rates, 1.5, 400.0, 9).unwrap();
        let mut cfg = SimConfig::for_network(&net);
        cfg.record_trace = true;
        let mut sim = Simulation::new(&net, d, CorridorSignals::FixedTime { dark_midblocks: true }, cfg).unwrap();
        sim.run(400).unwrap();
        sim.take_trace().unwrap()
    };
    let a = run();
    assert!(a.len() > 1000);
    assert_eq!(a, run());
}
