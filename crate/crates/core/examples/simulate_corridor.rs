//! Runs the microsimulator under fixed-time and unsignalized control.
//!
//! cargo run --release --example simulate_corridor -- [scale]

use corridor_atsc::demand::{generate_trips, DemandRates};
use corridor_atsc::microsim::{SimConfig, Simulation};
use corridor_atsc::network::{build_corridor, NetworkConfig};
use corridor_atsc::signal::CorridorSignals;

fn main() -> corridor_atsc::Result<()> {
    let scale: f64 = std::env::args().nth(1).map_or(1.0, |s| s.parse().expect("scale"));
    let net = build_corridor(&NetworkConfig::default())?;
    let rates = DemandRates::for_network(&net);
    for dark in [false, true] {
        let demand = generate_trips(&net, &rates, scale, 1800.0, 7)?;
        let mut sim = Simulation::new(
            &net,
            demand,
            CorridorSignals::FixedTime { dark_midblocks: dark },
            SimConfig::for_network(&net),
        )?;
        sim.run(192)?;
        sim.begin_horizon();
        sim.run(1200)?;
        let h = sim.horizon_totals();
        println!(
            "{:<13} scale {scale}: {} vehicles avg wait {:.1} s, {} pedestrians avg wait {:.1} s, combined {:.1} s, conflicts {}",
            if dark { "unsignalized" } else { "fixed-time" },
            h.veh_count,
            h.avg_veh_wait_s(),
            h.ped_count,
            h.avg_ped_wait_s(),
            h.avg_combined_wait_s(),
            h.conflicts
        );
        let c = sim.census();
        for (i, w) in c.wait.sites.iter().enumerate() {
            println!(
                "    site {i}: waiting vehicles {} (max {:.0} s), waiting pedestrians {} (max {:.0} s)",
                w.n_wait_veh, w.max_wait_veh_s, w.n_wait_ped, w.max_wait_ped_s
            );
        }
    }

    let mut cfg = SimConfig::for_network(&net);
    cfg.record_trace = true;
    let demand = generate_trips(&net, &rates, scale, 60.0, 7)?;
    let mut sim = Simulation::new(&net, demand, CorridorSignals::FixedTime { dark_midblocks: false }, cfg)?;
    sim.run(20)?;
    let trace = sim.take_trace().unwrap_or_default();
    println!("\nfirst trace lines:");
    for line in trace.lines().take(8) {
        println!("  {line}");
    }
    Ok(())
}
