//! Turns campus Wi-Fi association logs into an origin/destination table and
//! uses it to weight pedestrian crossing sites.
//!
//! cargo run --example wifi_demand -- [logs.csv]

use std::collections::BTreeMap;

use chrono::NaiveDate;
use corridor_atsc::demand::{
    generate_trips, ingest_wifi_logs, read_wifi_csv, DemandRates, IngestConfig, WifiLogRecord,
};
use corridor_atsc::network::{build_corridor, NetworkConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUILDINGS: [&str; 4] = ["library", "lab", "union", "dorm"];

/// Commuters hop between buildings; residents stay put all day.
fn synthetic_logs() -> Vec<WifiLogRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut out = Vec::new();
    for client in 0..60 {
        let mobile = client % 2 == 0;
        for day in 1..=5 {
            let date = NaiveDate::from_ymd_opt(2024, 3, day).expect("date");
            let mut minute = 8 * 60;
            let mut building = rng.random_range(0..BUILDINGS.len());
            while minute < 18 * 60 {
                let t = date.and_hms_opt(minute / 60, minute % 60, 0).expect("time");
                out.push(WifiLogRecord {
                    client_id: format!("c{client:02}"),
                    building_id: BUILDINGS[building].to_string(),
                    timestamp: t,
                });
                minute += rng.random_range(10..40);
                if mobile && rng.random_bool(0.4) {
                    building = rng.random_range(0..BUILDINGS.len());
                }
            }
        }
    }
    out
}

fn main() -> corridor_atsc::Result<()> {
    let records = match std::env::args().nth(1) {
        Some(path) => read_wifi_csv(path)?,
        None => synthetic_logs(),
    };
    let res = ingest_wifi_logs(&records, &IngestConfig::default())?;
    let mobile = res.clients.iter().filter(|c| c.mobile).count();
    println!("{} records, {} active clients, {} kept as mobile", records.len(), res.clients.len(), mobile);
    for ((a, b), n) in &res.table.counts {
        println!("  {a:>8} -> {b:<8} {n}");
    }

    // Each building sits next to one crossing of the desk-scale corridor.
    let net = build_corridor(&NetworkConfig::mini())?;
    let building_site: BTreeMap<String, usize> =
        [("library", 0), ("lab", 1), ("union", 2), ("dorm", 2)].map(|(b, s)| (b.to_string(), s)).into();
    let mut rates = DemandRates::for_network(&net);
    rates.od_weights.crossing_sites = res.table.crossing_site_weights(&building_site, net.n_signals());
    println!("crossing site weights {:?}", rates.od_weights.crossing_sites);

    let demand = generate_trips(&net, &rates, 1.0, 3600.0, 5)?;
    let mut per_site = vec![0usize; net.n_signals()];
    for p in demand.pedestrians() {
        if let Some(s) = p.crossing_site {
            per_site[s] += 1;
        }
    }
    println!("pedestrian crossings per site over one hour: {per_site:?}");
    Ok(())
}
