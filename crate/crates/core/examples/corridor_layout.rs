//! Builds the full and desk-scale corridors and prints their sites.
//!
//! cargo run --example corridor_layout

use corridor_atsc::network::{build_corridor, NetworkConfig, SiteKind};

fn main() -> corridor_atsc::Result<()> {
    for (name, cfg) in [("full", NetworkConfig::default()), ("mini", NetworkConfig::mini())] {
        let net = build_corridor(&cfg)?;
        println!(
            "{name}: {} m, {} sites ({} mid-block), speed limit {:.2} m/s",
            net.length_m,
            net.n_signals(),
            net.n_midblocks(),
            net.speed_limit_mps
        );
        for s in &net.signals {
            let kind = match s.kind {
                SiteKind::Intersection => "intersection",
                SiteKind::MidBlock => "mid-block",
            };
            println!(
                "  site {} {kind:<12} at {:>5.1} m  crosswalks {}  veh zone -{}/+{} m  ped zone -{}/+{} m",
                s.id,
                s.position_m,
                s.crosswalks.len(),
                s.veh_zone.upstream_m,
                s.veh_zone.downstream_m,
                s.ped_zone.upstream_m,
                s.ped_zone.downstream_m
            );
        }
    }

    // Networks are plain TOML.
    let text = toml::to_string(&NetworkConfig::mini()).expect("serializable");
    let back = NetworkConfig::from_toml_str(&text)?;
    assert_eq!(back, NetworkConfig::mini());
    println!("\nmini network as TOML:\n{text}");
    Ok(())
}
