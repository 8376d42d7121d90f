//! Benchmarks fixed-time, unsignalized and (optionally) a trained policy
//! across demand scales and prints the comparison.
//!
//! cargo run --release --example benchmark -- [policy.ckpt]

use std::sync::Arc;

use corridor_atsc::eval::{compare, run_benchmark, summarize, BenchmarkPlan, Controller, RlPolicy};
use corridor_atsc::network::{build_corridor, NetworkConfig};
use corridor_atsc::ppo::load_checkpoint;

fn main() -> corridor_atsc::Result<()> {
    let ck = std::env::args().nth(1).map(load_checkpoint).transpose()?;
    let net_cfg = ck.as_ref().and_then(|c| c.meta.network.clone()).unwrap_or_else(NetworkConfig::mini);
    let net = build_corridor(&net_cfg)?;
    let mut controllers = vec![Controller::Signalized, Controller::Unsignalized];
    if let Some(ck) = &ck {
        controllers.push(Controller::Rl(Arc::new(RlPolicy::from_checkpoint(ck))));
    }
    let plan = BenchmarkPlan {
        controllers,
        scales: vec![0.5, 1.0, 1.5, 2.0, 2.5],
        runs_per_cell: 5,
        seed: 100,
        ..BenchmarkPlan::default()
    };
    let runs = run_benchmark(&plan, &net)?;
    let cells = summarize(&runs);
    for c in &cells {
        println!(
            "{:<13} x{:<4} combined wait {:>6.2} ± {:<5.2} s  conflicts {:>5.1}  switches {:>6.1}  audit failures {}",
            c.controller.to_string(),
            c.scale,
            c.avg_wait_combined_s.mean,
            c.avg_wait_combined_s.std,
            c.conflicts.mean,
            c.switches.mean,
            c.audit_failures
        );
    }
    if ck.is_some() {
        println!("\n{}", compare(&cells)?.summary_text());
    }
    Ok(())
}
