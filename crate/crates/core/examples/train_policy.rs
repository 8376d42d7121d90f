//! Trains a PPO controller on the desk-scale corridor and saves it.
//!
//! cargo run --release --example train_policy -- [sim_steps] [out.ckpt]

use std::time::Instant;

use corridor_atsc::ppo::{save_checkpoint, TrainSettings};

fn main() -> corridor_atsc::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map_or(100_000, |s| s.parse().expect("steps"));
    let out = args.next().unwrap_or_else(|| "mini.ckpt".to_string());

    let mut settings = TrainSettings::mini();
    settings.ppo.total_steps = steps;
    settings.seed = 1;
    let t0 = Instant::now();
    let (ck, curve) = settings.run(|r| {
        println!(
            "update {:>3}  sim steps {:>7}  mean return {:>12.1}  entropy {:.3}  mid-block greens {:.2}",
            r.update, r.sim_steps, r.mean_episode_return, r.entropy, r.coordination
        );
    })?;
    save_checkpoint(&out, &ck)?;
    println!(
        "{} updates in {:.0} s, checkpoint written to {out}",
        curve.len(),
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}
