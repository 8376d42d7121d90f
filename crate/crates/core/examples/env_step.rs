//! Steps the RL environment with random actions and prints the reward terms.
//!
//! cargo run --release --example env_step

use corridor_atsc::env::{ActionVector, EnvConfig, TrafficEnv};
use corridor_atsc::network::{build_corridor, NetworkConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> corridor_atsc::Result<()> {
    let net = build_corridor(&NetworkConfig::default())?;
    let mut env = TrafficEnv::new(&net, EnvConfig::default())?;
    let obs = env.reset(3, 1.5)?;
    println!(
        "observation {} x {} ({} features per step), episode {:?}",
        obs.rows,
        obs.cols,
        env.feature_dim(),
        env.episode()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total = 0.0;
    while !env.is_done() {
        let action = ActionVector::new(
            rng.random_range(1..=4),
            (0..net.n_midblocks()).map(|_| rng.random_bool(0.5)).collect(),
        )?;
        let out = env.step(&action)?;
        total += out.reward;
        if out.info.action_index % 10 == 0 {
            let r = out.info.reward;
            println!(
                "action {:>2}  reward {:>10.2}  int veh {:.2} ped {:.2}  mb veh {:.2} ped {:.2}  switches {}",
                out.info.action_index, out.reward, r.q_int_veh, r.q_int_ped, r.q_mb_veh, r.q_mb_ped, out.info.switches
            );
        }
    }
    println!("episode return {total:.1} over {} actions", env.phase_trace().len());
    Ok(())
}
