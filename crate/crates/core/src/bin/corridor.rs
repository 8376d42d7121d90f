use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use corridor_atsc::eval::{
    compare, default_scales, read_runs_csv, run_benchmark, summarize, write_comparison_csv, write_runs_csv,
    write_summary_csv, BenchmarkPlan, Controller, RlPolicy,
};
use corridor_atsc::network::{build_corridor, NetworkConfig};
use corridor_atsc::ppo::{load_checkpoint, save_checkpoint, write_curve_csv, TrainSettings};
use corridor_atsc::signal::ControllerKind;
use corridor_atsc::{Error, Result};

#[derive(Parser)]
#[command(name = "corridor", about = "Train and benchmark corridor signal controllers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a PPO policy and write a checkpoint.
    Train {
        /// TOML settings file with optional [ppo], [env] and [network] tables.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Start from the three-site desk-scale settings.
        #[arg(long)]
        mini: bool,
        /// Total simulator steps.
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        actors: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "policy.ckpt")]
        checkpoint_out: PathBuf,
        /// Training curve CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Collect rollouts on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Benchmark controllers over demand scales.
    Eval {
        /// Any of fixed, unsignalized, rl.
        #[arg(long, value_delimiter = ',', default_values_t = ["fixed".to_string(), "unsignalized".to_string()])]
        controller: Vec<String>,
        /// Demand scales; defaults to 0.5..=2.75 in steps of 0.25.
        #[arg(long, value_delimiter = ',')]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Network when no checkpoint supplies one.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        mini: bool,
        /// Sample RL actions instead of taking the most likely one.
        #[arg(long)]
        stochastic: bool,
        #[arg(long, default_value = "eval_out")]
        out: PathBuf,
    },
    /// Compare RL with the baselines from an eval directory.
    Compare {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[allow(clippy::too_many_arguments)]
fn train(
    config: Option<PathBuf>,
    mini: bool,
    steps: Option<u64>,
    actors: Option<usize>,
    seed: Option<u64>,
    checkpoint_out: PathBuf,
    curve: Option<PathBuf>,
    sequential: bool,
) -> Result<ExitCode> {
    let mut s = match (&config, mini) {
        (Some(p), _) => TrainSettings::load(p)?,
        (None, true) => TrainSettings::mini(),
        (None, false) => TrainSettings::default(),
    };
    if config.is_some() && mini {
        s.network = NetworkConfig::mini();
    }
    if let Some(n) = steps {
        s.ppo.total_steps = n;
    }
    if let Some(n) = actors {
        s.ppo.n_actors = n;
    }
    if let Some(n) = seed {
        s.seed = n;
    }
    s.parallel &= !sequential;
    let (ck, rows) = s.run(|r| {
        eprintln!(
            "update {:>5}  steps {:>9}  return {:>12.1}  entropy {:.3}  kl {:.4}  coord {:.2}",
            r.update, r.sim_steps, r.mean_episode_return, r.entropy, r.approx_kl, r.coordination
        );
    })?;
    save_checkpoint(&checkpoint_out, &ck)?;
    if let Some(p) = curve {
        write_curve_csv(p, &rows)?;
    }
    eprintln!("wrote {}", checkpoint_out.display());
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn eval(
    controller: Vec<String>,
    scales: Vec<f64>,
    runs: usize,
    seed: u64,
    checkpoint: Option<PathBuf>,
    network: Option<PathBuf>,
    mini: bool,
    stochastic: bool,
    out: PathBuf,
) -> Result<ExitCode> {
    let kinds = controller
        .iter()
        .map(|c| c.parse::<ControllerKind>())
        .collect::<Result<Vec<_>>>()?;
    let ck = checkpoint.as_ref().map(load_checkpoint).transpose()?;
    let net_cfg = if let Some(p) = &network {
        NetworkConfig::load(p)?
    } else if mini {
        NetworkConfig::mini()
    } else {
        ck.as_ref().and_then(|c| c.meta.network.clone()).unwrap_or_default()
    };
    let net = build_corridor(&net_cfg)?;
    let mut controllers = Vec::new();
    for k in kinds {
        controllers.push(match k {
            ControllerKind::Fixed => Controller::Signalized,
            ControllerKind::Unsignalized => Controller::Unsignalized,
            ControllerKind::Rl => {
                let ck = ck.as_ref().ok_or_else(|| Error::Domain("--controller rl needs --checkpoint".into()))?;
                let mut p = RlPolicy::from_checkpoint(ck);
                p.greedy = !stochastic;
                Controller::Rl(Arc::new(p))
            }
        });
    }
    let plan = BenchmarkPlan {
        controllers,
        scales: if scales.is_empty() { default_scales() } else { scales },
        runs_per_cell: runs,
        seed,
        ..BenchmarkPlan::default()
    };
    let reports = run_benchmark(&plan, &net)?;
    let cells = summarize(&reports);
    std::fs::create_dir_all(&out)?;
    write_runs_csv(out.join("runs.csv"), &reports)?;
    write_summary_csv(out.join("summary.csv"), &cells)?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<13} {:>6} {:>10} {:>10} {:>10} {:>9} {:>9} {:>7}",
        "controller", "scale", "ped_s", "veh_s", "comb_s", "conflicts", "switches", "audit"
    );
    for c in &cells {
        let _ = writeln!(
            text,
            "{:<13} {:>6.2} {:>10.2} {:>10.2} {:>10.2} {:>9.1} {:>9.1} {:>7}",
            format!("{:?}", c.controller).to_lowercase(),
            c.scale,
            c.avg_wait_ped_s.mean,
            c.avg_wait_veh_s.mean,
            c.avg_wait_combined_s.mean,
            c.conflicts.mean,
            c.switches.mean,
            if c.audit_failures == 0 { "ok".to_string() } else { format!("{} bad", c.audit_failures) }
        );
    }
    if let Ok(cmp) = compare(&cells) {
        write_comparison_csv(out.join("comparison.csv"), &cmp)?;
        text.push('\n');
        text.push_str(&cmp.summary_text());
    }
    std::fs::write(out.join("summary.txt"), &text)?;
    print!("{text}");

    let bad: Vec<_> = reports.iter().filter(|r| !r.audit().is_clean()).collect();
    if bad.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for r in &bad {
            eprintln!(
                "safety audit failed: {:?} scale {} run {}: {:?}",
                r.controller,
                r.scale,
                r.run,
                r.audit()
            );
        }
        Ok(ExitCode::from(2))
    }
}

fn compare_cmd(input: PathBuf, out: PathBuf) -> Result<ExitCode> {
    let path = if input.is_dir() { input.join("runs.csv") } else { input };
    let cmp = compare(&summarize(&read_runs_csv(path)?))?;
    write_comparison_csv(&out, &cmp)?;
    print!("{}", cmp.summary_text());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let res = match Cli::parse().cmd {
        Cmd::Train {
            config,
            mini,
            steps,
            actors,
            seed,
            checkpoint_out,
            curve,
            sequential,
        } => train(config, mini, steps, actors, seed, checkpoint_out, curve, sequential),
        Cmd::Eval {
            controller,
            scales,
            runs,
            seed,
            checkpoint,
            network,
            mini,
            stochastic,
            out,
        } => eval(controller, scales, runs, seed, checkpoint, network, mini, stochastic, out),
        Cmd::Compare { input, out } => compare_cmd(input, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
