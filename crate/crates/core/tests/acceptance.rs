//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! cargo test --release --test acceptance

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{audit_physics, audit_random_interlock, gae_brute, reward_oracle, two_pass, Control};
use corridor_atsc::demand::{generate_trips, DemandRates};
use corridor_atsc::env::{compute_reward, ActionVector, Welford};
use corridor_atsc::eval::{run_benchmark, summarize, write_runs_csv, BenchmarkPlan, Controller, RlPolicy, RunReport};
use corridor_atsc::microsim::{SiteWait, WaitSnapshot};
use corridor_atsc::network::{build_corridor, CorridorNetwork, NetworkConfig, SiteKind};
use corridor_atsc::ppo::{gae, loss_and_grad, Activation, Checkpoint, DistParams, Minibatch, PolicyParams, PpoConfig, TrainSettings};
use corridor_atsc::signal::{fixed_time_site, ControllerKind, Interval, INTERSECTION_CYCLE_S, MIDBLOCK_CYCLE_S};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REWARD_TOL: f64 = 1e-9;
const GAE_TOL: f64 = 1e-9;
const FD_TOL: f64 = 1e-4;
const WELFORD_TOL: f64 = 1e-9;
const INTERLOCK_ACTIONS: u64 = 100_000;
const PHYSICS_STEPS: u64 = 10_000;
const PHYSICS_SCALE: f64 = 2.75;
const DEMAND_SEEDS: u64 = 100;
const TRAIN_SEED: u64 = 1;
const TRAIN_STEPS: u64 = 500_000;
const EVAL_SEED: u64 = 2024;
const EVAL_RUNS: usize = 10;
const MIN_IMPROVEMENT_PCT: f64 = 20.0;
const MIN_SEED_WINS: usize = 8;
const MIN_SPEARMAN: f64 = 0.9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn full() -> CorridorNetwork {
    build_corridor(&NetworkConfig::default()).unwrap()
}

fn reward_oracle_check() -> Outcome {
    let net = full();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let snap = WaitSnapshot {
            sites: (0..8)
                .map(|_| SiteWait {
                    n_wait_veh: rng.random_range(0..6),
                    max_wait_veh_s: rng.random_range(0.0..15.0),
                    n_wait_ped: rng.random_range(0..6),
                    max_wait_ped_s: rng.random_range(0.0..15.0),
                })
                .collect(),
        };
        let (raw, _) = reward_oracle(&net, &snap);
        let got = compute_reward(&net, &snap).unclipped;
        worst = worst.max((got - raw).abs() / raw.abs());
    }
    let empty = compute_reward(&net, &WaitSnapshot::empty(8)).total;
    let mut big = WaitSnapshot::empty(8);
    big.sites[3] = SiteWait { n_wait_veh: 40, max_wait_veh_s: 60.0, n_wait_ped: 0, max_wait_ped_s: 0.0 };
    let clipped = compute_reward(&net, &big).total;
    outcome(
        worst <= REWARD_TOL && empty == -4.0 && clipped == -1e5,
        format!("max rel err {worst:.1e}, empty {empty}, clipped {clipped}"),
    )
}

fn fixed_time_check() -> Outcome {
    let runs = |kind: SiteKind, period: u64| {
        let mut out: Vec<(Interval, u64)> = Vec::new();
        for t in 0..2 * period {
            let iv = fixed_time_site(kind, t).interval;
            match out.last_mut() {
                Some((last, n)) if *last == iv => *n += 1,
                _ => out.push((iv, 1)),
            }
        }
        let periodic = (0..2 * period).all(|t| fixed_time_site(kind, t) == fixed_time_site(kind, t + period));
        (out.into_iter().map(|r| r.1).collect::<Vec<_>>(), periodic)
    };
    let (mb, mb_p) = runs(SiteKind::MidBlock, MIDBLOCK_CYCLE_S);
    let (int, int_p) = runs(SiteKind::Intersection, INTERSECTION_CYCLE_S);
    let pass = mb == [40, 4, 2, 7, 9, 40, 4, 2, 7, 9]
        && int == [90, 4, 2, 90, 4, 2, 90, 4, 2, 90, 4, 2]
        && mb_p
        && int_p
        && MIDBLOCK_CYCLE_S == 62
        && INTERSECTION_CYCLE_S == 192;
    outcome(pass, format!("mid-block {:?}, intersection {:?}", &mb[..5], &int[..6]))
}

fn interlock_check() -> Outcome {
    let a = audit_random_interlock(&full(), INTERLOCK_ACTIONS, 7);
    outcome(
        a.yellow_violations == 0 && a.conflict_steps == 0,
        format!(
            "{} actions, {} steps, yellow violations {}, conflicting-green steps {}",
            a.actions, a.steps, a.yellow_violations, a.conflict_steps
        ),
    )
}

fn physics_check() -> Outcome {
    let net = full();
    let mut pass = true;
    let mut parts = Vec::new();
    for (c, name) in [(Control::Fixed, "fixed"), (Control::Unsignalized, "unsignalized"), (Control::RandomInterlock, "random-policy")] {
        let a = audit_physics(&net, c, PHYSICS_SCALE, PHYSICS_STEPS, 3);
        let bad = a.collisions + a.speed_violations + a.ped_speed_violations + a.wait_decreases + a.crossing_order_violations;
        pass &= bad == 0 && a.steps == PHYSICS_STEPS;
        parts.push(format!("{name}: {} veh-steps, min gap {:.2} m, violations {bad}", a.vehicle_observations, a.min_gap_m));
    }
    outcome(pass, parts.join("; "))
}

fn gae_and_gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_gae: f64 = 0.0;
    for _ in 0..2000 {
        let n = rng.random_range(1..=16);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.1)).collect();
        let (g, l) = (rng.random_range(0.0..0.999), rng.random_range(0.0..0.999));
        let boot = rng.random_range(-5.0..5.0);
        let (adv, _) = gae(&r, &v, boot, &d, g, l).unwrap();
        for (a, b) in adv.iter().zip(gae_brute(&r, &v, boot, &d, g, l)) {
            worst_gae = worst_gae.max((a - b).abs() / b.abs().max(1.0));
        }
    }

    let mut p = PolicyParams::new(6, 2, &[8, 4], Activation::Tanh, &mut rng);
    p.actor.layers.last_mut().unwrap().w.mapv_inplace(|v| v * 200.0);
    let n = 12;
    let obs = Array2::from_shape_fn((n, 6), |_| rng.random_range(-2.0..2.0));
    let actions: Vec<ActionVector> = (0..n)
        .map(|_| ActionVector::new(rng.random_range(1..=4), vec![rng.random(), rng.random()]).unwrap())
        .collect();
    let (logits, _) = p.forward_batch(obs.view());
    let old: Vec<f64> = (0..n)
        .map(|i| {
            let d = DistParams::from_logits(logits.row(i).as_slice().unwrap());
            d.log_prob(&actions[i]) + rng.random_range(-0.4..0.4)
        })
        .collect();
    let adv: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
    let ret: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cfg = PpoConfig { entropy_coef: 0.05, ..PpoConfig::default() };
    let mb = Minibatch { obs: obs.view(), actions: &actions, old_logp: &old, advantages: &adv, returns: &ret };
    let analytic = loss_and_grad(&p, &mb, &cfg, true).1.unwrap().params().concat();
    let mut worst_fd: f64 = 0.0;
    let mut k = 0;
    for s in 0..p.params().len() {
        for i in 0..p.params()[s].len() {
            let h = 1e-6;
            p.params_mut()[s][i] += h;
            let up = loss_and_grad(&p, &mb, &cfg, false).0.total;
            p.params_mut()[s][i] -= 2.0 * h;
            let down = loss_and_grad(&p, &mb, &cfg, false).0.total;
            p.params_mut()[s][i] += h;
            let fd = (up - down) / (2.0 * h);
            let scale = analytic[k].abs().max(fd.abs());
            if scale > 1e-6 {
                worst_fd = worst_fd.max((analytic[k] - fd).abs() / scale);
            }
            k += 1;
        }
    }
    outcome(
        worst_gae <= GAE_TOL && worst_fd < FD_TOL,
        format!("GAE max err {worst_gae:.1e} over 2000 sequences, gradient max rel err {worst_fd:.1e} over {k} params"),
    )
}

fn welford_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for (lo, hi) in [(0.0, 1.0), (1e4, 1e4 + 3.0), (-1e3, 1e3)] {
        let xs: Vec<f64> = (0..1_000_000).map(|_| rng.random_range(lo..hi)).collect();
        let mut w = Welford::default();
        xs.iter().for_each(|&x| w.update(x));
        let (m, v) = two_pass(&xs);
        worst = worst.max((w.mean - m).abs() / m.abs()).max((w.variance() - v).abs() / v);
    }
    outcome(worst <= WELFORD_TOL, format!("max rel err {worst:.1e} on 3 streams of 1e6"))
}

fn demand_check() -> Outcome {
    let net = full();
    let rates = DemandRates::for_network(&net);
    let (mut veh, mut ped, mut cross) = (0usize, 0usize, 0usize);
    for seed in 0..DEMAND_SEEDS {
        let d = generate_trips(&net, &rates, 1.0, 3600.0, seed).unwrap();
        veh += d.vehicles().count();
        ped += d.pedestrians().count();
        cross += d.pedestrians().filter(|p| p.crossing_site.is_some()).count();
    }
    let mean_veh = veh as f64 / DEMAND_SEEDS as f64;
    let frac = cross as f64 / ped as f64;
    let sv = (202.0 / DEMAND_SEEDS as f64).sqrt();
    let sf = (0.44 * 0.56 / ped as f64).sqrt();
    outcome(
        (mean_veh - 202.0).abs() <= 3.0 * sv && (frac - 0.44).abs() <= 3.0 * sf,
        format!("vehicles/h {mean_veh:.2} (3σ {:.2}), crossing fraction {frac:.4} (3σ {:.4})", 3.0 * sv, 3.0 * sf),
    )
}

fn combined(runs: &[RunReport], c: ControllerKind, scale: f64) -> Vec<f64> {
    let mut r: Vec<&RunReport> = runs.iter().filter(|r| r.controller == c && r.scale == scale).collect();
    r.sort_by_key(|r| r.run);
    r.iter().map(|r| r.avg_wait_combined_s).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn learning_check(runs: &[RunReport]) -> Outcome {
    let rl = mean(&combined(runs, ControllerKind::Rl, 1.0));
    let fixed = mean(&combined(runs, ControllerKind::Fixed, 1.0));
    let gain = 100.0 * (fixed - rl) / fixed;
    outcome(
        gain >= MIN_IMPROVEMENT_PCT,
        format!("combined wait at 1x: rl {rl:.2} s, signalized {fixed:.2} s, improvement {gain:.1}%"),
    )
}

fn generalization_check(runs: &[RunReport]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [0.5, 2.5] {
        let rl = combined(runs, ControllerKind::Rl, s);
        let fx = combined(runs, ControllerKind::Fixed, s);
        let wins = rl.iter().zip(&fx).filter(|(a, b)| a < b).count();
        pass &= wins >= MIN_SEED_WINS;
        parts.push(format!("{s}x: {wins}/{} seeds (rl {:.2} s vs {:.2} s)", rl.len(), mean(&rl), mean(&fx)));
    }
    outcome(pass, parts.join(", "))
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn signature_check(runs: &[RunReport]) -> Outcome {
    let sw = |c| mean(&runs.iter().filter(|r| r.controller == c && r.scale == 1.0).map(|r| r.switches as f64).collect::<Vec<_>>());
    let (rl_sw, fx_sw) = (sw(ControllerKind::Rl), sw(ControllerKind::Fixed));

    let plan = BenchmarkPlan {
        controllers: vec![Controller::Unsignalized],
        runs_per_cell: EVAL_RUNS,
        seed: EVAL_SEED,
        ..BenchmarkPlan::default()
    };
    let cells = summarize(&run_benchmark(&plan, &full()).unwrap());
    let scales: Vec<f64> = cells.iter().map(|c| c.scale).collect();
    let conflicts: Vec<f64> = cells.iter().map(|c| c.conflicts.mean).collect();
    let rho = spearman(&scales, &conflicts);
    outcome(
        rl_sw > fx_sw && rho > MIN_SPEARMAN,
        format!(
            "switches at 1x: rl {rl_sw:.1} vs signalized {fx_sw:.1}; unsignalized conflicts {:.1} -> {:.1}, Spearman {rho:.3}",
            conflicts[0],
            conflicts[conflicts.len() - 1]
        ),
    )
}

fn short_training() -> TrainSettings {
    let mut s = TrainSettings::mini();
    s.seed = 11;
    s.parallel = false;
    s.ppo.n_actors = 2;
    s.ppo.total_steps = 30_000;
    s
}

fn determinism_check() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let (ck, _) = short_training().run(|_| {}).unwrap();
        let net = build_corridor(ck.meta.network.as_ref().unwrap()).unwrap();
        let plan = BenchmarkPlan {
            controllers: vec![Controller::Signalized, Controller::Rl(Arc::new(RlPolicy::from_checkpoint(&ck)))],
            scales: vec![1.0, 2.0],
            runs_per_cell: 3,
            seed: 5,
            parallel: false,
            ..BenchmarkPlan::default()
        };
        let path = dir.path().join(format!("{tag}.csv"));
        write_runs_csv(&path, &run_benchmark(&plan, &net).unwrap()).unwrap();
        (ck.to_bytes().unwrap(), std::fs::read(path).unwrap())
    };
    let (ck_a, csv_a) = run("a");
    let (ck_b, csv_b) = run("b");
    outcome(
        ck_a == ck_b && csv_a == csv_b,
        format!("checkpoints {} bytes identical: {}, eval CSVs identical: {}", ck_a.len(), ck_a == ck_b, csv_a == csv_b),
    )
}

fn train_and_evaluate() -> (Checkpoint, Vec<RunReport>, Duration) {
    let t0 = Instant::now();
    let mut s = TrainSettings::mini();
    s.seed = TRAIN_SEED;
    s.ppo.total_steps = TRAIN_STEPS;
    let (ck, _) = s.run(|_| {}).unwrap();
    let net = build_corridor(&NetworkConfig::mini()).unwrap();
    let plan = BenchmarkPlan {
        controllers: vec![
            Controller::Signalized,
            Controller::Unsignalized,
            Controller::Rl(Arc::new(RlPolicy::from_checkpoint(&ck))),
        ],
        scales: vec![0.5, 1.0, 2.5],
        runs_per_cell: EVAL_RUNS,
        seed: EVAL_SEED,
        ..BenchmarkPlan::default()
    };
    let runs = run_benchmark(&plan, &net).unwrap();
    (ck, runs, t0.elapsed())
}

fn main() {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let o = f();
        println!(
            "{} [{id:>2}] {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t0.elapsed().as_secs_f64()
        );
        failures += usize::from(!o.pass);
    };
    report(1, "reward oracle", &mut reward_oracle_check);
    report(2, "fixed-time plans", &mut fixed_time_check);
    report(3, "interlock safety", &mut interlock_check);
    report(4, "microsim physics", &mut physics_check);
    report(5, "GAE and gradients", &mut gae_and_gradient_check);
    report(6, "Welford", &mut welford_check);
    report(7, "demand statistics", &mut demand_check);

    let (ck, runs, took) = train_and_evaluate();
    println!(
        "     trained mini policy: {} updates, {} sim steps, train+eval {:.0} s",
        ck.meta.updates,
        ck.meta.sim_steps,
        took.as_secs_f64()
    );
    report(8, "desk-scale learning", &mut || learning_check(&runs));
    report(9, "generalization", &mut || generalization_check(&runs));
    report(10, "behavioral signatures", &mut || signature_check(&runs));
    report(11, "determinism", &mut determinism_check);

    println!("{} of 11 criteria passed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
