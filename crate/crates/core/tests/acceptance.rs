//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset: `cargo test --release --test acceptance -- 5 6`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{euler_network, golden_vectors, hex, rk4, solver, NetState};
use gcid::harness::config::{Dropout, StormInjection};
use gcid::harness::{run_episode, run_monte_carlo, CoalitionMode, EpisodeLog, HarnessEvent, MissionConfig, Mode};
use gcid::net::{decode, OpinionCodec, Resolution, HEADER_LEN};
use gcid::opinion::{
    opinion_step, project_zero_sum, CouplingTensor, EngineParams, NeighborOpinionView, OpinionInput, OpinionState,
    Saturation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXPLORE: usize = 0;
const EXPLOIT: usize = 1;
const MIGRATE: usize = 2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn zero_sum_conservation() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.gen_range(2..=6);
        let coupling = CouplingTensor::uniform(
            n,
            rng.gen_range(0.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.1..3.0),
        );
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let state = OpinionState {
            z: project_zero_sum(&raw).unwrap(),
            u: rng.gen_range(0.0..3.0),
            time: 0.0,
        };
        let input = OpinionInput {
            b: (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect(),
        };
        let neighbors: Vec<NeighborOpinionView> = (0..rng.gen_range(0..7))
            .map(|k| NeighborOpinionView {
                agent_id: k,
                z: project_zero_sum(&(0..n).map(|_| rng.gen_range(-10.0..10.0)).collect::<Vec<_>>()).unwrap(),
                u: None,
                age: 0.0,
            })
            .collect();
        let dt = 2.0 - rng.gen_range(0.0..2.0);
        let next = opinion_step(&state, &input, &neighbors, &coupling, Saturation::Tanh, dt).unwrap();
        worst = worst.max(next.z.iter().sum::<f64>().abs());
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 5.0,
        format!("max |sum z'| = {worst:.2e} (<= 1e-9) over 10000 steps in {secs:.2} s (< 5 s)"),
    )
}

fn integrator_oracle() -> Outcome {
    let p = EngineParams::bloom_default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut z = Vec::new();
    let mut b = Vec::new();
    for _ in 0..4 {
        let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.01..=0.01)).collect();
        z.push(project_zero_sum(&raw).unwrap());
        b.push((0..3).map(|_| rng.gen_range(-0.5..0.5)).collect());
    }
    let s0 = NetState { z, u: vec![0.0; 4] };
    let reference = rk4(&s0, &b, &p, 1e-4, 600_000, 10_000);
    let errors: Vec<f64> = [1.0f64, 0.5, 0.1, 0.01]
        .iter()
        .map(|dt| {
            let per_second = (1.0 / dt).round() as usize;
            euler_network(&s0, &b, &p, *dt, 60 * per_second, per_second, true)
                .iter()
                .zip(&reference)
                .map(|(e, r)| e.max_abs_diff(r))
                .fold(0.0, f64::max)
        })
        .collect();
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    outcome(
        errors[2] <= 1e-2 && monotone,
        format!(
            "Euler dt=0.1 max-norm error {:.2e} (<= 1e-2) vs RK4 dt=1e-4 over 60 s; errors for dt 1/0.5/0.1/0.01 = {:.2e}/{:.2e}/{:.2e}/{:.2e}, monotone: {monotone}",
            errors[2], errors[0], errors[1], errors[2], errors[3]
        ),
    )
}

fn solver_exactness() -> Outcome {
    let matched = solver::agreement(7, 200);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut stable = 0;
    for case in 0..200 {
        let space = if case % 2 == 0 {
            solver::coarse_helm(&mut rng)
        } else {
            solver::three_var(&mut rng)
        };
        let (objectives, weights) = solver::random_objectives(&space, &mut rng);
        let base = gcid::ivp::solve(&space, &objectives, &weights).unwrap();
        let c = 2f64.powi(rng.gen_range(-8..8));
        let scaled: Vec<f64> = weights.iter().map(|w| w * c).collect();
        if gcid::ivp::solve(&space, &objectives, &scaled).unwrap().values == base.values {
            stable += 1;
        }
    }
    outcome(
        matched == 200 && stable == 200,
        format!("{matched}/200 identical to exhaustive scan; argmax unchanged under rescaling in {stable}/200"),
    )
}

fn wire_format() -> Outcome {
    let vectors = golden_vectors();
    let golden_ok = vectors.iter().all(|g| {
        let codec = OpinionCodec::new(g.z_clip).unwrap();
        let bytes = codec.encode(g.sender, g.seq, &g.z, g.resolution).unwrap().bytes;
        let msg = decode(&g.bytes).unwrap();
        hex(&bytes) == hex(&g.bytes) && msg.quantized_z == g.quantized && msg.sender_id == g.sender && msg.seq == g.seq
    });
    let codec = OpinionCodec::default();
    let z3 = [0.4, -0.1, -0.3];
    let coarse = codec.encode(0, 0, &z3, Resolution::Coarse).unwrap().bytes.len() - HEADER_LEN;
    let fine = codec.encode(0, 0, &z3, Resolution::Fine).unwrap().bytes.len() - HEADER_LEN;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    for _ in 0..10_000 {
        // stays inside z_clip after projection
        let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(-70.0..70.0)).collect();
        let z = project_zero_sum(&raw).unwrap();
        for res in [Resolution::Coarse, Resolution::Fine] {
            let back = codec.dequantize(&decode(&codec.encode(1, 1, &z, res).unwrap().bytes).unwrap());
            if z.iter().zip(&back).any(|(a, b)| (a - b).abs() > codec.step(res)) {
                violations += 1;
            }
        }
    }
    outcome(
        golden_ok && coarse == 3 && fine == 12 && violations == 0,
        format!(
            "{} golden vectors round-trip: {golden_ok}; payload {coarse} B coarse (3), {fine} B fine (12); {violations} step-bound violations in 10000 in-range vectors",
            vectors.len()
        ),
    )
}

fn storm_config(seed: u64) -> MissionConfig {
    let mut cfg = MissionConfig::default().with_seed(seed);
    cfg.harness.fleet_size = 8;
    cfg.harness.duration_s = 1200.0;
    cfg.harness.random_storms = false;
    cfg.harness.storm_injection = Some(StormInjection {
        agent: (seed % 8) as usize,
        time_s: 600.0,
    });
    cfg
}

fn opinion_cascade() -> Outcome {
    let mut cascaded = 0;
    let mut attentive = 0;
    let mut worst_latency: f64 = 0.0;
    let mut worst_ratio = f64::INFINITY;
    for k in 0..50 {
        let log = run_episode(&storm_config(100 + k)).expect("episode");
        let injected = log
            .ticks
            .iter()
            .find(|t| t.events.iter().any(|e| matches!(e, HarnessEvent::StormInjected { .. })))
            .map(|t| t.t);
        let Some(t0) = injected else { continue };
        let all_migrate = log
            .ticks
            .iter()
            .find(|t| t.t >= t0 && t.agents.iter().all(|a| a.dominant == MIGRATE))
            .map(|t| t.t - t0);
        if let Some(latency) = all_migrate.filter(|l| *l <= 60.0) {
            cascaded += 1;
            worst_latency = worst_latency.max(latency);
        } else {
            worst_latency = f64::INFINITY;
        }

        let n = log.header.fleet_size;
        let mut episode_ok = true;
        for i in 0..n {
            let done = log
                .ticks
                .iter()
                .find(|t| t.events.iter().any(|e| matches!(e, HarnessEvent::MigrationComplete { agent, .. } if *agent == i)))
                .map_or(f64::INFINITY, |t| t.t);
            let pre: Vec<f64> = log.ticks.iter().filter(|t| t.t < t0).map(|t| t.agents[i].u).collect();
            let pre_mean = pre.iter().sum::<f64>() / pre.len() as f64;
            let peak = log
                .ticks
                .iter()
                .filter(|t| t.t >= t0 && t.t <= done)
                .map(|t| t.agents[i].u)
                .fold(0.0, f64::max);
            let ratio = peak / pre_mean;
            worst_ratio = worst_ratio.min(ratio);
            if !(ratio > 2.0) {
                episode_ok = false;
            }
        }
        if episode_ok {
            attentive += 1;
        }
    }
    outcome(
        cascaded == 50 && attentive == 50,
        format!(
            "{cascaded}/50 episodes all-migrate within 60 s (slowest {worst_latency} s); {attentive}/50 with every agent's migration attention > 2x pre-storm mean (smallest ratio {worst_ratio:.1})"
        ),
    )
}

fn mode_of(log: &EpisodeLog, tick: usize, agent: usize) -> Mode {
    log.ticks[tick].agents[agent].mode
}

fn dropout_robustness() -> Outcome {
    let mut cfg = MissionConfig::default();
    let dropped = 3;
    cfg.harness.dropout = Some(Dropout {
        agent: dropped,
        start_s: 4200.0,
        duration_s: 1500.0,
    });
    let log = match run_episode(&cfg) {
        Ok(l) => l,
        Err(e) => return outcome(false, format!("episode failed: {e}")),
    };
    let complete = log.ticks.len() == 7200;
    let outage = |t: f64| (4200.0..5700.0).contains(&t);
    let silent = log
        .ticks
        .iter()
        .filter(|t| outage(t.t))
        .all(|t| t.agents[dropped].degree == 0 && t.agents[dropped].mode == Mode::AllStop);
    let mut switches = 0;
    for k in 1..log.ticks.len() {
        if log.ticks[k].t < 4200.0 {
            continue;
        }
        for i in (0..8).filter(|&i| i != dropped) {
            let pair = (mode_of(&log, k - 1, i), mode_of(&log, k, i));
            if matches!(pair, (Mode::Explore, Mode::Exploit) | (Mode::Exploit, Mode::Explore)) {
                switches += 1;
            }
        }
    }
    let ended = log
        .ticks
        .iter()
        .any(|t| t.events.iter().any(|e| matches!(e, HarnessEvent::DropoutEnded { agent } if *agent == dropped)));
    let after: Vec<_> = log.ticks.iter().filter(|t| t.t >= 5700.0).collect();
    let reconnected = after.iter().any(|t| t.agents[dropped].degree > 0);
    let released = after.iter().all(|t| t.agents[dropped].mode != Mode::AllStop);
    outcome(
        complete && silent && switches >= 1 && ended && reconnected && released,
        format!(
            "completed {} ticks; degree 0 throughout outage: {silent}; {switches} explore/exploit switches among the other 7 after 4200 s (>= 1); rejoined: {}",
            log.ticks.len(),
            ended && reconnected && released
        ),
    )
}

fn monte_carlo_comparison() -> Outcome {
    let started = Instant::now();
    let report = run_monte_carlo(&MissionConfig::default(), 30, &[4, 6, 8], &[CoalitionMode::Gcid, CoalitionMode::Static])
        .expect("monte carlo");
    let mut sampled_ok = true;
    let mut efficient = 0;
    let mut parts = Vec::new();
    for fleet in [4, 6, 8] {
        let g = report.cell(fleet, CoalitionMode::Gcid).unwrap();
        let s = report.cell(fleet, CoalitionMode::Static).unwrap();
        sampled_ok &= g.sampled_fraction.mean >= s.sampled_fraction.mean;
        if g.efficiency.mean >= s.efficiency.mean {
            efficient += 1;
        }
        parts.push(format!(
            "N={fleet} sampled {:.3}/{:.3} eff {:.2e}/{:.2e}",
            g.sampled_fraction.mean, s.sampled_fraction.mean, g.efficiency.mean, s.efficiency.mean
        ));
    }
    outcome(
        sampled_ok && efficient >= 2,
        format!(
            "gcid/static means: {}; sampled >= static at every size: {sampled_ok}; efficiency >= static at {efficient}/3 (>= 2); {:.0} s",
            parts.join(", "),
            started.elapsed().as_secs_f64()
        ),
    )
}

fn bifurcation() -> Outcome {
    let mut cfg = MissionConfig::default();
    cfg.harness.random_storms = false;
    let log = run_episode(&cfg).expect("episode");
    let blooms = log.ticks.iter().flat_map(|t| &t.env).count() > 0;
    let split = log.ticks.iter().filter(|t| {
        t.agents.iter().any(|a| a.dominant == EXPLORE) && t.agents.iter().any(|a| a.dominant == EXPLOIT)
    });
    let split_ticks = split.count();
    let mut transitions = 0;
    for w in log.ticks.windows(2) {
        for (a, b) in w[0].agents.iter().zip(&w[1].agents) {
            if (a.dominant == EXPLORE && b.dominant == EXPLOIT) || (a.dominant == EXPLOIT && b.dominant == EXPLORE) {
                transitions += 1;
            }
        }
    }
    outcome(
        blooms && split_ticks >= 1 && transitions >= 1,
        format!("{split_ticks} ticks with explore and exploit both dominant somewhere (>= 1); {transitions} agent transitions (>= 1)"),
    )
}

fn determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut identical = 0;
    for _ in 0..5 {
        let mut cfg = MissionConfig::default().with_seed(rng.gen_range(0..1_000_000));
        cfg.harness.fleet_size = rng.gen_range(2..=8);
        cfg.harness.duration_s = 1800.0;
        cfg.harness.coalition_mode = if rng.gen_bool(0.5) {
            CoalitionMode::Gcid
        } else {
            CoalitionMode::Static
        };
        cfg.network.drop_probability = rng.gen_range(0.0..0.3);
        cfg.network.latency_ticks = rng.gen_range(0..3);
        cfg.network.resolution = if rng.gen_bool(0.5) { Resolution::Coarse } else { Resolution::Fine };
        cfg.harness.storm_injection = Some(StormInjection {
            agent: rng.gen_range(0..cfg.harness.fleet_size),
            time_s: rng.gen_range(300.0..1500.0),
        });
        let a = run_episode(&cfg).expect("episode").to_jsonl();
        let b = run_episode(&cfg).expect("episode").to_jsonl();
        if a == b {
            identical += 1;
        }
    }
    outcome(identical == 5, format!("{identical}/5 random configs produced byte-identical logs"))
}

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 9] = [
        (1, "zero-sum conservation", zero_sum_conservation),
        (2, "integrator oracle", integrator_oracle),
        (3, "solver exactness", solver_exactness),
        (4, "wire format", wire_format),
        (5, "opinion cascade", opinion_cascade),
        (6, "dropout robustness", dropout_robustness),
        (7, "monte-carlo comparison", monte_carlo_comparison),
        (8, "explore/exploit bifurcation", bifurcation),
        (9, "determinism", determinism),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let o = check();
        println!("{} criterion {n} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
