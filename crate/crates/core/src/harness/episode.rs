use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{BehaviorKind, CoalitionMode, MissionConfig};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::ivp::{active_weights, make_station_keep_objective, make_transit_objective, solve, PiecewiseObjective};
use crate::net::{connectivity, decode, MessageBuffer, NetStats, Network};
use crate::opinion::{dominant_option, engine_tick, project_zero_sum, OpinionInput, OpinionState, ZERO_SUM_TOLERANCE};
use crate::scenario::{
    greedy_allocate, input_exploit, input_explore, input_migrate, migration_status, sense_turbidity, step_motion,
    voronoi_explore_waypoint, AgentMissionState, Bloom, EnvEvent, Environment, MigrationStatus, SamplePoint,
    VisitedGrid,
};

/// Display names for agent indices.
pub const AGENT_NAMES: [&str; 8] = ["Abe", "Ben", "Deb", "Eve", "Fin", "Max", "Ned", "Oak"];

pub fn agent_name(index: usize) -> String {
    AGENT_NAMES
        .get(index)
        .map_or_else(|| format!("agent{index}"), |n| (*n).to_string())
}

/// Distance inside which migrate transit stops at the zone center.
const TRANSIT_ARRIVE_M: f64 = 10.0;
/// Cohesion only pulls agents farther than this from the neighbor centroid.
const COHESION_SLACK_M: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Explore,
    Exploit,
    Migrate,
    /// Safety hold while out of communication.
    AllStop,
}

impl Mode {
    pub fn from_option(index: usize) -> Mode {
        match index {
            0 => Mode::Explore,
            1 => Mode::Exploit,
            _ => Mode::Migrate,
        }
    }

    pub fn option(self) -> Option<usize> {
        match self {
            Mode::Explore => Some(0),
            Mode::Exploit => Some(1),
            Mode::Migrate => Some(2),
            Mode::AllStop => None,
        }
    }
}

/// Baseline: the first half of the fleet (rounded up) explores and the
/// rest exploit, and everyone migrates once a storm is known.
pub fn static_coalition_policy(index: usize, fleet_size: usize, storm_detected: bool) -> Mode {
    if storm_detected {
        Mode::Migrate
    } else if index < fleet_size.div_ceil(2) {
        Mode::Explore
    } else {
        Mode::Exploit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub z: Vec<f64>,
    pub u: f64,
    pub dominant: usize,
    pub mode: Mode,
    pub degree: usize,
    pub zone: usize,
    pub distance: f64,
    pub sampling: bool,
    /// Sample point the agent is assigned to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HarnessEvent {
    StormDetected { agent: usize },
    StormInjected { agent: usize },
    MigrationComplete { agent: usize, zone: usize },
    DropoutStarted { agent: usize },
    DropoutEnded { agent: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub agents: Vec<AgentRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub env: Vec<EnvEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<HarnessEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub seed: u64,
    pub fleet_size: usize,
    pub duration_s: f64,
    pub tick_s: f64,
    pub coalition_mode: CoalitionMode,
    pub options: Vec<String>,
    pub zones: Vec<String>,
    pub agent_names: Vec<String>,
    pub config_hash: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub net: NetStats,
    pub stale_dropped: u64,
    pub saturated_messages: u64,
    pub malformed_messages: u64,
    pub no_active_behavior: u64,
    pub degenerate_goals: u64,
    pub max_zero_sum_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Header(LogHeader),
    Tick(TickRecord),
    Summary(Diagnostics),
}

/// Everything that happened in one episode, one record per agent per tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub header: LogHeader,
    pub ticks: Vec<TickRecord>,
    pub diagnostics: Diagnostics,
}

impl EpisodeLog {
    /// Line-delimited JSON: header, one line per tick, summary.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut line = |l: &LogLine| -> std::io::Result<()> {
            serde_json::to_writer(&mut out, l)?;
            out.write_all(b"\n")
        };
        line(&LogLine::Header(self.header.clone()))?;
        for t in &self.ticks {
            line(&LogLine::Tick(t.clone()))?;
        }
        line(&LogLine::Summary(self.diagnostics.clone()))
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut header = None;
        let mut ticks = Vec::new();
        let mut diagnostics = None;
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::InvalidInput(format!("log line {}: {e}", n + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine =
                serde_json::from_str(&line).map_err(|e| Error::InvalidInput(format!("log line {}: {e}", n + 1)))?;
            match parsed {
                LogLine::Header(h) => header = Some(h),
                LogLine::Tick(t) => ticks.push(t),
                LogLine::Summary(d) => diagnostics = Some(d),
            }
        }
        Ok(EpisodeLog {
            header: header.ok_or_else(|| Error::InvalidInput("log has no header".into()))?,
            ticks,
            diagnostics: diagnostics.unwrap_or_default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }
}

struct Agent {
    mission: AgentMissionState,
    opinion: OpinionState,
    buffer: MessageBuffer,
    seq: u16,
    mode: Mode,
    dominant: usize,
    visited: VisitedGrid,
    visited_zone: usize,
    target: Option<usize>,
    sampled_for: f64,
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs one episode. Deterministic in the configuration, seed included.
pub fn run_episode(cfg: &MissionConfig) -> Result<EpisodeLog> {
    cfg.validate()?;
    let h = &cfg.harness;
    let seed = h.seed;
    let n = h.fleet_size;
    let dt = h.tick_s;
    let engine = cfg.engine_params()?;
    let behavior_set = cfg.behavior_set()?;
    let space = cfg.decision_space()?;
    let codec = cfg.codec()?;
    let sc = &cfg.scenario;
    let options = cfg.option_set()?;
    let n_options = options.count();

    let mut env_params = sc.clone();
    if !h.random_storms {
        env_params.storm.mean_interval_s = 0.0;
    }
    let mut env = Environment::generate(&env_params, h.duration_s, &mut rng_stream(seed, 1));
    let mut sense_rng = rng_stream(seed, 2);
    let mut init_rng = rng_stream(seed, 3);
    let mut network = Network::new(cfg.connectivity(), rng_stream(seed, 4).gen());
    let station_keep = make_station_keep_objective("station_keep", &space)?;

    let noise = Normal::new(0.0, h.initial_opinion_noise).map_err(|e| Error::Config(e.to_string()))?;
    let mut agents: Vec<Agent> = sc
        .launch_positions(n)
        .into_iter()
        .map(|p| {
            let raw: Vec<f64> = (0..n_options).map(|_| noise.sample(&mut init_rng)).collect();
            Ok(Agent {
                mission: AgentMissionState::new(p, sc.home_zone),
                opinion: OpinionState {
                    z: project_zero_sum(&raw)?,
                    u: h.initial_attention,
                    time: 0.0,
                },
                buffer: MessageBuffer::new(),
                seq: 0,
                mode: Mode::Explore,
                dominant: 0,
                visited: VisitedGrid::new(&sc.zones[sc.home_zone], sc.sensing.coverage_cell_m),
                visited_zone: sc.home_zone,
                target: None,
                sampled_for: 0.0,
            })
        })
        .collect::<Result<_>>()?;
    for a in &mut agents {
        a.dominant = dominant_option(&a.opinion.z)?;
        a.mode = Mode::from_option(a.dominant);
    }

    let mut diagnostics = Diagnostics::default();
    let mut ticks = Vec::with_capacity(cfg.ticks() as usize);
    let mut injected = false;
    let mut dropout_on = false;

    for k in 1..=cfg.ticks() {
        let now = k as f64 * dt;
        let env_events = env.advance(now);
        let mut events = Vec::new();

        let positions: Vec<Point> = agents.iter().map(|a| a.mission.position).collect();
        let mut net = connectivity(&positions, &cfg.connectivity());
        if let Some(d) = &h.dropout {
            let active = d.is_active(now);
            if active != dropout_on {
                dropout_on = active;
                events.push(if active {
                    HarnessEvent::DropoutStarted { agent: d.agent }
                } else {
                    HarnessEvent::DropoutEnded { agent: d.agent }
                });
            }
            if active {
                net.isolate(d.agent);
            }
        }

        // storm detection, latched until the migration completes
        for (i, a) in agents.iter_mut().enumerate() {
            let m = &mut a.mission;
            if m.storm_detected {
                continue;
            }
            if env.storm_at(&m.position, now).is_some_and(|s| s.zone == m.assigned_zone) {
                m.storm_detected = true;
                m.migration_destination.get_or_insert(sc.migration_target(m.assigned_zone));
                events.push(HarnessEvent::StormDetected { agent: i });
            }
        }
        if let Some(s) = &h.storm_injection {
            if !injected && now >= s.time_s && net.is_connected() {
                injected = true;
                let m = &mut agents[s.agent].mission;
                m.storm_detected = true;
                m.migration_destination.get_or_insert(sc.migration_target(m.assigned_zone));
                events.push(HarnessEvent::StormInjected { agent: s.agent });
            }
        }
        if h.coalition_mode == CoalitionMode::Static {
            // the baseline fleet relays the storm alarm itself
            let alarms: Vec<Option<usize>> = agents
                .iter()
                .map(|a| a.mission.storm_detected.then_some(a.mission.migration_destination).flatten())
                .collect();
            for i in 0..n {
                if agents[i].mission.storm_detected {
                    continue;
                }
                let heard = net.neighbors(i).find_map(|k| alarms[k]);
                if let Some(dest) = heard {
                    let m = &mut agents[i].mission;
                    if !sc.zones[dest].contains(&m.position) {
                        m.storm_detected = true;
                        m.migration_destination = Some(dest);
                    }
                }
            }
        }

        // opinion exchange
        let outgoing: Vec<(usize, Vec<u8>)> = agents
            .iter_mut()
            .enumerate()
            .map(|(i, a)| {
                a.seq = a.seq.wrapping_add(1);
                let enc = codec.encode(i as u8, a.seq, &a.opinion.z, cfg.network.resolution)?;
                if enc.saturated {
                    diagnostics.saturated_messages += 1;
                }
                Ok((i, enc.bytes))
            })
            .collect::<Result<_>>()?;
        for d in network.exchange(k, &outgoing, &net) {
            match decode(&d.bytes) {
                Ok(msg) => {
                    agents[d.to].buffer.update(msg, now);
                }
                Err(_) => diagnostics.malformed_messages += 1,
            }
        }

        // group choice
        let open_in_zone: Vec<Vec<SamplePoint>> = (0..sc.zones.len())
            .map(|z| {
                env.open_samples()
                    .filter(|s| env.blooms[s.bloom_id].zone == z)
                    .cloned()
                    .collect()
            })
            .collect();
        let prev_modes: Vec<Mode> = agents.iter().map(|a| a.mode).collect();
        let prev_dest: Vec<Option<usize>> = agents.iter().map(|a| a.mission.migration_destination).collect();
        let mut next = Vec::with_capacity(n);
        for (i, a) in agents.iter().enumerate() {
            let neighbors: Vec<usize> = net.neighbors(i).collect();
            let neighbor_pos: Vec<Point> = neighbors.iter().map(|&k| positions[k]).collect();
            let views = a
                .buffer
                .neighbor_snapshot(&net.adjacency[i], i, now, cfg.network.ttl_s, &codec);
            let m = &a.mission;
            let open = &open_in_zone[m.assigned_zone];
            let destination = m.migration_destination.map(|d| &sc.zones[d]);
            let b = vec![
                input_explore(m, !open.is_empty(), &sc.inputs),
                input_exploit(m, open, &sc.inputs),
                input_migrate(m, a.mode == Mode::Migrate, &neighbor_pos, destination, now, &sc.inputs),
            ];
            let state = engine_tick(&a.opinion, &OpinionInput { b }, &views, &engine, dt)?;
            let residual = state.z.iter().sum::<f64>().abs();
            diagnostics.max_zero_sum_residual = diagnostics.max_zero_sum_residual.max(residual);
            if residual > ZERO_SUM_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "agent {i} opinion left the zero-sum subspace at t = {now} (residual {residual:e})"
                )));
            }
            next.push((state, neighbors));
        }

        let mut neighbor_lists = Vec::with_capacity(n);
        for (i, (state, neighbors)) in next.into_iter().enumerate() {
            let a = &mut agents[i];
            a.opinion = state;
            a.dominant = dominant_option(&a.opinion.z)?;
            a.mode = match h.coalition_mode {
                CoalitionMode::Gcid => Mode::from_option(a.dominant),
                CoalitionMode::Static => static_coalition_policy(i, n, a.mission.storm_detected),
            };
            if h.dropout.as_ref().is_some_and(|d| d.agent == i && d.is_active(now)) {
                a.mode = Mode::AllStop;
            }
            let m = &mut a.mission;
            if a.mode == Mode::Migrate {
                if m.migration_destination.is_none() {
                    let zone = m.assigned_zone;
                    let shared = neighbors
                        .iter()
                        .filter(|&&k| prev_modes[k] == Mode::Migrate)
                        .filter_map(|&k| prev_dest[k])
                        .find(|&d| d != zone);
                    // just arrived: wait for the rest rather than pick a new zone
                    let settling = m
                        .last_migration_time
                        .is_some_and(|t| now - t < sc.inputs.cooldown_s);
                    m.migration_destination = shared.or((!settling).then(|| sc.migration_target(zone)));
                }
            } else if !m.storm_detected {
                m.migration_destination = None;
            }
            neighbor_lists.push(neighbors);
        }

        // sample allocation, each agent over what it can see
        env.release_claims();
        let modes: Vec<Mode> = agents.iter().map(|a| a.mode).collect();
        for i in 0..n {
            if modes[i] != Mode::Exploit {
                agents[i].target = None;
                continue;
            }
            let zone = agents[i].mission.assigned_zone;
            let mut samplers = vec![(i, positions[i])];
            samplers.extend(
                neighbor_lists[i]
                    .iter()
                    .filter(|&&k| modes[k] == Mode::Exploit)
                    .map(|&k| (k, positions[k])),
            );
            let points: Vec<(usize, Point)> = open_in_zone[zone].iter().map(|s| (s.id, s.location)).collect();
            let target = greedy_allocate(&samplers, &points).get(&i).copied().flatten();
            if target != agents[i].target {
                agents[i].sampled_for = 0.0;
            }
            agents[i].target = target;
        }
        for a in agents.iter_mut() {
            a.mission.currently_sampling = a.target.is_some();
        }
        for a in &agents {
            if let Some(t) = a.target {
                env.claim(t);
            }
        }

        // individual decisions and motion
        for i in 0..n {
            let fellows: Vec<Point> = neighbor_lists[i]
                .iter()
                .filter(|&&k| modes[k] == Mode::Explore && agents[k].mission.assigned_zone == agents[i].mission.assigned_zone)
                .map(|&k| positions[k])
                .collect();
            let neighbor_pos: Vec<Point> = neighbor_lists[i].iter().map(|&k| positions[k]).collect();
            let a = &mut agents[i];
            let own = a.mission.position;
            let zone_idx = a.mission.assigned_zone;
            if a.visited_zone != zone_idx {
                a.visited = VisitedGrid::new(&sc.zones[zone_idx], sc.sensing.coverage_cell_m);
                a.visited_zone = zone_idx;
            }

            let weights = match a.mode.option() {
                Some(o) => active_weights(o, &behavior_set),
                None => vec![0.0; behavior_set.names().len()],
            };
            let mut objectives = Vec::with_capacity(weights.len());
            for (q, b) in cfg.behaviors.iter().enumerate() {
                if weights[q] == 0.0 {
                    objectives.push(PiecewiseObjective::constant(b.name.clone(), 0.0));
                    continue;
                }
                let goal = match b.kind {
                    BehaviorKind::Survey => Some(voronoi_explore_waypoint(
                        &own,
                        &fellows,
                        &sc.zones[zone_idx],
                        &mut a.visited,
                        sc.sensing.coverage_radius_m,
                    )),
                    BehaviorKind::Sample => match a.target {
                        Some(t) => Some(env.samples[t].location).filter(|p| p.distance(&own) > sc.sampling.arrive_radius_m),
                        None => Some(voronoi_explore_waypoint(
                            &own,
                            &fellows,
                            &sc.zones[zone_idx],
                            &mut a.visited,
                            sc.sensing.coverage_radius_m,
                        )),
                    },
                    BehaviorKind::Transit => a
                        .mission
                        .migration_destination
                        .map(|d| sc.zones[d].center())
                        .filter(|p| p.distance(&own) > TRANSIT_ARRIVE_M),
                    BehaviorKind::Cohesion => {
                        let c = Point::centroid(&neighbor_pos);
                        match c {
                            Some(c) if c.distance(&own) > COHESION_SLACK_M => Some(c),
                            _ => {
                                objectives.push(PiecewiseObjective::constant(b.name.clone(), 0.0));
                                continue;
                            }
                        }
                    }
                    BehaviorKind::StationKeep => None,
                };
                let objective = match goal {
                    Some(g) => match make_transit_objective(b.name.clone(), own, g, b.cruise_speed, &space) {
                        Ok(o) => o,
                        Err(Error::DegenerateGoal) => {
                            diagnostics.degenerate_goals += 1;
                            make_station_keep_objective(b.name.clone(), &space)?
                        }
                        Err(e) => return Err(e),
                    },
                    None => make_station_keep_objective(b.name.clone(), &space)?,
                };
                objectives.push(objective);
            }
            let (heading, speed) = match solve(&space, &objectives, &weights) {
                Ok(d) => (
                    d.value(&space, "heading").unwrap_or(a.mission.heading),
                    d.value(&space, "speed").unwrap_or(0.0),
                ),
                Err(Error::NoActiveBehavior) => {
                    diagnostics.no_active_behavior += 1;
                    let d = solve(&space, std::slice::from_ref(&station_keep), &[1.0])?;
                    (a.mission.heading, d.value(&space, "speed").unwrap_or(0.0))
                }
                Err(e) => return Err(e),
            };
            step_motion(
                &mut a.mission,
                heading,
                speed,
                &sc.motion,
                sc.inputs.energy_wh_per_m,
                sc.inputs.battery_capacity_wh,
                dt,
            );
        }

        // sensing, coverage and sampling
        let positions: Vec<Point> = agents.iter().map(|a| a.mission.position).collect();
        let blooms: Vec<Bloom> = env.active_blooms(now).cloned().collect();
        let mut env_events = env_events;
        for i in 0..n {
            let a = &mut agents[i];
            a.visited.mark(&positions[i], sc.sensing.coverage_radius_m);
            for &k in &neighbor_lists[i] {
                a.visited.mark(&positions[k], sc.sensing.coverage_radius_m);
            }
            if let Some(bloom) = sense_turbidity(&positions[i], a.mission.speed, &blooms, now, &sc.sensing, &mut sense_rng) {
                if let Some(point) = env.publish_detection(positions[i], bloom) {
                    env_events.push(EnvEvent::Detection { agent: i, point, bloom });
                }
            }
            let at_target = a.target.filter(|&t| {
                env.samples[t].status.is_open()
                    && env.samples[t].location.distance(&positions[i]) <= sc.sampling.arrive_radius_m
                    && a.mission.speed <= sc.sampling.stopped_speed
            });
            match at_target {
                Some(t) => {
                    a.sampled_for += dt;
                    if a.sampled_for >= sc.sampling.duration_s {
                        if let Some(bloom) = env.complete_sample(t) {
                            env_events.push(EnvEvent::Sampled { agent: i, point: t, bloom });
                        }
                        a.target = None;
                        a.sampled_for = 0.0;
                        a.mission.currently_sampling = false;
                    }
                }
                None => a.sampled_for = 0.0,
            }
        }

        // migration completion
        for i in 0..n {
            let a = &mut agents[i];
            let Some(dest) = a.mission.migration_destination else {
                continue;
            };
            if a.mode != Mode::Migrate {
                continue;
            }
            let neighbor_pos: Vec<Point> = neighbor_lists[i].iter().map(|&k| positions[k]).collect();
            if migration_status(&positions[i], &neighbor_pos, &sc.zones[dest]) == MigrationStatus::Complete {
                let m = &mut a.mission;
                m.last_migration_time = Some(now);
                m.assigned_zone = dest;
                m.migration_destination = None;
                m.storm_detected = false;
                events.push(HarnessEvent::MigrationComplete { agent: i, zone: dest });
            }
        }

        let records = agents
            .iter()
            .enumerate()
            .map(|(i, a)| AgentRecord {
                agent: i,
                x: a.mission.position.x,
                y: a.mission.position.y,
                heading: a.mission.heading,
                speed: a.mission.speed,
                z: a.opinion.z.clone(),
                u: a.opinion.u,
                dominant: a.dominant,
                mode: a.mode,
                degree: net.degrees[i],
                zone: a.mission.assigned_zone,
                distance: a.mission.distance_traveled,
                sampling: a.mission.currently_sampling,
                target: a.target,
            })
            .collect();
        ticks.push(TickRecord {
            t: now,
            agents: records,
            env: env_events,
            events,
        });
    }

    diagnostics.net = network.stats();
    diagnostics.stale_dropped = agents.iter().map(|a| a.buffer.stale_dropped()).sum();
    Ok(EpisodeLog {
        header: LogHeader {
            seed,
            fleet_size: n,
            duration_s: h.duration_s,
            tick_s: dt,
            coalition_mode: h.coalition_mode,
            options: options.labels().to_vec(),
            zones: sc.zones.iter().map(|z| z.name.clone()).collect(),
            agent_names: (0..n).map(agent_name).collect(),
            config_hash: cfg.hash(),
        },
        ticks,
        diagnostics,
    })
}
