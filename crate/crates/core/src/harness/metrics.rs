use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::episode::{EpisodeLog, HarnessEvent};
use crate::scenario::EnvEvent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Sampled blooms over spawned blooms; 1.0 when nothing spawned.
    pub sampled_fraction: f64,
    /// Samples per meter of fleet travel; 0.0 when nobody moved.
    pub efficiency: f64,
    /// Agent-level migration completions.
    pub migration_count: usize,
    /// From the first storm detection to the first tick at which every
    /// agent's dominant option is migrate.
    pub cascade_latency: Option<f64>,
    pub blooms_spawned: usize,
    pub blooms_sampled: usize,
    pub samples: usize,
    pub fleet_distance: f64,
    /// No bloom spawned, so `sampled_fraction` is vacuous.
    pub no_blooms: bool,
    /// Nobody moved, so `efficiency` is vacuous.
    pub no_travel: bool,
}

pub fn compute_metrics(log: &EpisodeLog) -> Metrics {
    let migrate = log.header.options.iter().position(|o| o == "migrate");
    let mut spawned = 0;
    let mut sampled = BTreeSet::new();
    let mut samples = 0;
    let mut migration_count = 0;
    let mut storm_at = None;
    let mut cascade_latency = None;

    for tick in &log.ticks {
        for e in &tick.env {
            match e {
                EnvEvent::BloomSpawned { .. } => spawned += 1,
                EnvEvent::Sampled { bloom, .. } => {
                    samples += 1;
                    sampled.insert(*bloom);
                }
                _ => {}
            }
        }
        for e in &tick.events {
            match e {
                HarnessEvent::StormDetected { .. } | HarnessEvent::StormInjected { .. } => {
                    storm_at.get_or_insert(tick.t);
                }
                HarnessEvent::MigrationComplete { .. } => migration_count += 1,
                _ => {}
            }
        }
        if let (Some(t0), None) = (storm_at, cascade_latency) {
            if !tick.agents.is_empty() && tick.agents.iter().all(|a| Some(a.dominant) == migrate) {
                cascade_latency = Some(tick.t - t0);
            }
        }
    }

    let fleet_distance: f64 = log
        .ticks
        .last()
        .map_or(0.0, |t| t.agents.iter().map(|a| a.distance).sum());
    let no_blooms = spawned == 0;
    let no_travel = fleet_distance <= 0.0;
    Metrics {
        sampled_fraction: if no_blooms { 1.0 } else { sampled.len() as f64 / spawned as f64 },
        efficiency: if no_travel { 0.0 } else { samples as f64 / fleet_distance },
        migration_count,
        cascade_latency,
        blooms_spawned: spawned,
        blooms_sampled: sampled.len(),
        samples,
        fleet_distance,
        no_blooms,
        no_travel,
    }
}
