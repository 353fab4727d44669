//! Per-option input utilities `b = (g1, g2, g3)` computed from local state.
//! All three are piecewise linear and bounded.

use serde::{Deserialize, Serialize};

use super::{SamplePoint, Zone};
use crate::error::{Error, Result};
use crate::geom::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMissionState {
    pub position: Point,
    /// Compass degrees.
    pub heading: f64,
    pub speed: f64,
    /// Fraction of battery consumed, in [0, 1].
    pub battery_used: f64,
    pub distance_traveled: f64,
    pub currently_sampling: bool,
    pub last_migration_time: Option<f64>,
    pub storm_detected: bool,
    /// Zone the agent is working in.
    pub assigned_zone: usize,
    /// Set while a migration is under way.
    pub migration_destination: Option<usize>,
}

impl AgentMissionState {
    pub fn new(position: Point, assigned_zone: usize) -> Self {
        AgentMissionState {
            position,
            heading: 0.0,
            speed: 0.0,
            battery_used: 0.0,
            distance_traveled: 0.0,
            currently_sampling: false,
            last_migration_time: None,
            storm_detected: false,
            assigned_zone,
            migration_destination: None,
        }
    }
}

/// What drives the explore utility's growth term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExploreSource {
    #[default]
    Distance,
    /// Battery consumed, converted back to meters at the fixed energy rate.
    Battery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputParams {
    pub k_explore: f64,
    pub distance_cap_m: f64,
    pub bias_no_samples: f64,
    pub explore_source: ExploreSource,
    pub energy_wh_per_m: f64,
    pub battery_capacity_wh: f64,

    /// Signed slope of the exploit utility in range to the nearest open
    /// sample.
    pub k_exploit: f64,
    pub range_cap_m: f64,
    pub exploit_max: f64,
    pub bias_sampling: f64,

    pub bias_storm: f64,
    pub bias_migrating: f64,
    pub bias_cooldown: f64,
    pub cooldown_s: f64,
}

impl Default for InputParams {
    fn default() -> Self {
        InputParams {
            k_explore: 0.5,
            distance_cap_m: 2000.0,
            bias_no_samples: 0.5,
            explore_source: ExploreSource::Distance,
            energy_wh_per_m: 0.05,
            battery_capacity_wh: 1000.0,
            k_exploit: 1.0,
            range_cap_m: 300.0,
            exploit_max: 1.0,
            bias_sampling: 1.0,
            bias_storm: 5.0,
            bias_migrating: 1.0,
            bias_cooldown: 2.0,
            cooldown_s: 600.0,
        }
    }
}

impl InputParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.distance_cap_m > 0.0
            && self.range_cap_m > 0.0
            && self.exploit_max >= 0.0
            && self.cooldown_s > 0.0
            && self.energy_wh_per_m > 0.0
            && self.battery_capacity_wh > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid input utility parameters {self:?}")))
        }
    }
}

/// Explore utility: grows linearly with distance traveled up to a cap,
/// plus a bias while no sample points are open.
pub fn input_explore(agent: &AgentMissionState, samples_available: bool, p: &InputParams) -> f64 {
    let distance = match p.explore_source {
        ExploreSource::Distance => agent.distance_traveled,
        ExploreSource::Battery => agent.battery_used * p.battery_capacity_wh / p.energy_wh_per_m,
    };
    let growth = p.k_explore * distance.clamp(0.0, p.distance_cap_m) / p.distance_cap_m;
    let bias = if samples_available { 0.0 } else { p.bias_no_samples };
    growth + bias
}

/// Exploit utility: linear in range to the nearest open sample point,
/// saturating at `exploit_max`, plus a bias while sampling. Zero when no
/// point is open.
pub fn input_exploit(agent: &AgentMissionState, samples: &[SamplePoint], p: &InputParams) -> f64 {
    let nearest = samples
        .iter()
        .filter(|s| s.status.is_open())
        .map(|s| agent.position.distance(&s.location))
        .min_by(f64::total_cmp);
    let Some(range) = nearest else {
        return 0.0;
    };
    let ramp = (p.k_exploit * range / p.range_cap_m).clamp(-p.exploit_max, p.exploit_max);
    let bias = if agent.currently_sampling { p.bias_sampling } else { 0.0 };
    ramp + bias
}

/// Migrate utility: a large bias on storm detection, a bias while
/// migrating and some known neighbor is still outside the destination, and
/// a negative bias after a completed migration that decays linearly to
/// zero over the cooldown.
pub fn input_migrate(
    agent: &AgentMissionState,
    migrating: bool,
    neighbor_positions: &[Point],
    destination: Option<&Zone>,
    now: f64,
    p: &InputParams,
) -> f64 {
    let storm = if agent.storm_detected { p.bias_storm } else { 0.0 };
    let waiting = match destination {
        Some(zone) if migrating && neighbor_positions.iter().any(|q| !zone.contains(q)) => p.bias_migrating,
        _ => 0.0,
    };
    let cooldown = agent
        .last_migration_time
        .map_or(0.0, |t| (p.bias_cooldown * (1.0 - (now - t) / p.cooldown_s)).max(0.0));
    storm + waiting - cooldown
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MigrationStatus {
    InTransit,
    Complete,
}

/// Complete once the agent and every currently known neighbor are inside
/// the destination zone.
pub fn migration_status(position: &Point, neighbor_positions: &[Point], destination: &Zone) -> MigrationStatus {
    if destination.contains(position) && neighbor_positions.iter().all(|q| destination.contains(q)) {
        MigrationStatus::Complete
    } else {
        MigrationStatus::InTransit
    }
}
