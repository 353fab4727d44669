//! The explore / exploit / migrate bloom-sampling scenario: two survey
//! zones, growing algae blooms, passing storms, turbidity sensing, the
//! per-option input utilities and the two task-allocation schemes.

mod allocate;
mod environment;
mod explore;
mod inputs;
mod motion;

pub use allocate::greedy_allocate;
pub use environment::{
    sense_turbidity, spawn_bloom, Bloom, EnvEvent, Environment, SamplePoint, SampleStatus, Storm,
};
pub use explore::{voronoi_explore_waypoint, VisitedGrid};
pub use inputs::{
    input_explore, input_exploit, input_migrate, migration_status, AgentMissionState, ExploreSource,
    InputParams, MigrationStatus,
};
pub use motion::{step_motion, MotionLimits};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;

/// Axis-aligned survey rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub name: String,
    /// South-west corner.
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Zone {
    pub fn new(name: impl Into<String>, x: f64, y: f64, width: f64, height: f64) -> Self {
        Zone {
            name: name.into(),
            x,
            y,
            width,
            height,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x && p.x <= self.x + self.width && p.y >= self.y && p.y <= self.y + self.height
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    fn overlaps(&self, other: &Zone) -> bool {
        self.x < other.x + other.width
            && other.x < self.x + self.width
            && self.y < other.y + other.height
            && other.y < self.y + self.height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BloomParams {
    pub growth_duration_s: f64,
    pub max_radius_m: f64,
    /// Blooms dissipate this long after spawning; 0 keeps them forever.
    pub lifetime_s: f64,
    /// Mean time between spawns, per zone.
    pub spawn_mean_interval_s: f64,
}

impl Default for BloomParams {
    fn default() -> Self {
        BloomParams {
            growth_duration_s: 600.0,
            max_radius_m: 40.0,
            lifetime_s: 1800.0,
            spawn_mean_interval_s: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StormParams {
    pub radius_m: f64,
    pub transit_s: f64,
    /// Mean time between storms; 0 disables random storms.
    pub mean_interval_s: f64,
    /// No random storm starts before this time.
    pub earliest_s: f64,
}

impl Default for StormParams {
    fn default() -> Self {
        StormParams {
            radius_m: 200.0,
            transit_s: 300.0,
            mean_interval_s: 2400.0,
            earliest_s: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingParams {
    /// Per-tick detection probability when stopped inside a bloom.
    pub p_max: f64,
    /// At or above this speed nothing is detected.
    pub speed_cutoff: f64,
    /// A detection within this range of a known sample point is not
    /// published again.
    pub dedupe_radius_m: f64,
    /// Coverage-grid cells within this range are marked visited.
    pub coverage_radius_m: f64,
    pub coverage_cell_m: f64,
}

impl Default for SensingParams {
    fn default() -> Self {
        SensingParams {
            p_max: 0.3,
            speed_cutoff: 0.6,
            dedupe_radius_m: 50.0,
            coverage_radius_m: 20.0,
            coverage_cell_m: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingParams {
    /// Distance at which a sampler stops for its target.
    pub arrive_radius_m: f64,
    /// Time spent stopped to take one sample.
    pub duration_s: f64,
    /// Speeds at or below this count as stopped.
    pub stopped_speed: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            arrive_radius_m: 8.0,
            duration_s: 30.0,
            stopped_speed: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub zones: Vec<Zone>,
    /// Zone every agent starts in.
    pub home_zone: usize,
    /// Launch point; agents start in a line abreast around it.
    pub launch: Point,
    pub launch_spacing_m: f64,
    pub bloom: BloomParams,
    pub storm: StormParams,
    pub sensing: SensingParams,
    pub sampling: SamplingParams,
    pub inputs: InputParams,
    pub motion: MotionLimits,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            zones: vec![
                Zone::new("X-ray", 0.0, 0.0, 300.0, 350.0),
                Zone::new("Yankee", 400.0, 0.0, 300.0, 350.0),
            ],
            home_zone: 0,
            launch: Point::new(150.0, 20.0),
            launch_spacing_m: 10.0,
            bloom: BloomParams::default(),
            storm: StormParams::default(),
            sensing: SensingParams::default(),
            sampling: SamplingParams::default(),
            inputs: InputParams::default(),
            motion: MotionLimits::default(),
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        if self.zones.len() < 2 {
            return Err(Error::Config("the scenario needs at least two zones".into()));
        }
        for (i, a) in self.zones.iter().enumerate() {
            if !(a.width > 0.0 && a.height > 0.0) {
                return Err(Error::Config(format!("zone `{}` has no area", a.name)));
            }
            if let Some(b) = self.zones[..i].iter().find(|b| b.overlaps(a)) {
                return Err(Error::Config(format!("zones `{}` and `{}` overlap", b.name, a.name)));
            }
        }
        if self.home_zone >= self.zones.len() {
            return Err(Error::Config(format!("home_zone {} out of range", self.home_zone)));
        }
        let b = &self.bloom;
        if !(b.growth_duration_s > 0.0 && b.max_radius_m > 0.0 && b.lifetime_s >= 0.0 && b.spawn_mean_interval_s >= 0.0) {
            return Err(Error::Config(format!("invalid bloom parameters {b:?}")));
        }
        let s = &self.storm;
        if !(s.radius_m > 0.0 && s.transit_s > 0.0 && s.mean_interval_s >= 0.0) {
            return Err(Error::Config(format!("invalid storm parameters {s:?}")));
        }
        let se = &self.sensing;
        if !((0.0..=1.0).contains(&se.p_max) && se.speed_cutoff > 0.0 && se.coverage_cell_m > 0.0) {
            return Err(Error::Config(format!("invalid sensing parameters {se:?}")));
        }
        if !(self.sampling.duration_s >= 0.0 && self.sampling.arrive_radius_m > 0.0) {
            return Err(Error::Config("invalid sampling parameters".into()));
        }
        self.inputs.validate()?;
        self.motion.validate()?;
        Ok(())
    }

    /// Zone a migration from `from` heads to: the next zone in order.
    pub fn migration_target(&self, from: usize) -> usize {
        (from + 1) % self.zones.len()
    }

    pub fn launch_positions(&self, fleet: usize) -> Vec<Point> {
        let offset = (fleet as f64 - 1.0) / 2.0;
        (0..fleet)
            .map(|i| Point::new(self.launch.x + (i as f64 - offset) * self.launch_spacing_m, self.launch.y))
            .collect()
    }
}
