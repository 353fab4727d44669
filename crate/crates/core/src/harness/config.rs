//! Mission configuration: one TOML file covering every module.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ivp::{BehaviorSet, DecisionSpace};
use crate::net::{ConnectivityModel, OpinionCodec, Resolution};
use crate::opinion::{AttentionParams, CouplingTensor, EngineParams, OptionSet, Saturation};
use crate::scenario::ScenarioParams;

/// Shipped default configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../../config/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoalitionMode {
    #[default]
    Gcid,
    /// Fixed half-explore / half-exploit split.
    Static,
}

impl CoalitionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CoalitionMode::Gcid => "gcid",
            CoalitionMode::Static => "static",
        }
    }
}

impl std::str::FromStr for CoalitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcid" => Ok(CoalitionMode::Gcid),
            "static" => Ok(CoalitionMode::Static),
            other => Err(Error::InvalidArgument(format!("unknown coalition mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionConfig {
    pub name: String,
    pub alpha_self: f64,
    pub a_same: f64,
    /// Inter-agent gain from each other option, keyed by option name.
    #[serde(default)]
    pub a_diff: BTreeMap<String, f64>,
    /// Intra-agent gain from each other option, keyed by option name.
    #[serde(default)]
    pub gamma_self: BTreeMap<String, f64>,
    /// Behaviors this option activates.
    pub behaviors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingConfig {
    pub resistance: f64,
    pub saturation: Saturation,
    pub substeps: u32,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig {
            resistance: 1.0,
            saturation: Saturation::Tanh,
            substeps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionConfig {
    pub tau_u: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub hill_n: f64,
    pub hill_half: f64,
    pub self_loop: bool,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        let a = AttentionParams::default();
        AttentionConfig {
            tau_u: a.tau_u,
            u_min: a.u_min,
            u_max: a.u_max,
            hill_n: a.hill_n,
            hill_half: a.hill_half,
            self_loop: true,
        }
    }
}

/// What a behavior does on the helm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    /// Voronoi coverage search of the working zone.
    Survey,
    /// Travel to the allocated sample point and hold there.
    Sample,
    /// Travel to the migration destination.
    Transit,
    /// Close on the centroid of current neighbors.
    Cohesion,
    StationKeep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorConfig {
    pub name: String,
    pub kind: BehaviorKind,
    pub weight: f64,
    #[serde(default)]
    pub cruise_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub comm_range_m: f64,
    pub drop_probability: f64,
    pub latency_ticks: u32,
    pub resolution: Resolution,
    pub z_clip: f64,
    /// Neighbor opinions older than this are ignored.
    pub ttl_s: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let m = ConnectivityModel::default();
        NetworkConfig {
            comm_range_m: m.comm_range,
            drop_probability: m.drop_probability,
            latency_ticks: m.latency_ticks,
            resolution: Resolution::Fine,
            z_clip: crate::net::DEFAULT_Z_CLIP,
            ttl_s: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecisionConfig {
    pub heading_step_deg: f64,
    pub speed_max: f64,
    pub speed_step: f64,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        DecisionConfig {
            heading_step_deg: 1.0,
            speed_max: 2.0,
            speed_step: 0.1,
        }
    }
}

/// Storm flag raised directly on one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StormInjection {
    /// Raised at the first tick at or after this time when the fleet's
    /// network is connected.
    pub time_s: f64,
    pub agent: usize,
}

/// Scripted loss of one agent's communications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dropout {
    pub agent: usize,
    pub start_s: f64,
    pub duration_s: f64,
}

impl Dropout {
    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start_s && t < self.start_s + self.duration_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub fleet_size: usize,
    pub duration_s: f64,
    pub tick_s: f64,
    pub seed: u64,
    pub coalition_mode: CoalitionMode,
    pub initial_attention: f64,
    /// Standard deviation of the initial opinion perturbation.
    pub initial_opinion_noise: f64,
    /// Turn off the randomly scheduled storms.
    pub random_storms: bool,
    pub storm_injection: Option<StormInjection>,
    pub dropout: Option<Dropout>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            fleet_size: 8,
            duration_s: 7200.0,
            tick_s: 1.0,
            seed: 1,
            coalition_mode: CoalitionMode::Gcid,
            initial_attention: 0.0,
            initial_opinion_noise: 0.01,
            random_storms: true,
            storm_injection: None,
            dropout: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    pub harness: HarnessConfig,
    pub options: Vec<OptionConfig>,
    #[serde(default)]
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub attention: AttentionConfig,
    pub behaviors: Vec<BehaviorConfig>,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub decision: DecisionConfig,
    #[serde(default)]
    pub scenario: ScenarioParams,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG).expect("shipped default config is valid")
    }
}

impl MissionConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: MissionConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.harness.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.harness;
        if h.fleet_size == 0 || h.fleet_size > 256 {
            return Err(Error::Config(format!("fleet_size must be in 1..=256, got {}", h.fleet_size)));
        }
        if !(h.tick_s > 0.0 && h.duration_s > 0.0) {
            return Err(Error::Config("tick_s and duration_s must be positive".into()));
        }
        if !(h.initial_attention >= 0.0 && h.initial_opinion_noise >= 0.0) {
            return Err(Error::Config("initial attention and opinion noise must be non-negative".into()));
        }
        if let Some(s) = &h.storm_injection {
            if s.agent >= h.fleet_size {
                return Err(Error::Config(format!("storm injection agent {} not in fleet", s.agent)));
            }
        }
        if let Some(d) = &h.dropout {
            if d.agent >= h.fleet_size || !(d.duration_s >= 0.0) {
                return Err(Error::Config(format!("invalid dropout {d:?}")));
            }
        }
        let options = self.option_set()?;
        for (name, expected) in [("explore", 0), ("exploit", 1), ("migrate", 2)] {
            if options.index_of(name) != Some(expected) {
                return Err(Error::Config(
                    "options must be explore, exploit, migrate in that order".into(),
                ));
            }
        }
        self.engine_params()?.validate()?;
        self.behavior_set()?;
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.behaviors {
            if !seen.insert(b.name.as_str()) {
                return Err(Error::Config(format!("duplicate behavior `{}`", b.name)));
            }
            if !(b.cruise_speed >= 0.0 && b.cruise_speed <= self.decision.speed_max) {
                return Err(Error::Config(format!("behavior `{}` cruise speed out of range", b.name)));
            }
        }
        self.connectivity().validate()?;
        self.codec()?;
        if !(self.network.ttl_s >= 0.0) {
            return Err(Error::Config("network ttl_s must be non-negative".into()));
        }
        self.decision_space()?;
        self.scenario.validate()?;
        Ok(())
    }

    pub fn option_set(&self) -> Result<OptionSet> {
        OptionSet::new(self.options.iter().map(|o| o.name.clone())).map_err(|e| Error::Config(e.to_string()))
    }

    fn option_index(&self, name: &str, context: &str) -> Result<usize> {
        self.options
            .iter()
            .position(|o| o.name == name)
            .ok_or_else(|| Error::Config(format!("{context} references unknown option `{name}`")))
    }

    pub fn coupling_tensor(&self) -> Result<CouplingTensor> {
        let n = self.options.len();
        let mut gamma_self = vec![vec![0.0; n]; n];
        let mut a_diff = vec![vec![0.0; n]; n];
        for (j, o) in self.options.iter().enumerate() {
            for (other, v) in &o.a_diff {
                let l = self.option_index(other, &format!("option `{}` a_diff", o.name))?;
                if l == j {
                    return Err(Error::Config(format!("option `{}` a_diff names itself", o.name)));
                }
                a_diff[j][l] = *v;
            }
            for (other, v) in &o.gamma_self {
                let l = self.option_index(other, &format!("option `{}` gamma_self", o.name))?;
                if l == j {
                    return Err(Error::Config(format!("option `{}` gamma_self names itself", o.name)));
                }
                gamma_self[j][l] = *v;
            }
        }
        Ok(CouplingTensor {
            alpha_self: self.options.iter().map(|o| o.alpha_self).collect(),
            gamma_self,
            a_same: self.options.iter().map(|o| o.a_same).collect(),
            a_diff,
            resistance: self.coupling.resistance,
        })
    }

    pub fn engine_params(&self) -> Result<EngineParams> {
        let a = &self.attention;
        let params = EngineParams {
            coupling: self.coupling_tensor()?,
            saturation: self.coupling.saturation,
            attention: AttentionParams {
                tau_u: a.tau_u,
                u_min: a.u_min,
                u_max: a.u_max,
                hill_n: a.hill_n,
                hill_half: a.hill_half,
            },
            attention_self_loop: a.self_loop,
            substeps: self.coupling.substeps,
        };
        params.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(params)
    }

    pub fn behavior_set(&self) -> Result<BehaviorSet> {
        let names: Vec<String> = self.behaviors.iter().map(|b| b.name.clone()).collect();
        let mut activation = vec![vec![false; names.len()]; self.options.len()];
        for (j, o) in self.options.iter().enumerate() {
            for b in &o.behaviors {
                let q = names
                    .iter()
                    .position(|n| n == b)
                    .ok_or_else(|| Error::Config(format!("option `{}` activates unknown behavior `{b}`", o.name)))?;
                activation[j][q] = true;
            }
        }
        BehaviorSet::new(names, self.behaviors.iter().map(|b| b.weight).collect(), activation)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn connectivity(&self) -> ConnectivityModel {
        ConnectivityModel {
            comm_range: self.network.comm_range_m,
            drop_probability: self.network.drop_probability,
            latency_ticks: self.network.latency_ticks,
        }
    }

    pub fn codec(&self) -> Result<OpinionCodec> {
        OpinionCodec::new(self.network.z_clip).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn decision_space(&self) -> Result<DecisionSpace> {
        let d = &self.decision;
        DecisionSpace::helm(d.heading_step_deg, d.speed_max, d.speed_step).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn ticks(&self) -> u64 {
        (self.harness.duration_s / self.harness.tick_s).round() as u64
    }
}
