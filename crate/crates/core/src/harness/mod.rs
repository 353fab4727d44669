//! Episode orchestration, metrics, trace export and Monte-Carlo batches.

pub mod config;
mod episode;
mod metrics;
mod montecarlo;
mod traces;

pub use config::{CoalitionMode, MissionConfig};
pub use episode::{
    agent_name, run_episode, static_coalition_policy, AgentRecord, Diagnostics, EpisodeLog, HarnessEvent, LogHeader,
    Mode, TickRecord, AGENT_NAMES,
};
pub use metrics::{compute_metrics, Metrics};
pub use montecarlo::{run_monte_carlo, CellSummary, McReport, RunResult, Stat};
pub use traces::{barycentric, export_traces};
