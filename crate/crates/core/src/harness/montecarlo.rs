use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CoalitionMode, MissionConfig};
use super::episode::run_episode;
use super::metrics::{compute_metrics, Metrics};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    fn of(values: impl Iterator<Item = f64>) -> Stat {
        let (mut sum, mut n, mut min, mut max) = (0.0, 0usize, f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            sum += v;
            n += 1;
            min = min.min(v);
            max = max.max(v);
        }
        Stat {
            mean: sum / n as f64,
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub fleet_size: usize,
    pub mode: CoalitionMode,
    pub seed: u64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub fleet_size: usize,
    pub mode: CoalitionMode,
    pub runs: usize,
    pub sampled_fraction: Stat,
    pub efficiency: Stat,
    pub migration_count: Stat,
    pub degenerate_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub cells: Vec<CellSummary>,
    pub runs: Vec<RunResult>,
}

impl McReport {
    pub fn cell(&self, fleet_size: usize, mode: CoalitionMode) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.fleet_size == fleet_size && c.mode == mode)
    }

    /// Plain-text table, one row per cell.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>5} {:>7} {:>4} {:>24} {:>33} {:>6}\n",
            "fleet", "mode", "runs", "sampled mean [min,max]", "samples/m mean [min,max]", "degen"
        );
        for c in &self.cells {
            writeln!(
                s,
                "{:>5} {:>7} {:>4} {:>8.3} [{:.3},{:.3}] {:>11.6} [{:.6},{:.6}] {:>6}",
                c.fleet_size,
                c.mode.as_str(),
                c.runs,
                c.sampled_fraction.mean,
                c.sampled_fraction.min,
                c.sampled_fraction.max,
                c.efficiency.mean,
                c.efficiency.min,
                c.efficiency.max,
                c.degenerate_runs
            )
            .unwrap();
        }
        s
    }
}

/// Runs `n_per_cell` episodes for every (fleet size, mode) cell, in
/// parallel. Run `i` of every cell uses seed `base.harness.seed + i`, so
/// cells see the same bloom and storm schedules.
pub fn run_monte_carlo(
    base: &MissionConfig,
    n_per_cell: usize,
    fleet_sizes: &[usize],
    modes: &[CoalitionMode],
) -> Result<McReport> {
    if n_per_cell == 0 {
        return Err(Error::InvalidArgument("n_per_cell must be at least 1".into()));
    }
    let mut jobs = Vec::new();
    for &fleet in fleet_sizes {
        for &mode in modes {
            for i in 0..n_per_cell {
                let mut cfg = base.clone().with_seed(base.harness.seed.wrapping_add(i as u64));
                cfg.harness.fleet_size = fleet;
                cfg.harness.coalition_mode = mode;
                jobs.push(cfg);
            }
        }
    }
    let runs: Vec<RunResult> = jobs
        .par_iter()
        .map(|cfg| {
            let h = &cfg.harness;
            run_episode(cfg)
                .map(|log| RunResult {
                    fleet_size: h.fleet_size,
                    mode: h.coalition_mode,
                    seed: h.seed,
                    metrics: compute_metrics(&log),
                })
                .map_err(|e| Error::EpisodeFailed {
                    seed: h.seed,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for &fleet in fleet_sizes {
        for &mode in modes {
            let rs: Vec<&RunResult> = runs.iter().filter(|r| r.fleet_size == fleet && r.mode == mode).collect();
            cells.push(CellSummary {
                fleet_size: fleet,
                mode,
                runs: rs.len(),
                sampled_fraction: Stat::of(rs.iter().map(|r| r.metrics.sampled_fraction)),
                efficiency: Stat::of(rs.iter().map(|r| r.metrics.efficiency)),
                migration_count: Stat::of(rs.iter().map(|r| r.metrics.migration_count as f64)),
                degenerate_runs: rs.iter().filter(|r| r.metrics.no_blooms).count(),
            });
        }
    }
    Ok(McReport { cells, runs })
}
