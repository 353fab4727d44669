use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::episode::EpisodeLog;
use crate::error::{Error, Result};

/// Affine map of a zero-sum opinion onto the probability simplex:
/// `(1 + z_j) / N`. The neutral opinion lands on the center.
pub fn barycentric(z: &[f64]) -> Vec<f64> {
    let n = z.len() as f64;
    z.iter().map(|v| (1.0 + v) / n).collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    config_hash: &'a str,
    fleet_size: usize,
    coalition_mode: &'a str,
    tick_s: f64,
    ticks: usize,
    options: &'a [String],
    agent_names: &'a [String],
    files: Vec<String>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes one opinion trajectory file per agent, attention and degree
/// series for the whole fleet, and `manifest.json`. Returns the paths
/// written.
pub fn export_traces(log: &EpisodeLog, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let h = &log.header;
    let mut written = Vec::new();

    for (i, name) in h.agent_names.iter().enumerate() {
        let mut text = String::from("t");
        for o in &h.options {
            write!(text, ",z_{o}").unwrap();
        }
        for o in &h.options {
            write!(text, ",bary_{o}").unwrap();
        }
        text.push_str(",u,dominant,mode\n");
        for tick in &log.ticks {
            let Some(a) = tick.agents.get(i) else { continue };
            write!(text, "{}", tick.t).unwrap();
            for v in a.z.iter().chain(barycentric(&a.z).iter()) {
                write!(text, ",{v}").unwrap();
            }
            let mode = serde_json::to_value(a.mode).expect("mode serializes");
            writeln!(text, ",{},{},{}", a.u, h.options[a.dominant], mode.as_str().unwrap_or_default()).unwrap();
        }
        let path = out_dir.join(format!("opinion_{i}_{name}.csv"));
        write(&path, &text)?;
        written.push(path);
    }

    let wide = |field: fn(&super::AgentRecord) -> String| {
        let mut text = String::from("t");
        for name in &h.agent_names {
            write!(text, ",{name}").unwrap();
        }
        text.push('\n');
        for tick in &log.ticks {
            write!(text, "{}", tick.t).unwrap();
            for a in &tick.agents {
                write!(text, ",{}", field(a)).unwrap();
            }
            text.push('\n');
        }
        text
    };
    for (file, field) in [
        ("attention.csv", (|a| a.u.to_string()) as fn(&super::AgentRecord) -> String),
        ("degree.csv", |a| a.degree.to_string()),
    ] {
        let path = out_dir.join(file);
        write(&path, &wide(field))?;
        written.push(path);
    }

    let manifest = Manifest {
        seed: h.seed,
        config_hash: &h.config_hash,
        fleet_size: h.fleet_size,
        coalition_mode: h.coalition_mode.as_str(),
        tick_s: h.tick_s,
        ticks: log.ticks.len(),
        options: &h.options,
        agent_names: &h.agent_names,
        files: written
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
    };
    let path = out_dir.join("manifest.json");
    write(&path, &serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    written.push(path);
    Ok(written)
}
