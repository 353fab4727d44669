use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gcid::harness::config::{Dropout, StormInjection};
use gcid::harness::{compute_metrics, export_traces, run_episode, run_monte_carlo, CoalitionMode, EpisodeLog, MissionConfig};
use gcid::net::Resolution;
use gcid::{Error, Result};

#[derive(Parser)]
#[command(name = "gcid", version, about = "Group-choice / individual-decision multi-robot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its log and metrics.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        fleet: Option<usize>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<CoalitionMode>,
        /// Raise a storm flag on AGENT at TIME seconds (AGENT:TIME).
        #[arg(long, value_parser = parse_injection)]
        inject_storm: Option<StormInjection>,
        /// Cut AGENT's links from START for DURATION seconds (AGENT:START:DURATION).
        #[arg(long, value_parser = parse_dropout)]
        dropout: Option<Dropout>,
        /// Also export trace files next to the log.
        #[arg(long)]
        traces: bool,
    },
    /// Monte-Carlo batch over fleet sizes and coalition modes.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 30)]
        runs: usize,
        #[arg(long, value_delimiter = ',', default_value = "4,6,8")]
        fleets: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "gcid,static", value_parser = parse_mode)]
        modes: Vec<CoalitionMode>,
        /// First seed; run i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the full report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export opinion, attention and degree traces from an episode log.
    Traces {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "traces")]
        out: PathBuf,
    },
    /// Check a configuration file and print its hash.
    ValidateConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Mission configuration (TOML). The shipped default is used if absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    drop_probability: Option<f64>,
    #[arg(long)]
    latency_ticks: Option<u32>,
    #[arg(long, value_parser = parse_resolution)]
    resolution: Option<Resolution>,
}

impl Common {
    fn load(&self) -> Result<MissionConfig> {
        let mut cfg = load_config(self.config.as_deref())?;
        if let Some(d) = self.duration {
            cfg.harness.duration_s = d;
        }
        if let Some(p) = self.drop_probability {
            cfg.network.drop_probability = p;
        }
        if let Some(l) = self.latency_ticks {
            cfg.network.latency_ticks = l;
        }
        if let Some(r) = self.resolution {
            cfg.network.resolution = r;
        }
        Ok(cfg)
    }
}

fn load_config(path: Option<&Path>) -> Result<MissionConfig> {
    match path {
        Some(p) => MissionConfig::load(p),
        None => Ok(MissionConfig::default()),
    }
}

fn parse_mode(s: &str) -> std::result::Result<CoalitionMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_resolution(s: &str) -> std::result::Result<Resolution, String> {
    match s {
        "coarse" => Ok(Resolution::Coarse),
        "fine" => Ok(Resolution::Fine),
        _ => Err(format!("unknown resolution `{s}` (coarse or fine)")),
    }
}

fn fields<const N: usize>(s: &str) -> std::result::Result<[&str; N], String> {
    let parts: Vec<&str> = s.split(':').collect();
    parts
        .try_into()
        .map_err(|_| format!("expected {N} colon-separated fields in `{s}`"))
}

fn parse_injection(s: &str) -> std::result::Result<StormInjection, String> {
    let [agent, time] = fields::<2>(s)?;
    Ok(StormInjection {
        agent: agent.parse().map_err(|e| format!("{e}"))?,
        time_s: time.parse().map_err(|e| format!("{e}"))?,
    })
}

fn parse_dropout(s: &str) -> std::result::Result<Dropout, String> {
    let [agent, start, duration] = fields::<3>(s)?;
    Ok(Dropout {
        agent: agent.parse().map_err(|e| format!("{e}"))?,
        start_s: start.parse().map_err(|e| format!("{e}"))?,
        duration_s: duration.parse().map_err(|e| format!("{e}"))?,
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            common,
            seed,
            out,
            fleet,
            mode,
            inject_storm,
            dropout,
            traces,
        } => {
            let mut cfg = common.load()?;
            if let Some(s) = seed {
                cfg.harness.seed = s;
            }
            if let Some(f) = fleet {
                cfg.harness.fleet_size = f;
            }
            if let Some(m) = mode {
                cfg.harness.coalition_mode = m;
            }
            if inject_storm.is_some() {
                cfg.harness.storm_injection = inject_storm;
            }
            if dropout.is_some() {
                cfg.harness.dropout = dropout;
            }
            cfg.validate()?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            let log = run_episode(&cfg)?;
            log.save(&out.join("episode.jsonl"))?;
            let metrics = compute_metrics(&log);
            write_json(&out.join("metrics.json"), &metrics)?;
            if traces {
                export_traces(&log, &out.join("traces"))?;
            }
            println!("{}", serde_json::to_string_pretty(&metrics).expect("serializable"));
        }
        Command::Mc {
            common,
            runs,
            fleets,
            modes,
            seed,
            out,
        } => {
            let mut cfg = common.load()?;
            if let Some(s) = seed {
                cfg.harness.seed = s;
            }
            let report = run_monte_carlo(&cfg, runs, &fleets, &modes)?;
            print!("{}", report.table());
            if let Some(path) = out {
                write_json(&path, &report)?;
            }
        }
        Command::Traces { log, out } => {
            let log = EpisodeLog::load(&log)?;
            for p in export_traces(&log, &out)? {
                println!("{}", p.display());
            }
        }
        Command::ValidateConfig { config } => {
            let cfg = load_config(config.as_deref())?;
            println!("ok {}", cfg.hash());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
