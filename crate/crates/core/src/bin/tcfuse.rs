use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use track_consensus::fusion::LabelMode;
use track_consensus::harness::{self, Method, RunConfig};
use track_consensus::io;
use track_consensus::sim::Scenario;
use track_consensus::{HarnessError, NodeId};

#[derive(Parser)]
#[command(name = "tcfuse", version, about = "Label-consistent track fusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate truth and per-node measurements for one seed.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run each node's local tracker on a measurement log.
    Track {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuse a per-node track log into a consensus log.
    Fuse {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        #[command(flatten)]
        fusion: FusionArgs,
        #[arg(long)]
        out: PathBuf,
        /// Optional per-scan fusing time table.
        #[arg(long)]
        timing: Option<PathBuf>,
    },
    /// Score consensus and local estimates of one node against truth.
    Evaluate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        consensus: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        /// Defaults to the scenario's evaluation node.
        #[arg(long)]
        node: Option<NodeId>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo runs end to end.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        fusion: FusionArgs,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        /// Base seed; defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        keep_logs: bool,
        #[arg(long)]
        check_feedback: bool,
    },
    /// Fusing time and error against the number of nodes.
    Scale {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        fusion: FusionArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 6, 8])]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Node scored at every count; must be among the first two sensors.
        #[arg(long)]
        eval_node: Option<NodeId>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelArg {
    Component,
    Neighbors,
    Disabled,
}

#[derive(Args)]
struct FusionArgs {
    /// tc-ospa2, tc-wass or none.
    #[arg(long, default_value = "tc-ospa2")]
    method: String,
    #[arg(long, value_enum)]
    label_mode: Option<LabelArg>,
    #[arg(long)]
    window: Option<u32>,
    #[arg(long)]
    min_track_len: Option<usize>,
    #[arg(long)]
    min_match_count: Option<u32>,
}

impl FusionArgs {
    fn config(&self, scenario: Scenario) -> Result<RunConfig, HarnessError> {
        let method: Method = self.method.parse()?;
        let mut config = RunConfig::new(scenario, method);
        if let Some(m) = self.label_mode {
            config.fusion.label_mode = match m {
                LabelArg::Component => LabelMode::Component,
                LabelArg::Neighbors => LabelMode::Neighbors,
                LabelArg::Disabled => LabelMode::Disabled,
            };
        }
        if let Some(w) = self.window {
            config.fusion.window_length = w;
        }
        if let Some(c) = self.min_track_len {
            config.fusion.min_track_len = c;
        }
        if let Some(c) = self.min_match_count {
            config.fusion.min_match_count = c;
        }
        config.validate()?;
        Ok(config)
    }
}

fn load(path: &Path) -> Result<Scenario, HarnessError> {
    Ok(Scenario::load(path)?)
}

fn mkdir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Simulate { scenario, seed, out } => {
            let scenario = load(&scenario)?;
            let sim = harness::simulate(&scenario, seed);
            mkdir(&out)?;
            io::write_file(&out.join("truth.csv"), |w| io::write_tracks(w, &sim.truth))?;
            io::write_file(&out.join("measurements.csv"), |w| {
                io::write_measurement_log(
                    w,
                    sim.measurements
                        .iter()
                        .flat_map(|(n, scans)| scans.iter().map(move |(k, z)| (*n, *k, z.as_slice()))),
                )
            })
        }
        Command::Track {
            scenario,
            measurements,
            out,
        } => {
            let scenario = load(&scenario)?;
            let z = io::load_measurement_log(&measurements)?;
            let tracks = harness::track(&scenario, &z);
            io::write_file(&out, |w| {
                io::write_track_log(w, tracks.values().flat_map(|s| s.iter().map(|(k, x)| (*k, x))))
            })
        }
        Command::Fuse {
            scenario,
            tracks,
            fusion,
            out,
            timing,
        } => {
            let config = fusion.config(load(&scenario)?)?;
            let estimates = io::load_track_log(&tracks)?;
            let fused = harness::fuse(&config.scenario, config.method, &config.fusion, &estimates, false)?;
            io::write_file(&out, |w| {
                io::write_consensus_log(
                    w,
                    fused
                        .consensus
                        .iter()
                        .flat_map(|(n, scans)| scans.iter().map(move |(k, s)| (*n, *k, s))),
                )
            })?;
            if let Some(path) = timing {
                harness::write_timing(&path, &fused.timing)?;
            }
            Ok(())
        }
        Command::Evaluate {
            scenario,
            truth,
            consensus,
            tracks,
            node,
            out,
        } => {
            let scenario = load(&scenario)?;
            let node = node.unwrap_or(scenario.eval_node);
            let truth = io::log_to_tracks(&io::load_track_log(&truth)?);
            let consensus = io::load_consensus_log(&consensus)?;
            let tracks = io::load_track_log(&tracks)?;
            let none = BTreeMap::new();
            let metrics = harness::evaluate(
                &truth,
                consensus.get(&node).unwrap_or(&none),
                tracks.get(&node).unwrap_or(&none),
                scenario.duration,
            );
            harness::write_metrics(&out, &metrics)
        }
        Command::Run {
            scenario,
            fusion,
            runs,
            seed,
            out,
            sequential,
            keep_logs,
            check_feedback,
        } => {
            let mut config = fusion.config(load(&scenario)?)?;
            config.runs = runs;
            config.seed = seed.unwrap_or(config.seed);
            config.output = Some(out);
            config.parallel = !sequential;
            config.keep_logs = keep_logs;
            config.check_feedback = check_feedback;
            let report = harness::run_scenario(&config)?;
            let s = &report.summary;
            println!(
                "{} {}: {}/{} runs, OSPA {}, OSPA2 {}, local OSPA {}",
                s.scenario,
                s.method,
                s.succeeded,
                s.runs,
                show(s.ospa),
                show(s.ospa2),
                show(s.local_ospa)
            );
            for r in report.runs.iter().filter(|r| r.status != "ok") {
                eprintln!("seed {} failed: {}", r.seed, r.error);
            }
            Ok(())
        }
        Command::Scale {
            scenario,
            fusion,
            counts,
            runs,
            seed,
            eval_node,
            out,
        } => {
            let mut config = fusion.config(load(&scenario)?)?;
            config.runs = runs;
            config.seed = seed.unwrap_or(config.seed);
            if let Some(n) = eval_node {
                config.scenario.eval_node = n;
            }
            let rows = harness::scaling_study(&config, &counts)?;
            for r in &rows {
                println!(
                    "{:>3} nodes: fusing time {:.3e} s, OSPA {:.2}, OSPA2 {:.2}",
                    r.nodes, r.fusion_time, r.ospa, r.ospa2
                );
            }
            harness::write_scaling_table(&out, &rows)
        }
    }
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
