//! Monte-Carlo experiment harness: simulation, local tracking, fusion and
//! scoring against truth at an evaluation node.

mod pipeline;
mod runner;
mod scaling;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{ConfigError, HarnessError};
use crate::fusion::{FusionConfig, LabelMode, PeerMode, TrackDistance};
use crate::sim::{FusionSettings, Scenario};
use crate::track::Scan;

pub use pipeline::{evaluate, fuse, run_single, simulate, track, FusionOutput, RunLogs, RunResult, Simulation};
pub use runner::{
    run_scenario, write_metrics, write_run_logs, write_timing, RunRow, ScenarioReport, Summary, TimingSummary,
};
pub use scaling::{scaling_study, write_scaling_table, ScalingRow};

/// Cut-off and order used for scoring.
pub const EVAL_CUTOFF: f64 = 100.0;
pub const EVAL_ORDER: u32 = 1;
/// Length of the trailing window over which OSPA² is scored.
pub const OSPA2_WINDOW: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Track consensus with the OSPA track distance.
    TcOspa2,
    /// Track consensus with the time-embedded Wasserstein track distance.
    TcWass,
    /// No fusion; each node reports its local estimates.
    None,
}

impl FromStr for Method {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tc-ospa2" => Ok(Method::TcOspa2),
            "tc-wass" => Ok(Method::TcWass),
            "none" => Ok(Method::None),
            other => Err(ConfigError::Invalid(format!(
                "unknown method {other:?} (expected tc-ospa2, tc-wass or none)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::TcOspa2 => "tc-ospa2",
            Method::TcWass => "tc-wass",
            Method::None => "none",
        })
    }
}

/// Fusion configuration for `method` from a scenario's settings.
pub fn fusion_config(settings: &FusionSettings, method: Method) -> FusionConfig {
    FusionConfig {
        window_length: settings.window_length,
        cutoff: settings.cutoff,
        order: settings.order,
        min_track_len: settings.min_track_len,
        distance: match method {
            Method::TcWass => TrackDistance::Wasserstein { alpha: settings.alpha },
            _ => TrackDistance::Ospa,
        },
        label_mode: LabelMode::Component,
        min_match_count: settings.min_match_count,
        peers: PeerMode::AllNodes,
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub method: Method,
    pub fusion: FusionConfig,
    /// Number of Monte-Carlo runs; run `i` uses seed `seed + i`.
    pub runs: usize,
    pub seed: u64,
    /// Directory for metric tables; nothing is written when unset.
    pub output: Option<PathBuf>,
    pub parallel: bool,
    /// Write per-run truth, measurement, track and consensus logs.
    pub keep_logs: bool,
    /// Compare serialized track stores before and after every fusion step.
    pub check_feedback: bool,
}

impl RunConfig {
    /// 20 runs from the scenario's seed, with the scenario's fusion settings.
    pub fn new(scenario: Scenario, method: Method) -> Self {
        let fusion = fusion_config(&scenario.fusion, method);
        let seed = scenario.seed;
        Self {
            scenario,
            method,
            fusion,
            runs: 20,
            seed,
            output: None,
            parallel: true,
            keep_logs: false,
            check_feedback: false,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.scenario.validate()?;
        if self.method != Method::None {
            self.fusion.validate()?;
        }
        Ok(())
    }
}

/// Scores of one scan at the evaluation node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanMetrics {
    pub scan: Scan,
    pub ospa: f64,
    pub ospa2: f64,
    pub cardinality: f64,
    pub truth_cardinality: f64,
    /// Same scores for the node's own unfused estimates.
    pub local_ospa: f64,
    pub local_ospa2: f64,
    pub local_cardinality: f64,
}

/// Fusing wall time of one scan, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanTiming {
    pub scan: Scan,
    /// Time spent by the evaluation node.
    pub node: f64,
    /// Time summed over all nodes.
    pub network: f64,
}
