use std::path::Path;

use serde::Serialize;

use super::runner::run_scenario;
use super::RunConfig;
use crate::error::{ConfigError, HarnessError};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub nodes: usize,
    /// Mean per-scan fusing time of the evaluation node, in seconds.
    pub fusion_time: f64,
    pub ospa: f64,
    pub ospa_se: Option<f64>,
    pub ospa2: f64,
    pub ospa2_se: Option<f64>,
}

/// Repeats `base` with the network truncated to each of `counts` nodes.
/// Seeds, and therefore truth, are the same for every count. Runs are
/// sequential so that timings are not disturbed by other runs.
pub fn scaling_study(base: &RunConfig, counts: &[usize]) -> Result<Vec<ScalingRow>, HarnessError> {
    if let Some(&n) = counts.iter().find(|&&n| n < 2 || n > base.scenario.sensors.len()) {
        return Err(ConfigError::Invalid(format!("node count {n} outside 2..={}", base.scenario.sensors.len())).into());
    }
    counts
        .iter()
        .map(|&n| {
            let config = RunConfig {
                scenario: base.scenario.with_first_nodes(n),
                parallel: false,
                output: None,
                keep_logs: false,
                ..base.clone()
            };
            let report = run_scenario(&config)?;
            let s = report.summary;
            let missing = |what: &str| HarnessError::Numerical {
                seed: config.seed,
                message: format!("no successful run for {n} nodes ({what})"),
            };
            Ok(ScalingRow {
                nodes: n,
                fusion_time: report.timing_summary.node.ok_or_else(|| missing("timing"))?,
                ospa: s.ospa.ok_or_else(|| missing("OSPA"))?,
                ospa_se: s.ospa_se,
                ospa2: s.ospa2.ok_or_else(|| missing("OSPA2"))?,
                ospa2_se: s.ospa2_se,
            })
        })
        .collect()
}

pub fn write_scaling_table(path: &Path, rows: &[ScalingRow]) -> Result<(), HarnessError> {
    io::write_file(path, |out| {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(["nodes", "fusion_time", "ospa", "ospa_se", "ospa2", "ospa2_se"])?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    })
}
