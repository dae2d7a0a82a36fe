use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::pipeline::{run_single, RunLogs, RunResult};
use super::{Method, RunConfig, ScanMetrics, ScanTiming};
use crate::error::HarnessError;
use crate::io;

/// Per-run means of the scan scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub seed: u64,
    pub status: &'static str,
    pub ospa: Option<f64>,
    pub ospa2: Option<f64>,
    pub local_ospa: Option<f64>,
    pub local_ospa2: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub method: Method,
    pub runs: usize,
    pub succeeded: usize,
    pub failed_seeds: Vec<u64>,
    pub ospa: Option<f64>,
    pub ospa_se: Option<f64>,
    pub ospa2: Option<f64>,
    pub ospa2_se: Option<f64>,
    pub local_ospa: Option<f64>,
    pub local_ospa2: Option<f64>,
    /// Mean absolute difference between estimated and true cardinality.
    pub cardinality_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingSummary {
    /// Mean per-scan fusing time of the evaluation node, in seconds.
    pub node: Option<f64>,
    /// Mean per-scan fusing time summed over nodes, in seconds.
    pub network: Option<f64>,
}

pub struct ScenarioReport {
    /// Scan scores averaged over successful runs.
    pub per_scan: Vec<ScanMetrics>,
    pub timing: Vec<ScanTiming>,
    pub runs: Vec<RunRow>,
    pub summary: Summary,
    pub timing_summary: TimingSummary,
    /// Successful runs in seed order.
    pub results: Vec<RunResult>,
}

impl ScenarioReport {
    /// Mean over scans `from..=to` of the averaged trace.
    pub fn mean_over(&self, from: u32, to: u32, f: impl Fn(&ScanMetrics) -> f64) -> Option<f64> {
        mean(self.per_scan.iter().filter(|m| (from..=to).contains(&m.scan)).map(f))
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Standard error of the mean.
fn std_error(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let m = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((var / n as f64).sqrt())
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

fn guarded(config: &RunConfig, seed: u64) -> Result<RunResult, String> {
    match catch_unwind(AssertUnwindSafe(|| run_single(config, seed))) {
        Ok(Ok(r)) => Ok(r),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(panic_message(p)),
    }
}

fn average_scans(results: &[RunResult]) -> Vec<ScanMetrics> {
    let Some(first) = results.first() else {
        return Vec::new();
    };
    let n = results.len() as f64;
    (0..first.metrics.len())
        .map(|i| {
            let avg = |f: fn(&ScanMetrics) -> f64| results.iter().map(|r| f(&r.metrics[i])).sum::<f64>() / n;
            ScanMetrics {
                scan: first.metrics[i].scan,
                ospa: avg(|m| m.ospa),
                ospa2: avg(|m| m.ospa2),
                cardinality: avg(|m| m.cardinality),
                truth_cardinality: avg(|m| m.truth_cardinality),
                local_ospa: avg(|m| m.local_ospa),
                local_ospa2: avg(|m| m.local_ospa2),
                local_cardinality: avg(|m| m.local_cardinality),
            }
        })
        .collect()
}

fn average_timing(results: &[RunResult]) -> Vec<ScanTiming> {
    let Some(first) = results.first() else {
        return Vec::new();
    };
    let n = results.len() as f64;
    (0..first.timing.len())
        .map(|i| ScanTiming {
            scan: first.timing[i].scan,
            node: results.iter().map(|r| r.timing[i].node).sum::<f64>() / n,
            network: results.iter().map(|r| r.timing[i].network).sum::<f64>() / n,
        })
        .collect()
}

/// Runs `config.runs` Monte-Carlo runs with seeds `seed, seed + 1, ...`.
/// A failing run is recorded with its seed and the others continue. Tables
/// are written to `config.output` when set.
pub fn run_scenario(config: &RunConfig) -> Result<ScenarioReport, HarnessError> {
    config.validate()?;
    let seeds: Vec<u64> = (0..config.runs as u64).map(|i| config.seed.wrapping_add(i)).collect();
    let outcomes: Vec<(u64, Result<RunResult, String>)> = if config.parallel {
        seeds.par_iter().map(|&s| (s, guarded(config, s))).collect()
    } else {
        seeds.iter().map(|&s| (s, guarded(config, s))).collect()
    };

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut results = Vec::new();
    let mut failed_seeds = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(r) => {
                let m = &r.metrics;
                rows.push(RunRow {
                    seed,
                    status: "ok",
                    ospa: mean(m.iter().map(|x| x.ospa)),
                    ospa2: mean(m.iter().map(|x| x.ospa2)),
                    local_ospa: mean(m.iter().map(|x| x.local_ospa)),
                    local_ospa2: mean(m.iter().map(|x| x.local_ospa2)),
                    error: String::new(),
                });
                results.push(r);
            }
            Err(message) => {
                failed_seeds.push(seed);
                rows.push(RunRow {
                    seed,
                    status: "failed",
                    ospa: None,
                    ospa2: None,
                    local_ospa: None,
                    local_ospa2: None,
                    error: message,
                });
            }
        }
    }

    let per_scan = average_scans(&results);
    let timing = average_timing(&results);
    let run_ospa: Vec<f64> = rows.iter().filter_map(|r| r.ospa).collect();
    let run_ospa2: Vec<f64> = rows.iter().filter_map(|r| r.ospa2).collect();
    let summary = Summary {
        scenario: config.scenario.name.clone(),
        method: config.method,
        runs: config.runs,
        succeeded: results.len(),
        failed_seeds,
        ospa: mean(run_ospa.iter().copied()),
        ospa_se: std_error(&run_ospa),
        ospa2: mean(run_ospa2.iter().copied()),
        ospa2_se: std_error(&run_ospa2),
        local_ospa: mean(rows.iter().filter_map(|r| r.local_ospa)),
        local_ospa2: mean(rows.iter().filter_map(|r| r.local_ospa2)),
        cardinality_error: mean(
            results
                .iter()
                .flat_map(|r| r.metrics.iter().map(|m| (m.cardinality - m.truth_cardinality).abs())),
        ),
    };
    let timing_summary = TimingSummary {
        node: mean(results.iter().flat_map(|r| r.timing.iter().map(|t| t.node))),
        network: mean(results.iter().flat_map(|r| r.timing.iter().map(|t| t.network))),
    };
    let report = ScenarioReport {
        per_scan,
        timing,
        runs: rows,
        summary,
        timing_summary,
        results,
    };
    if let Some(dir) = &config.output {
        write_report(dir, &report)?;
    }
    Ok(report)
}

fn write_table<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), HarnessError> {
    io::write_file(path, |out| {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    fs::write(path, text + "\n").map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn write_metrics(path: &Path, rows: &[ScanMetrics]) -> Result<(), HarnessError> {
    write_table(
        path,
        &[
            "scan",
            "ospa",
            "ospa2",
            "cardinality",
            "truth_cardinality",
            "local_ospa",
            "local_ospa2",
            "local_cardinality",
        ],
        rows,
    )
}

pub fn write_timing(path: &Path, rows: &[ScanTiming]) -> Result<(), HarnessError> {
    write_table(path, &["scan", "node", "network"], rows)
}

/// Writes all logs of one run into `dir`.
pub fn write_run_logs(dir: &Path, logs: &RunLogs) -> Result<(), HarnessError> {
    create_dir(dir)?;
    io::write_file(&dir.join("truth.csv"), |w| io::write_tracks(w, &logs.truth))?;
    io::write_file(&dir.join("measurements.csv"), |w| {
        io::write_measurement_log(
            w,
            logs.measurements
                .iter()
                .flat_map(|(n, scans)| scans.iter().map(move |(k, z)| (*n, *k, z.as_slice()))),
        )
    })?;
    io::write_file(&dir.join("tracks.csv"), |w| {
        io::write_track_log(
            w,
            logs.tracks
                .values()
                .flat_map(|scans| scans.iter().map(|(k, s)| (*k, s))),
        )
    })?;
    io::write_file(&dir.join("consensus.csv"), |w| {
        io::write_consensus_log(
            w,
            logs.consensus
                .iter()
                .flat_map(|(n, scans)| scans.iter().map(move |(k, s)| (*n, *k, s))),
        )
    })
}

fn write_report(dir: &Path, report: &ScenarioReport) -> Result<(), HarnessError> {
    create_dir(dir)?;
    write_metrics(&dir.join("metrics.csv"), &report.per_scan)?;
    write_timing(&dir.join("timing.csv"), &report.timing)?;
    write_table(
        &dir.join("runs.csv"),
        &["seed", "status", "ospa", "ospa2", "local_ospa", "local_ospa2", "error"],
        &report.runs,
    )?;
    write_json(&dir.join("summary.json"), &report.summary)?;
    write_json(&dir.join("timing.json"), &report.timing_summary)?;
    for r in &report.results {
        if let Some(logs) = &r.logs {
            write_run_logs(&dir.join("logs").join(format!("seed-{}", r.seed)), logs)?;
        }
    }
    Ok(())
}
