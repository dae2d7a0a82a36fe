use std::collections::BTreeMap;

use nalgebra::Vector2;

use super::{Method, RunConfig, ScanMetrics, ScanTiming, EVAL_CUTOFF, EVAL_ORDER, OSPA2_WINDOW};
use crate::error::{FusionError, HarnessError};
use crate::fusion::{FusionConfig, NetworkFusion};
use crate::io::{track_set_bytes, MeasurementLog, ScanLog};
use crate::metrics::{ospa2, ospa_states, OspaParams};
use crate::sim::{generate_measurements, generate_truth, stream_rng, Scenario, TRUTH_STREAM};
use crate::track::{live_tracks, restrict_window, window_start, LabeledStateSet, NodeId, Scan, StateVector, TrackSet};
use crate::tracker::GnnTracker;

pub struct Simulation {
    pub truth: TrackSet,
    pub measurements: MeasurementLog,
}

/// Truth from stream 0 and each node's measurements from the stream
/// numbered after the node.
pub fn simulate(scenario: &Scenario, seed: u64) -> Simulation {
    let truth = generate_truth(scenario, &mut stream_rng(seed, TRUTH_STREAM));
    let mut measurements = MeasurementLog::new();
    for sensor in &scenario.sensors {
        let mut rng = stream_rng(seed, u64::from(sensor.node));
        let scans = measurements.entry(sensor.node).or_default();
        for k in 1..=scenario.duration {
            let states: Vec<StateVector> = truth.states_at(k).states().copied().collect();
            scans.insert(k, generate_measurements(&states, sensor, &mut rng));
        }
    }
    Simulation { truth, measurements }
}

/// Runs every node's local tracker over its measurements.
pub fn track(scenario: &Scenario, measurements: &MeasurementLog) -> ScanLog {
    let none: Vec<Vector2<f64>> = Vec::new();
    let mut out = ScanLog::new();
    for sensor in &scenario.sensors {
        let mut tracker = GnnTracker::new(sensor.node, scenario.tracker, &scenario.motion, sensor);
        let z = measurements.get(&sensor.node);
        let scans = out.entry(sensor.node).or_default();
        for k in 1..=scenario.duration {
            let zk = z.and_then(|m| m.get(&k)).unwrap_or(&none);
            scans.insert(k, tracker.process(k, zk));
        }
    }
    out
}

pub struct FusionOutput {
    pub consensus: ScanLog,
    pub timing: Vec<ScanTiming>,
}

fn estimates_at<'a>(log: &'a ScanLog, node: NodeId, k: Scan, empty: &'a LabeledStateSet) -> &'a LabeledStateSet {
    log.get(&node).and_then(|s| s.get(&k)).unwrap_or(empty)
}

/// Fuses per-node estimates scan by scan. Each node keeps a store of its
/// own tracks; only the windowed live part of it is handed to fusion, and
/// fusion output never flows back into it. With `check_feedback` the
/// serialized stores are compared before and after every fusion step.
pub fn fuse(
    scenario: &Scenario,
    method: Method,
    config: &FusionConfig,
    estimates: &ScanLog,
    check_feedback: bool,
) -> Result<FusionOutput, FusionError> {
    let empty = LabeledStateSet::new();
    let nodes = scenario.nodes();
    let mut consensus = ScanLog::new();
    let mut timing = Vec::with_capacity(scenario.duration as usize);
    if method == Method::None {
        for &n in &nodes {
            let scans = consensus.entry(n).or_default();
            for k in 1..=scenario.duration {
                scans.insert(k, estimates_at(estimates, n, k, &empty).clone());
            }
        }
        timing.extend((1..=scenario.duration).map(|scan| ScanTiming {
            scan,
            node: 0.0,
            network: 0.0,
        }));
        return Ok(FusionOutput { consensus, timing });
    }

    let mut network = NetworkFusion::new(config.clone(), scenario.topology.clone())?;
    let mut stores: BTreeMap<NodeId, TrackSet> = nodes.iter().map(|&n| (n, TrackSet::new())).collect();
    for k in 1..=scenario.duration {
        let start = window_start(k, config.window_length);
        let mut live = BTreeMap::new();
        for &n in &nodes {
            let current = estimates_at(estimates, n, k, &empty);
            let store = stores.get_mut(&n).expect("store exists for every node");
            store.record(k, current);
            live.insert(n, live_tracks(store, current, start, k)?);
        }
        let before: Option<Vec<Vec<u8>>> = check_feedback.then(|| stores.values().map(track_set_bytes).collect());
        let fused = network.step(&live, k)?;
        if let Some(before) = before {
            let after: Vec<Vec<u8>> = stores.values().map(track_set_bytes).collect();
            if before != after {
                return Err(FusionError::InvalidInput(format!(
                    "track store changed during fusion at scan {k}"
                )));
            }
        }
        let mut row = ScanTiming {
            scan: k,
            node: 0.0,
            network: 0.0,
        };
        for (n, c) in fused {
            let secs = c.elapsed.as_secs_f64();
            row.network += secs;
            if n == scenario.eval_node {
                row.node = secs;
            }
            consensus.entry(n).or_default().insert(k, c.estimates);
        }
        timing.push(row);
    }
    Ok(FusionOutput { consensus, timing })
}

fn score(
    truth: &TrackSet,
    truth_window: &TrackSet,
    estimates: &LabeledStateSet,
    history: &mut TrackSet,
    k: Scan,
    start: Scan,
) -> (f64, f64, f64) {
    let params = OspaParams {
        order: EVAL_ORDER,
        cutoff: EVAL_CUTOFF,
    };
    let x: Vec<StateVector> = truth.states_at(k).states().copied().collect();
    let y: Vec<StateVector> = estimates.states().copied().collect();
    history.record(k, estimates);
    let window = restrict_window(history, start, k).expect("window start never exceeds k");
    (
        ospa_states(&x, &y, params),
        ospa2(truth_window, &window, params),
        estimates.len() as f64,
    )
}

/// Per-scan scores of consensed and local estimates against truth, for
/// scans `1..=duration`. Scans absent from a map count as empty estimates.
pub fn evaluate(
    truth: &TrackSet,
    consensus: &BTreeMap<Scan, LabeledStateSet>,
    local: &BTreeMap<Scan, LabeledStateSet>,
    duration: Scan,
) -> Vec<ScanMetrics> {
    let empty = LabeledStateSet::new();
    let mut fused_tracks = TrackSet::new();
    let mut local_tracks = TrackSet::new();
    (1..=duration)
        .map(|k| {
            let start = window_start(k, OSPA2_WINDOW);
            let truth_window = restrict_window(truth, start, k).expect("window start never exceeds k");
            let (ospa, ospa2, cardinality) = score(
                truth,
                &truth_window,
                consensus.get(&k).unwrap_or(&empty),
                &mut fused_tracks,
                k,
                start,
            );
            let (local_ospa, local_ospa2, local_cardinality) = score(
                truth,
                &truth_window,
                local.get(&k).unwrap_or(&empty),
                &mut local_tracks,
                k,
                start,
            );
            ScanMetrics {
                scan: k,
                ospa,
                ospa2,
                cardinality,
                truth_cardinality: truth.states_at(k).len() as f64,
                local_ospa,
                local_ospa2,
                local_cardinality,
            }
        })
        .collect()
}

pub struct RunLogs {
    pub truth: TrackSet,
    pub measurements: MeasurementLog,
    pub tracks: ScanLog,
    pub consensus: ScanLog,
}

pub struct RunResult {
    pub seed: u64,
    pub metrics: Vec<ScanMetrics>,
    pub timing: Vec<ScanTiming>,
    pub logs: Option<RunLogs>,
}

/// One Monte-Carlo run end to end.
pub fn run_single(config: &RunConfig, seed: u64) -> Result<RunResult, HarnessError> {
    let scenario = &config.scenario;
    let sim = simulate(scenario, seed);
    let numerical = |message: String| HarnessError::Numerical { seed, message };
    if let Some(t) = sim
        .truth
        .iter()
        .find(|t| t.samples.values().any(|x| !x.iter().all(|v| v.is_finite())))
    {
        return Err(numerical(format!("non-finite truth state for object {}", t.label)));
    }
    let tracks = track(scenario, &sim.measurements);
    for (node, scans) in &tracks {
        if let Some((k, _)) = scans
            .iter()
            .find(|(_, set)| set.states().any(|x| !x.iter().all(|v| v.is_finite())))
        {
            return Err(numerical(format!("non-finite estimate at node {node}, scan {k}")));
        }
    }
    let fused = fuse(scenario, config.method, &config.fusion, &tracks, config.check_feedback)?;
    let none = BTreeMap::new();
    let metrics = evaluate(
        &sim.truth,
        fused.consensus.get(&scenario.eval_node).unwrap_or(&none),
        tracks.get(&scenario.eval_node).unwrap_or(&none),
        scenario.duration,
    );
    if let Some(m) = metrics
        .iter()
        .find(|m| !(m.ospa.is_finite() && m.ospa2.is_finite() && m.local_ospa.is_finite()))
    {
        return Err(numerical(format!("non-finite score at scan {}", m.scan)));
    }
    let logs = config.keep_logs.then_some(RunLogs {
        truth: sim.truth,
        measurements: sim.measurements,
        tracks,
        consensus: fused.consensus,
    });
    Ok(RunResult {
        seed,
        metrics,
        timing: fused.timing,
        logs,
    })
}
