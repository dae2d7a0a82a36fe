use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use track_consensus::harness::{self, run_scenario, run_single, scaling_study, Method, RunConfig};
use track_consensus::io;
use track_consensus::sim::Scenario;
use track_consensus::GlobalLabel;

fn scenario(name: &str) -> Scenario {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios", name].iter().collect();
    Scenario::load(&path).unwrap()
}

fn short(name: &str, duration: u32) -> Scenario {
    let mut s = scenario(name);
    s.duration = duration;
    for o in &mut s.objects {
        o.death = o.death.min(duration);
    }
    s.objects.retain(|o| o.birth <= duration);
    s
}

#[test]
fn shipped_scenarios_load() {
    for (name, nodes, eval) in [
        ("scenario1.toml", 2, 2),
        ("scenario2.toml", 2, 2),
        ("scenario3.toml", 16, 7),
        ("handoff.toml", 2, 2),
    ] {
        let s = scenario(name);
        assert_eq!(s.sensors.len(), nodes, "{name}");
        assert_eq!(s.eval_node, eval, "{name}");
    }
    let s2 = scenario("scenario2.toml");
    assert!(s2.objects.len() <= 22 && s2.duration == 80);
    let s3 = scenario("scenario3.toml");
    assert!(s3.objects.len() <= 18 && s3.duration == 75);
    assert_eq!((s3.fusion.window_length, s3.fusion.min_track_len), (10, 4));
}

#[test]
fn two_node_truth_domains() {
    let sim = harness::simulate(&scenario("scenario1.toml"), 3);
    let domains: Vec<(u32, u32)> = sim
        .truth
        .iter()
        .map(|t| (t.first_scan().unwrap(), t.last_scan().unwrap()))
        .collect();
    assert_eq!(domains, vec![(1, 80), (1, 80), (10, 60)]);
    assert!(sim
        .truth
        .iter()
        .all(|t| t.len() == (t.last_scan().unwrap() - t.first_scan().unwrap() + 1) as usize));
}

#[test]
fn zero_runs_write_header_only_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::new(short("scenario1.toml", 10), Method::TcOspa2);
    config.runs = 0;
    config.output = Some(dir.path().to_path_buf());
    let report = run_scenario(&config).unwrap();
    assert!(report.per_scan.is_empty() && report.runs.is_empty());
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1);
    assert!(metrics.starts_with("scan,ospa,ospa2,"));
    assert_eq!(
        fs::read_to_string(dir.path().join("runs.csv")).unwrap().lines().count(),
        1
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["ospa"].is_null());
    assert_eq!(summary["succeeded"], 0);
}

#[test]
fn same_seed_gives_identical_tables() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, parallel) in [(&a, true), (&b, false)] {
        let mut config = RunConfig::new(short("scenario1.toml", 30), Method::TcOspa2);
        config.runs = 4;
        config.parallel = parallel;
        config.output = Some(dir.path().to_path_buf());
        run_scenario(&config).unwrap();
    }
    for file in ["metrics.csv", "runs.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn scores_stay_within_cutoff() {
    let mut config = RunConfig::new(short("scenario2.toml", 30), Method::TcOspa2);
    config.runs = 2;
    let report = run_scenario(&config).unwrap();
    for m in &report.per_scan {
        for v in [m.ospa, m.ospa2, m.local_ospa, m.local_ospa2] {
            assert!((0.0..=100.0).contains(&v), "{m:?}");
        }
    }
}

#[test]
fn metrics_from_logs_match_in_process_values() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::new(short("scenario1.toml", 40), Method::TcOspa2);
    config.keep_logs = true;
    let run = run_single(&config, 11).unwrap();
    let logs = run.logs.as_ref().unwrap();
    harness::write_run_logs(dir.path(), logs).unwrap();

    let truth = io::log_to_tracks(&io::load_track_log(&dir.path().join("truth.csv")).unwrap());
    assert_eq!(truth, logs.truth);
    let consensus = io::load_consensus_log(&dir.path().join("consensus.csv")).unwrap();
    let tracks = io::load_track_log(&dir.path().join("tracks.csv")).unwrap();
    let node = config.scenario.eval_node;
    let none = BTreeMap::new();
    let metrics = harness::evaluate(
        &truth,
        consensus.get(&node).unwrap_or(&none),
        tracks.get(&node).unwrap_or(&none),
        config.scenario.duration,
    );
    assert_eq!(metrics, run.metrics);

    let measurements = io::load_measurement_log(&dir.path().join("measurements.csv")).unwrap();
    assert_eq!(measurements, logs.measurements);
}

#[test]
fn fusion_from_logged_tracks_reproduces_consensus() {
    let s = short("scenario1.toml", 40);
    let sim = harness::simulate(&s, 5);
    let tracks = harness::track(&s, &sim.measurements);
    let mut buf = Vec::new();
    io::write_track_log(&mut buf, tracks.values().flat_map(|m| m.iter().map(|(k, x)| (*k, x)))).unwrap();
    let reread = io::read_track_log(buf.as_slice()).unwrap();
    let config = harness::fusion_config(&s.fusion, Method::TcOspa2);
    let direct = harness::fuse(&s, Method::TcOspa2, &config, &tracks, true).unwrap();
    let logged = harness::fuse(&s, Method::TcOspa2, &config, &reread, false).unwrap();
    assert_eq!(direct.consensus, logged.consensus);
}

#[test]
fn no_fusion_reports_local_estimates() {
    let mut config = RunConfig::new(short("scenario1.toml", 30), Method::None);
    config.runs = 2;
    let report = run_scenario(&config).unwrap();
    for m in &report.per_scan {
        assert_eq!(m.ospa, m.local_ospa);
        assert_eq!(m.cardinality, m.local_cardinality);
    }
    assert!(report.timing.iter().all(|t| t.node == 0.0));
}

#[test]
fn consensus_labels_come_from_known_nodes() {
    let mut config = RunConfig::new(short("scenario1.toml", 40), Method::TcOspa2);
    config.keep_logs = true;
    let run = run_single(&config, 2).unwrap();
    let logs = run.logs.unwrap();
    for (node, scans) in &logs.consensus {
        for (k, set) in scans {
            let labels: Vec<&GlobalLabel> = set.labels().collect();
            assert!(
                labels.iter().all(|l| l.node_id == 1 || l.node_id == 2),
                "node {node} scan {k}"
            );
            assert!(labels.iter().all(|l| l.birth_time() <= *k));
        }
    }
}

#[test]
fn single_count_scaling_gives_one_row() {
    let mut config = RunConfig::new(short("scenario3.toml", 15), Method::TcOspa2);
    config.runs = 2;
    let rows = scaling_study(&config, &[2]).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].nodes, 2);
    assert!(scaling_study(&config, &[1]).is_err());
    assert!(scaling_study(&config, &[17]).is_err());
}

#[test]
fn failing_runs_are_recorded_by_seed() {
    let mut s = short("scenario1.toml", 20);
    s.objects[0].initial[0] = f64::NAN;
    let mut config = RunConfig::new(s, Method::TcOspa2);
    config.runs = 3;
    config.seed = 40;
    let report = run_scenario(&config).unwrap();
    assert_eq!(report.summary.failed_seeds, vec![40, 41, 42]);
    assert_eq!(report.summary.succeeded, 0);
    assert!(report.runs.iter().all(|r| r.status == "failed" && !r.error.is_empty()));
}
