//! Comma-separated logs of measurements, track estimates and consensed
//! estimates. Floats are written in shortest round-trip form, so reading a
//! log back reproduces the in-memory values exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::track::{GlobalLabel, LabeledStateSet, NodeId, Scan, StateVector, TrackSet};

/// Per-node, per-scan labelled estimates.
pub type ScanLog = BTreeMap<NodeId, BTreeMap<Scan, LabeledStateSet>>;

/// Per-node, per-scan measurements.
pub type MeasurementLog = BTreeMap<NodeId, BTreeMap<Scan, Vec<Vector2<f64>>>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct TrackRecord {
    node: NodeId,
    scan: Scan,
    birth_time: Scan,
    birth_index: u32,
    px: f64,
    vx: f64,
    py: f64,
    vy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ConsensusRecord {
    fusing_node: NodeId,
    scan: Scan,
    label_node: NodeId,
    birth_time: Scan,
    birth_index: u32,
    px: f64,
    vx: f64,
    py: f64,
    vy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct MeasurementRecord {
    node: NodeId,
    scan: Scan,
    x: f64,
    y: f64,
}

/// Header rows are written explicitly so that empty logs still carry one.
fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(out)
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<(), csv::Error> {
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?.flush()?;
    Ok(())
}

/// Track log: one row per (scan, label) with the label's node in `node`.
pub fn write_track_log<'a, W: Write>(
    out: W,
    scans: impl IntoIterator<Item = (Scan, &'a LabeledStateSet)>,
) -> Result<(), csv::Error> {
    let mut w = writer(out);
    w.write_record(["node", "scan", "birth_time", "birth_index", "px", "vx", "py", "vy"])?;
    for (scan, set) in scans {
        for (l, x) in set.iter() {
            w.serialize(TrackRecord {
                node: l.node_id,
                scan,
                birth_time: l.birth_time(),
                birth_index: l.birth_index(),
                px: x[0],
                vx: x[1],
                py: x[2],
                vy: x[3],
            })?;
        }
    }
    finish(w)
}

/// Writes every sample of a track set, scan by scan.
pub fn write_tracks<W: Write>(out: W, tracks: &TrackSet) -> Result<(), csv::Error> {
    let mut by_scan: BTreeMap<Scan, LabeledStateSet> = BTreeMap::new();
    for t in tracks.iter() {
        for (k, x) in &t.samples {
            by_scan.entry(*k).or_default().insert(t.label, *x);
        }
    }
    write_track_log(out, by_scan.iter().map(|(k, s)| (*k, s)))
}

/// Serialized form of a track set, for byte-level comparisons.
pub fn track_set_bytes(tracks: &TrackSet) -> Vec<u8> {
    let mut buf = Vec::new();
    write_tracks(&mut buf, tracks).expect("writing to memory cannot fail");
    buf
}

pub fn read_track_log<R: Read>(input: R) -> Result<ScanLog, csv::Error> {
    let mut log = ScanLog::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let r: TrackRecord = row?;
        log.entry(r.node).or_default().entry(r.scan).or_default().insert(
            GlobalLabel::new(r.birth_time, r.birth_index, r.node),
            StateVector::new(r.px, r.vx, r.py, r.vy),
        );
    }
    Ok(log)
}

/// Collects all scans of a track log into tracks.
pub fn log_to_tracks(log: &ScanLog) -> TrackSet {
    let mut tracks = TrackSet::new();
    for scans in log.values() {
        for (k, set) in scans {
            tracks.record(*k, set);
        }
    }
    tracks
}

pub fn write_consensus_log<'a, W: Write>(
    out: W,
    rows: impl IntoIterator<Item = (NodeId, Scan, &'a LabeledStateSet)>,
) -> Result<(), csv::Error> {
    let mut w = writer(out);
    w.write_record([
        "fusing_node",
        "scan",
        "label_node",
        "birth_time",
        "birth_index",
        "px",
        "vx",
        "py",
        "vy",
    ])?;
    for (node, scan, set) in rows {
        for (l, x) in set.iter() {
            w.serialize(ConsensusRecord {
                fusing_node: node,
                scan,
                label_node: l.node_id,
                birth_time: l.birth_time(),
                birth_index: l.birth_index(),
                px: x[0],
                vx: x[1],
                py: x[2],
                vy: x[3],
            })?;
        }
    }
    finish(w)
}

/// Consensus log keyed by fusing node.
pub fn read_consensus_log<R: Read>(input: R) -> Result<ScanLog, csv::Error> {
    let mut log = ScanLog::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let r: ConsensusRecord = row?;
        log.entry(r.fusing_node).or_default().entry(r.scan).or_default().insert(
            GlobalLabel::new(r.birth_time, r.birth_index, r.label_node),
            StateVector::new(r.px, r.vx, r.py, r.vy),
        );
    }
    Ok(log)
}

pub fn write_measurement_log<'a, W: Write>(
    out: W,
    rows: impl IntoIterator<Item = (NodeId, Scan, &'a [Vector2<f64>])>,
) -> Result<(), csv::Error> {
    let mut w = writer(out);
    w.write_record(["node", "scan", "x", "y"])?;
    for (node, scan, z) in rows {
        for p in z {
            w.serialize(MeasurementRecord {
                node,
                scan,
                x: p.x,
                y: p.y,
            })?;
        }
    }
    finish(w)
}

pub fn read_measurement_log<R: Read>(input: R) -> Result<MeasurementLog, csv::Error> {
    let mut log = MeasurementLog::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let r: MeasurementRecord = row?;
        log.entry(r.node)
            .or_default()
            .entry(r.scan)
            .or_default()
            .push(Vector2::new(r.x, r.y));
    }
    Ok(log)
}

fn log_error(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => HarnessError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => HarnessError::Log {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn open(path: &Path) -> Result<File, HarnessError> {
    File::open(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create(path: &Path) -> Result<File, HarnessError> {
    File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs `write` against a newly created file at `path`.
pub fn write_file(
    path: &Path,
    write: impl FnOnce(std::io::BufWriter<File>) -> Result<(), csv::Error>,
) -> Result<(), HarnessError> {
    let file = create(path)?;
    write(std::io::BufWriter::new(file)).map_err(|e| log_error(path, e))
}

pub fn load_track_log(path: &Path) -> Result<ScanLog, HarnessError> {
    read_track_log(open(path)?).map_err(|e| log_error(path, e))
}

pub fn load_consensus_log(path: &Path) -> Result<ScanLog, HarnessError> {
    read_consensus_log(open(path)?).map_err(|e| log_error(path, e))
}

pub fn load_measurement_log(path: &Path) -> Result<MeasurementLog, HarnessError> {
    read_measurement_log(open(path)?).map_err(|e| log_error(path, e))
}
