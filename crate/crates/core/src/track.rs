//! Labelled states, tracks and track sets.
//!
//! A track is a sparse map from scan index to state vector. Its domain may
//! have gaps (a fragmented track), so every window operation works on the
//! stored scans rather than on a dense array.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::TrackError;

/// Discrete scan index, 1-based. One scan is one sampling interval.
pub type Scan = u32;

/// Sensor node identifier. Node 0 is reserved for ground truth.
pub type NodeId = u32;

/// Kinematic state `[px, vx, py, vy]` (m, m/s).
pub type StateVector = Vector4<f64>;

/// Position components of a state vector.
#[inline]
pub fn position(x: &StateVector) -> Vector2<f64> {
    Vector2::new(x[0], x[2])
}

/// Euclidean distance between the positions of two states. Velocities are
/// ignored.
#[inline]
pub fn position_distance(x: &StateVector, y: &StateVector) -> f64 {
    (position(x) - position(y)).norm()
}

/// Label issued by a single node: time of birth plus an index separating
/// births within the same scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LocalLabel {
    pub birth_time: Scan,
    pub birth_index: u32,
}

impl LocalLabel {
    pub fn new(birth_time: Scan, birth_index: u32) -> Self {
        Self {
            birth_time,
            birth_index,
        }
    }

    pub fn globalize(self, node_id: NodeId) -> GlobalLabel {
        GlobalLabel { local: self, node_id }
    }
}

/// Network-wide label: a local label tagged with the node that issued it.
///
/// Ordered by birth time first, then node id, then birth index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GlobalLabel {
    pub local: LocalLabel,
    pub node_id: NodeId,
}

impl GlobalLabel {
    pub fn new(birth_time: Scan, birth_index: u32, node_id: NodeId) -> Self {
        LocalLabel::new(birth_time, birth_index).globalize(node_id)
    }

    pub fn birth_time(&self) -> Scan {
        self.local.birth_time
    }

    pub fn birth_index(&self) -> u32 {
        self.local.birth_index
    }
}

impl Ord for GlobalLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.local
            .birth_time
            .cmp(&other.local.birth_time)
            .then(self.node_id.cmp(&other.node_id))
            .then(self.local.birth_index.cmp(&other.local.birth_index))
    }
}

impl PartialOrd for GlobalLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for GlobalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{})@{}",
            self.local.birth_time, self.local.birth_index, self.node_id
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledState {
    pub state: StateVector,
    pub label: GlobalLabel,
}

/// Labelled multi-object state of one scan. Labels are unique by
/// construction (keyed map).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledStateSet {
    estimates: BTreeMap<GlobalLabel, StateVector>,
}

impl LabeledStateSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an estimate. Returns false (and leaves the set unchanged) if
    /// the label is already present.
    pub fn insert(&mut self, label: GlobalLabel, state: StateVector) -> bool {
        use std::collections::btree_map::Entry;
        match self.estimates.entry(label) {
            Entry::Vacant(v) => {
                v.insert(state);
                true
            }
            Entry::Occupied(_) => false,
        }
    }

    pub fn get(&self, label: &GlobalLabel) -> Option<&StateVector> {
        self.estimates.get(label)
    }

    pub fn contains(&self, label: &GlobalLabel) -> bool {
        self.estimates.contains_key(label)
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    /// Iterates in label order.
    pub fn iter(&self) -> impl Iterator<Item = (&GlobalLabel, &StateVector)> {
        self.estimates.iter()
    }

    pub fn labels(&self) -> impl Iterator<Item = &GlobalLabel> {
        self.estimates.keys()
    }

    pub fn states(&self) -> impl Iterator<Item = &StateVector> {
        self.estimates.values()
    }

    pub fn to_vec(&self) -> Vec<LabeledState> {
        self.iter()
            .map(|(l, x)| LabeledState { label: *l, state: *x })
            .collect()
    }
}

impl FromIterator<(GlobalLabel, StateVector)> for LabeledStateSet {
    /// Later duplicates of a label are dropped.
    fn from_iter<I: IntoIterator<Item = (GlobalLabel, StateVector)>>(iter: I) -> Self {
        let mut set = Self::new();
        for (l, x) in iter {
            set.insert(l, x);
        }
        set
    }
}

/// A labelled track. The domain is the key set of `samples` and may be
/// non-contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub label: GlobalLabel,
    pub samples: BTreeMap<Scan, StateVector>,
}

impl Track {
    pub fn new(label: GlobalLabel) -> Self {
        Self {
            label,
            samples: BTreeMap::new(),
        }
    }

    pub fn from_samples(label: GlobalLabel, samples: impl IntoIterator<Item = (Scan, StateVector)>) -> Self {
        Self {
            label,
            samples: samples.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn at(&self, k: Scan) -> Option<&StateVector> {
        self.samples.get(&k)
    }

    pub fn domain(&self) -> impl Iterator<Item = Scan> + '_ {
        self.samples.keys().copied()
    }

    pub fn first_scan(&self) -> Option<Scan> {
        self.samples.keys().next().copied()
    }

    pub fn last_scan(&self) -> Option<Scan> {
        self.samples.keys().next_back().copied()
    }

    /// Most recent sample at or before `k`.
    pub fn latest_at_or_before(&self, k: Scan) -> Option<(Scan, &StateVector)> {
        self.samples.range(..=k).next_back().map(|(s, x)| (*s, x))
    }

    /// Samples with scan in `[start, end]`. O(log n + window).
    pub fn restrict(&self, start: Scan, end: Scan) -> Track {
        Track {
            label: self.label,
            samples: self.samples.range(start..=end).map(|(k, x)| (*k, *x)).collect(),
        }
    }
}

/// Finite set of tracks with pairwise distinct labels, iterated in label
/// order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackSet {
    tracks: BTreeMap<GlobalLabel, Track>,
}

impl TrackSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a track, rejecting a label that is already present.
    pub fn insert(&mut self, track: Track) -> Result<(), TrackError> {
        use std::collections::btree_map::Entry;
        match self.tracks.entry(track.label) {
            Entry::Vacant(v) => {
                v.insert(track);
                Ok(())
            }
            Entry::Occupied(_) => Err(TrackError::DuplicateLabel(track.label)),
        }
    }

    /// Appends one scan of estimates to the stored tracks, creating tracks
    /// for unseen labels. This is how a receiving node accumulates a peer's
    /// messages into tracks.
    pub fn record(&mut self, k: Scan, estimates: &LabeledStateSet) {
        for (label, x) in estimates.iter() {
            self.tracks
                .entry(*label)
                .or_insert_with(|| Track::new(*label))
                .samples
                .insert(k, *x);
        }
    }

    pub fn get(&self, label: &GlobalLabel) -> Option<&Track> {
        self.tracks.get(label)
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Track> {
        self.tracks.values()
    }

    pub fn labels(&self) -> impl Iterator<Item = &GlobalLabel> {
        self.tracks.keys()
    }

    /// Labelled multi-object state at scan `k`.
    pub fn states_at(&self, k: Scan) -> LabeledStateSet {
        self.iter().filter_map(|t| t.at(k).map(|x| (t.label, *x))).collect()
    }

    pub fn to_vec(&self) -> Vec<Track> {
        self.tracks.values().cloned().collect()
    }
}

impl FromIterator<Track> for TrackSet {
    /// Later duplicates of a label are dropped.
    fn from_iter<I: IntoIterator<Item = Track>>(iter: I) -> Self {
        let mut set = Self::new();
        for t in iter {
            let _ = set.insert(t);
        }
        set
    }
}

/// Restricts every track to the window `[start, end]`, dropping tracks with
/// no sample inside it.
pub fn restrict_window(tracks: &TrackSet, start: Scan, end: Scan) -> Result<TrackSet, TrackError> {
    if start > end {
        return Err(TrackError::InvalidWindow { start, end });
    }
    Ok(tracks
        .iter()
        .map(|t| t.restrict(start, end))
        .filter(|t| !t.is_empty())
        .collect())
}

/// Tracks whose label is declared at the current scan, restricted to the
/// window `[start, end]`. Labels in `current` without a stored track are
/// ignored.
pub fn live_tracks(
    tracks: &TrackSet,
    current: &LabeledStateSet,
    start: Scan,
    end: Scan,
) -> Result<TrackSet, TrackError> {
    if start > end {
        return Err(TrackError::InvalidWindow { start, end });
    }
    Ok(current
        .labels()
        .filter_map(|l| tracks.get(l))
        .map(|t| t.restrict(start, end))
        .filter(|t| !t.is_empty())
        .collect())
}

/// First scan of a trailing window of `length` scans ending at `k`.
pub fn window_start(k: Scan, length: u32) -> Scan {
    (k + 1).saturating_sub(length).max(1)
}
