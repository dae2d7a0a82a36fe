//! Track-to-track fusion: matching live tracks between nodes, kinematic
//! consensus and label consensus.

mod bounds;
mod history;
mod labels;
mod matching;
mod network;
mod two_node;
mod weights;

pub use bounds::{empirical_existence_probability, label_consistency_margin, ConsistencyMargin};
pub use history::{update_matched_history, MatchedHistory};
pub use labels::{update_labels, LabelGraph};
pub use matching::{determine_matched_pairs, MatchedPair, MatchedPairs};
pub use network::{fuse_multi_nodes, NetworkFusion, NodeConsensus};
pub use two_node::{fuse_two_nodes, lift_to_tracks, TwoNodeOutput};
pub use weights::{metropolis_weights, MetropolisWeights, PairWeights};

use serde::{Deserialize, Serialize};

use crate::error::FusionError;
use crate::metrics::{ospa_track_distance, wasserstein_track_distance, WassersteinParams};
use crate::track::Track;

/// Distance used to compare two live tracks when matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrackDistance {
    /// Time-averaged OSPA track-to-track distance.
    #[default]
    Ospa,
    /// Wasserstein distance between the time-embedded samples; `alpha`
    /// scales the scan index.
    Wasserstein { alpha: f64 },
}

/// How consensed labels are rewritten from the label graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Least label in the whole connected component.
    #[default]
    Component,
    /// Least label among the direct neighbours of the vertex.
    Neighbors,
    /// Keep the labels produced by kinematic fusion.
    Disabled,
}

/// Which other nodes a node fuses with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PeerMode {
    /// Every other node in the network.
    #[default]
    AllNodes,
    /// Only the node's neighbours in the topology.
    Neighbors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    /// Number of scans in the matching window ending at the current scan.
    pub window_length: u32,
    pub cutoff: f64,
    /// Order of the Wasserstein track distance. The OSPA track distance
    /// does not depend on it.
    pub order: u32,
    /// Unmatched tracks shorter than this (in windowed samples) are dropped.
    pub min_track_len: usize,
    pub distance: TrackDistance,
    pub label_mode: LabelMode,
    /// Match count needed before two labels are linked in the label graph.
    pub min_match_count: u32,
    pub peers: PeerMode,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            window_length: 5,
            cutoff: 100.0,
            order: 1,
            min_track_len: 2,
            distance: TrackDistance::Ospa,
            label_mode: LabelMode::Component,
            min_match_count: 1,
            peers: PeerMode::AllNodes,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        let bad = |m: &str| Err(FusionError::InvalidInput(m.to_string()));
        if self.window_length < 1 {
            return bad("window length must be at least 1");
        }
        if self.min_track_len < 1 {
            return bad("minimum track length must be at least 1");
        }
        if !(self.cutoff.is_finite() && self.cutoff > 0.0) {
            return bad("cut-off must be positive and finite");
        }
        if self.order < 1 {
            return bad("order must be at least 1");
        }
        if self.min_match_count < 1 {
            return bad("minimum match count must be at least 1");
        }
        if let TrackDistance::Wasserstein { alpha } = self.distance {
            if !(alpha.is_finite() && alpha >= 0.0) {
                return bad("Wasserstein time scale must be finite and non-negative");
            }
        }
        Ok(())
    }

    pub(crate) fn matching(&self) -> MatchingParams {
        MatchingParams {
            cutoff: self.cutoff,
            order: self.order,
            distance: self.distance,
        }
    }
}

/// The subset of [`FusionConfig`] that matching depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingParams {
    pub cutoff: f64,
    pub order: u32,
    pub distance: TrackDistance,
}

impl MatchingParams {
    pub fn ospa(cutoff: f64) -> Self {
        Self {
            cutoff,
            order: 1,
            distance: TrackDistance::Ospa,
        }
    }

    pub(crate) fn track_distance(&self, t: &Track, u: &Track) -> Result<f64, FusionError> {
        match self.distance {
            TrackDistance::Ospa => Ok(ospa_track_distance(t, u, self.cutoff)),
            TrackDistance::Wasserstein { alpha } => Ok(wasserstein_track_distance(
                t,
                u,
                WassersteinParams {
                    order: self.order,
                    alpha,
                },
            )?),
        }
    }
}
