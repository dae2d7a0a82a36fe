//! Label-consistent track-to-track fusion for distributed multi-sensor tracking.

pub mod assignment;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod sim;
pub mod topology;
pub mod track;
pub mod tracker;

pub use error::{AssignmentError, ConfigError, FusionError, HarnessError, MetricError, TrackError};
pub use topology::Topology;
pub use track::{GlobalLabel, LabeledState, LabeledStateSet, LocalLabel, NodeId, Scan, StateVector, Track, TrackSet};
