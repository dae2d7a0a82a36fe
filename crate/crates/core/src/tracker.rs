//! Per-node local tracker: Kalman filtering with global nearest neighbour
//! association and M-of-N track confirmation.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2};
use serde::{Deserialize, Serialize};

use crate::assignment::{optimal_assignment, CostMatrix};
use crate::error::ConfigError;
use crate::sim::{MotionModel, SensorModel};
use crate::track::{LabeledStateSet, LocalLabel, NodeId, Scan, StateVector};

/// Anything that turns one scan of measurements into labelled estimates.
pub trait LocalTracker {
    fn node(&self) -> NodeId;
    fn step(&mut self, k: Scan, measurements: &[Vector2<f64>]) -> LabeledStateSet;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerParams {
    /// Hits needed within the confirmation window (M).
    pub confirm_hits: u32,
    /// Length of the confirmation window in scans (N).
    pub confirm_window: u32,
    /// Consecutive misses after which a confirmed track is deleted (L).
    pub max_misses: u32,
    /// Squared Mahalanobis gate for associating a measurement.
    pub gate: f64,
    pub initial_velocity_std: f64,
    /// Confirmed tracks are reported while their consecutive misses do not
    /// exceed this.
    pub max_coast: u32,
    /// Process-noise intensity assumed by the filter; the motion model's
    /// when unset.
    pub sigma_cv: Option<f64>,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            confirm_hits: 2,
            confirm_window: 3,
            max_misses: 3,
            // 99% quantile of the chi-square distribution with 2 degrees of freedom.
            gate: 9.21,
            initial_velocity_std: 10.0,
            max_coast: 1,
            sigma_cv: None,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = self.confirm_hits >= 1
            && self.confirm_hits <= self.confirm_window
            && self.confirm_window <= 32
            && self.max_misses >= 1
            && self.gate > 0.0
            && self.initial_velocity_std > 0.0
            && self.sigma_cv.is_none_or(|s| s.is_finite() && s >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(ConfigError::Invalid(format!(
                "tracker needs 1 <= M <= N <= 32, L >= 1, gate > 0 and a positive velocity spread: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalTrack {
    pub label: LocalLabel,
    pub mean: StateVector,
    pub covariance: Matrix4<f64>,
    pub hits: u32,
    /// Consecutive misses.
    pub misses: u32,
    /// Scans since birth, the birth scan included.
    pub age: u32,
    /// Hit (1) or miss (0) of the most recent scans, newest in bit 0.
    recent: u32,
    pub status: TrackStatus,
}

impl LocalTrack {
    fn record(&mut self, hit: bool) {
        self.age += 1;
        self.recent = (self.recent << 1) | hit as u32;
        if hit {
            self.hits += 1;
            self.misses = 0;
        } else {
            self.misses += 1;
        }
    }

    fn recent_hits(&self, window: u32) -> u32 {
        let mask = if window >= 32 { u32::MAX } else { (1 << window) - 1 };
        (self.recent & mask).count_ones()
    }
}

fn symmetrize(p: &Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

/// Kalman tracker of one node.
#[derive(Debug, Clone)]
pub struct GnnTracker {
    node: NodeId,
    params: TrackerParams,
    f: Matrix4<f64>,
    q: Matrix4<f64>,
    h: Matrix2x4<f64>,
    r: Matrix2<f64>,
    tracks: Vec<LocalTrack>,
    last_pairs: Vec<(LocalLabel, usize)>,
}

struct Innovation {
    s_inv: Matrix2<f64>,
    predicted: Vector2<f64>,
}

impl GnnTracker {
    pub fn new(node: NodeId, params: TrackerParams, motion: &MotionModel, sensor: &SensorModel) -> Self {
        let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        Self {
            node,
            params,
            f: motion.transition(),
            q: MotionModel {
                sigma_cv: params.sigma_cv.unwrap_or(motion.sigma_cv),
                ..*motion
            }
            .process_noise(),
            h,
            r: sensor.measurement_covariance(),
            tracks: Vec::new(),
            last_pairs: Vec::new(),
        }
    }

    pub fn tracks(&self) -> &[LocalTrack] {
        &self.tracks
    }

    /// Track label and measurement index of every association made by the
    /// last call to [`GnnTracker::process`].
    pub fn last_associations(&self) -> &[(LocalLabel, usize)] {
        &self.last_pairs
    }

    fn innovation(&self, t: &LocalTrack) -> Innovation {
        let s = self.h * t.covariance * self.h.transpose() + self.r;
        let s_inv = s.try_inverse().unwrap_or_else(Matrix2::zeros);
        Innovation {
            s_inv,
            predicted: self.h * t.mean,
        }
    }

    fn distance2(inn: &Innovation, z: &Vector2<f64>) -> f64 {
        let y = z - inn.predicted;
        (y.transpose() * inn.s_inv * y)[(0, 0)]
    }

    /// Gated optimal assignment of `rows` (track indices) to the still-free
    /// measurements.
    fn associate(
        &self,
        rows: &[usize],
        innovations: &[Innovation],
        z: &[Vector2<f64>],
        free: &mut [bool],
    ) -> Vec<(usize, usize)> {
        let cols: Vec<usize> = (0..z.len()).filter(|&j| free[j]).collect();
        if rows.is_empty() || cols.is_empty() {
            return Vec::new();
        }
        let gate = self.params.gate;
        let cost = CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            Self::distance2(&innovations[rows[i]], &z[cols[j]]).min(gate)
        })
        .expect("gated distances are finite");
        let assignment = optimal_assignment(&cost).expect("non-empty cost matrix");
        let mut out = Vec::new();
        for (i, j) in assignment.pairs {
            if cost.get(i, j) < gate {
                free[cols[j]] = false;
                out.push((rows[i], cols[j]));
            }
        }
        out
    }

    fn update(&mut self, idx: usize, z: &Vector2<f64>) {
        let (h, r) = (self.h, self.r);
        let t = &mut self.tracks[idx];
        let s = h * t.covariance * h.transpose() + r;
        let Some(s_inv) = s.try_inverse() else {
            return;
        };
        let k = t.covariance * h.transpose() * s_inv;
        t.mean += k * (z - h * t.mean);
        let a = Matrix4::identity() - k * h;
        t.covariance = symmetrize(&(a * t.covariance * a.transpose() + k * r * k.transpose()));
    }

    fn spawn(&self, k: Scan, index: u32, z: &Vector2<f64>) -> LocalTrack {
        let v = self.params.initial_velocity_std.powi(2);
        let mut covariance = Matrix4::zeros();
        covariance[(0, 0)] = self.r[(0, 0)];
        covariance[(2, 2)] = self.r[(1, 1)];
        covariance[(0, 2)] = self.r[(0, 1)];
        covariance[(2, 0)] = self.r[(1, 0)];
        covariance[(1, 1)] = v;
        covariance[(3, 3)] = v;
        LocalTrack {
            label: LocalLabel::new(k, index),
            mean: StateVector::new(z.x, 0.0, z.y, 0.0),
            covariance,
            hits: 1,
            misses: 0,
            age: 1,
            recent: 1,
            status: if self.params.confirm_hits <= 1 {
                TrackStatus::Confirmed
            } else {
                TrackStatus::Tentative
            },
        }
    }

    /// One predict-associate-update cycle at scan `k`.
    pub fn process(&mut self, k: Scan, z: &[Vector2<f64>]) -> LabeledStateSet {
        for t in &mut self.tracks {
            t.mean = self.f * t.mean;
            t.covariance = symmetrize(&(self.f * t.covariance * self.f.transpose() + self.q));
        }
        let innovations: Vec<Innovation> = self.tracks.iter().map(|t| self.innovation(t)).collect();
        let confirmed: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].status == TrackStatus::Confirmed)
            .collect();
        let tentative: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].status == TrackStatus::Tentative)
            .collect();

        let mut free = vec![true; z.len()];
        let mut pairs = self.associate(&confirmed, &innovations, z, &mut free);
        pairs.extend(self.associate(&tentative, &innovations, z, &mut free));

        self.last_pairs = pairs.iter().map(|&(i, j)| (self.tracks[i].label, j)).collect();
        self.last_pairs.sort();
        let mut hit = vec![false; self.tracks.len()];
        for &(i, j) in &pairs {
            self.update(i, &z[j]);
            hit[i] = true;
        }
        let p = self.params;
        for (t, &h) in self.tracks.iter_mut().zip(&hit) {
            t.record(h);
            t.status = match t.status {
                TrackStatus::Tentative if t.recent_hits(p.confirm_window) >= p.confirm_hits => TrackStatus::Confirmed,
                TrackStatus::Tentative if t.age >= p.confirm_window || t.misses >= p.max_misses => TrackStatus::Dead,
                TrackStatus::Confirmed if t.misses >= p.max_misses => TrackStatus::Dead,
                s => s,
            };
        }

        // Unused measurements inside a confirmed track's gate are most likely
        // extra returns of that object and do not start new tracks.
        let mut index = 0;
        let mut born = Vec::new();
        for (j, zj) in z.iter().enumerate() {
            if !free[j] {
                continue;
            }
            let shadowed = confirmed.iter().any(|&i| Self::distance2(&innovations[i], zj) < p.gate);
            if !shadowed {
                index += 1;
                born.push(self.spawn(k, index, zj));
            }
        }
        self.tracks.retain(|t| t.status != TrackStatus::Dead);
        self.tracks.extend(born);

        self.tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed && t.misses <= p.max_coast)
            .map(|t| (t.label.globalize(self.node), t.mean))
            .collect()
    }
}

impl LocalTracker for GnnTracker {
    fn node(&self) -> NodeId {
        self.node
    }

    fn step(&mut self, k: Scan, measurements: &[Vector2<f64>]) -> LabeledStateSet {
        self.process(k, measurements)
    }
}

/// Runs one tracker step and returns the emitted estimates.
pub fn tracker_step(tracker: &mut GnnTracker, k: Scan, measurements: &[Vector2<f64>]) -> LabeledStateSet {
    tracker.process(k, measurements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_measurements, stream_rng};
    use proptest::prelude::*;

    fn sensor(pd: f64, noise: f64, clutter: f64) -> SensorModel {
        SensorModel {
            node: 1,
            position: Vector2::zeros(),
            boresight: 0.0,
            half_angle: 1.2,
            range: 2000.0,
            detection_probability: pd,
            noise_std: noise,
            clutter_rate: clutter,
        }
    }

    fn tracker(s: &SensorModel, sigma: f64) -> GnnTracker {
        let motion = MotionModel {
            sigma_cv: sigma,
            ..MotionModel::default()
        };
        GnnTracker::new(1, TrackerParams::default(), &motion, s)
    }

    fn object(k: Scan, x0: f64, y0: f64, vx: f64, vy: f64) -> StateVector {
        let t = (k - 1) as f64;
        StateVector::new(x0 + vx * t, vx, y0 + vy * t, vy)
    }

    #[test]
    fn confirms_after_two_hits_and_tracks_noiseless_object() {
        let s = sensor(1.0, 1e-6, 0.0);
        let mut tr = tracker(&s, 1e-6);
        let mut last = LabeledStateSet::new();
        for k in 1..=30 {
            let x = object(k, 300.0, 50.0, 4.0, -2.0);
            let est = tr.process(k, &[Vector2::new(x[0], x[2])]);
            if k == 1 {
                assert!(est.is_empty());
            } else {
                assert_eq!(est.len(), 1);
            }
            last = est;
        }
        let x = object(30, 300.0, 50.0, 4.0, -2.0);
        let (label, est) = last.iter().next().unwrap();
        assert_eq!(*label, crate::track::GlobalLabel::new(1, 1, 1));
        assert!((est - x).norm() < 1e-3, "{est} vs {x}");
    }

    #[test]
    fn deleted_after_missed_scans() {
        let s = sensor(1.0, 1.0, 0.0);
        let mut tr = tracker(&s, 1.0);
        for k in 1..=5 {
            tr.process(k, &[Vector2::new(500.0, 0.0)]);
        }
        assert_eq!(tr.tracks().len(), 1);
        for k in 6..=8 {
            tr.process(k, &[]);
        }
        assert!(tr.tracks().is_empty());
        let est = tr.process(9, &[Vector2::new(500.0, 0.0)]);
        assert!(est.is_empty());
        assert_eq!(tr.tracks()[0].label, LocalLabel::new(9, 1));
    }

    #[test]
    fn association_matches_exhaustive_nearest() {
        let s = sensor(1.0, 5.0, 0.0);
        let mut tr = tracker(&s, 1.0);
        let a = |k| object(k, 400.0, -100.0, 5.0, 0.0);
        let b = |k| object(k, 400.0, -60.0, -5.0, 0.0);
        for k in 1..=4 {
            tr.process(k, &[Vector2::new(a(k)[0], a(k)[2]), Vector2::new(b(k)[0], b(k)[2])]);
        }
        let z = vec![
            Vector2::new(417.0, -85.0),
            Vector2::new(424.0, -99.0),
            Vector2::new(381.0, -66.0),
        ];
        let mut predicted = tr.clone();
        for t in &mut predicted.tracks {
            t.mean = predicted.f * t.mean;
            t.covariance = predicted.f * t.covariance * predicted.f.transpose() + predicted.q;
        }
        let inn: Vec<_> = predicted.tracks.iter().map(|t| predicted.innovation(t)).collect();
        let gate = TrackerParams::default().gate;
        let d = |i: usize, j: usize| GnnTracker::distance2(&inn[i], &z[j]).min(gate);
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..3 {
            for j in (0..3).filter(|&j| j != i) {
                if d(0, i) + d(1, j) < best.0 {
                    best = (d(0, i) + d(1, j), i, j);
                }
            }
        }
        let mut want: Vec<(LocalLabel, usize)> = [(0, best.1), (1, best.2)]
            .into_iter()
            .filter(|&(t, m)| d(t, m) < gate)
            .map(|(t, m)| (predicted.tracks[t].label, m))
            .collect();
        want.sort();
        tr.process(5, &z);
        assert_eq!(tr.last_associations(), want.as_slice());
        assert_eq!(want.len(), 2);
    }

    #[test]
    fn cardinality_matches_with_perfect_detection() {
        let s = sensor(1.0, 10.0, 0.0);
        let mut tr = tracker(&s, 5.0);
        let mut rng = stream_rng(2, 1);
        for k in 1..=40 {
            let truth = vec![
                object(k, 300.0, -300.0, 5.0, 2.0),
                object(k, 300.0, 0.0, 5.0, 2.0),
                object(k, 300.0, 300.0, 5.0, 2.0),
            ];
            let z = generate_measurements(&truth, &s, &mut rng);
            let est = tr.process(k, &z);
            if k >= 2 {
                assert_eq!(est.len(), 3, "scan {k}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn covariances_stay_positive_definite(seed in 0u64..1000, clutter in 0.0f64..20.0) {
            let s = sensor(0.9, 10.0, clutter);
            let mut tr = tracker(&s, 5.0);
            let mut rng = stream_rng(seed, 1);
            for k in 1..=25 {
                let truth = vec![object(k, 200.0, 0.0, 6.0, 1.0), object(k, 600.0, 300.0, -3.0, -4.0)];
                let z = generate_measurements(&truth, &s, &mut rng);
                let est = tr.process(k, &z);
                let labels: Vec<_> = est.labels().collect();
                prop_assert!(labels.iter().all(|l| l.node_id == 1));
                for t in tr.tracks() {
                    let eig = t.covariance.symmetric_eigenvalues();
                    prop_assert!(eig.iter().all(|&v| v > 0.0), "{:?}", eig);
                }
            }
        }
    }
}
