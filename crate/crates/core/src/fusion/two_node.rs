use crate::error::FusionError;
use crate::track::{LabeledStateSet, Scan, StateVector, Track, TrackSet};

use super::history::MatchedHistory;
use super::matching::{determine_matched_pairs, MatchedPairs};
use super::weights::PairWeights;
use super::MatchingParams;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoNodeOutput {
    pub consensus: LabeledStateSet,
    pub pairs: MatchedPairs,
}

/// Sample used for the fused estimate at scan `k`: the sample at `k` if
/// present, else the latest one before `k`, else the earliest one.
fn state_at(track: &Track, k: Scan) -> Result<StateVector, FusionError> {
    if let Some(x) = track.at(k) {
        return Ok(*x);
    }
    track
        .latest_at_or_before(k)
        .map(|(_, x)| *x)
        .or_else(|| track.samples.values().next().copied())
        .ok_or(FusionError::EmptyTrack(track.label))
}

/// Kinematic consensus between the live tracks of the fusing node (`own`)
/// and one peer at scan `k`.
///
/// Matched pairs are fused by the convex combination given by `weights` and
/// carry the fusing node's label. Unmatched tracks of either side are kept
/// when they have at least `min_track_len` samples. When `history` is given,
/// its label spaces are extended with the live labels and every matched pair
/// is counted.
pub fn fuse_two_nodes(
    own: &TrackSet,
    peer: &TrackSet,
    history: Option<&mut MatchedHistory>,
    weights: PairWeights,
    params: MatchingParams,
    min_track_len: usize,
    k: Scan,
) -> Result<TwoNodeOutput, FusionError> {
    let pairs = determine_matched_pairs(own, peer, params)?;
    if let Some(h) = history {
        h.extend_rows(own.labels());
        h.extend_cols(peer.labels());
        for p in pairs.iter() {
            h.increment(&p.row_label, &p.col_label)?;
        }
    }

    let a: Vec<&Track> = own.iter().collect();
    let b: Vec<&Track> = peer.iter().collect();
    let mut consensus = LabeledStateSet::new();
    for p in pairs.iter() {
        let xa = state_at(a[p.row], k)?;
        let xb = state_at(b[p.col], k)?;
        consensus.insert(p.row_label, xa * weights.own() + xb * weights.peer());
    }
    for (side, tracks) in [(0, &a), (1, &b)] {
        for (i, t) in tracks.iter().enumerate() {
            let matched = if side == 0 {
                pairs.is_row_matched(i)
            } else {
                pairs.is_col_matched(i)
            };
            if !matched && t.len() >= min_track_len {
                consensus.insert(t.label, state_at(t, k)?);
            }
        }
    }
    Ok(TwoNodeOutput { consensus, pairs })
}

/// Turns a single-scan estimate set into tracks of one sample at scan `k`.
pub fn lift_to_tracks(set: &LabeledStateSet, k: Scan) -> TrackSet {
    set.iter().map(|(l, x)| Track::from_samples(*l, [(k, *x)])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::{position, GlobalLabel};
    use proptest::prelude::*;

    fn x(px: f64, py: f64) -> StateVector {
        StateVector::new(px, 1.0, py, -1.0)
    }

    fn steady(node: u32, idx: u32, px: f64, py: f64, ks: std::ops::RangeInclusive<u32>) -> Track {
        Track::from_samples(GlobalLabel::new(1, idx, node), ks.map(|k| (k, x(px, py))))
    }

    fn fuse(a: &TrackSet, b: &TrackSet, c_len: usize) -> LabeledStateSet {
        fuse_two_nodes(a, b, None, PairWeights::equal(), MatchingParams::ospa(100.0), c_len, 5)
            .unwrap()
            .consensus
    }

    #[test]
    fn identical_inputs_fuse_to_themselves() {
        let a: TrackSet = [steady(1, 1, 0.0, 0.0, 1..=5), steady(1, 2, 500.0, 0.0, 1..=5)]
            .into_iter()
            .collect();
        let b: TrackSet = [steady(2, 1, 0.0, 0.0, 1..=5), steady(2, 2, 500.0, 0.0, 1..=5)]
            .into_iter()
            .collect();
        let con = fuse(&a, &b, 2);
        assert_eq!(con.len(), 2);
        assert_eq!(con.get(&GlobalLabel::new(1, 1, 1)), Some(&x(0.0, 0.0)));
        assert_eq!(con.get(&GlobalLabel::new(1, 2, 1)), Some(&x(500.0, 0.0)));
    }

    #[test]
    fn midpoint_of_matched_pair() {
        let a: TrackSet = [steady(1, 1, 0.0, 0.0, 5..=5)].into_iter().collect();
        let b: TrackSet = [steady(2, 1, 10.0, 0.0, 5..=5)].into_iter().collect();
        let con = fuse(&a, &b, 1);
        let fused = con.get(&GlobalLabel::new(1, 1, 1)).unwrap();
        assert_eq!(position(fused), nalgebra::Vector2::new(5.0, 0.0));
    }

    #[test]
    fn exclusive_track_retained_by_length() {
        let a: TrackSet = [steady(1, 1, 0.0, 0.0, 1..=5), steady(1, 2, 500.0, 0.0, 1..=5)]
            .into_iter()
            .collect();
        let long: TrackSet = [
            steady(2, 1, 0.0, 0.0, 1..=5),
            steady(2, 2, 500.0, 0.0, 1..=5),
            steady(2, 3, 900.0, 900.0, 4..=5),
        ]
        .into_iter()
        .collect();
        assert_eq!(fuse(&a, &long, 2).len(), 3);
        let short: TrackSet = [
            steady(2, 1, 0.0, 0.0, 1..=5),
            steady(2, 2, 500.0, 0.0, 1..=5),
            steady(2, 3, 900.0, 900.0, 5..=5),
        ]
        .into_iter()
        .collect();
        assert_eq!(fuse(&a, &short, 2).len(), 2);
    }

    #[test]
    fn fragmented_track_falls_back_to_latest_sample() {
        let a: TrackSet = [steady(1, 1, 0.0, 0.0, 1..=5)].into_iter().collect();
        let b: TrackSet = [steady(2, 1, 10.0, 0.0, 1..=3)].into_iter().collect();
        let con = fuse(&a, &b, 1);
        assert_eq!(position(con.get(&GlobalLabel::new(1, 1, 1)).unwrap()).x, 5.0);
    }

    #[test]
    fn history_counts_matches() {
        let a: TrackSet = [steady(1, 1, 0.0, 0.0, 1..=5)].into_iter().collect();
        let b: TrackSet = [steady(2, 7, 1.0, 0.0, 1..=5), steady(2, 8, 800.0, 0.0, 1..=5)]
            .into_iter()
            .collect();
        let mut h = MatchedHistory::new();
        for _ in 0..3 {
            fuse_two_nodes(
                &a,
                &b,
                Some(&mut h),
                PairWeights::equal(),
                MatchingParams::ospa(100.0),
                2,
                5,
            )
            .unwrap();
        }
        assert_eq!(h.shape(), (1, 2));
        assert_eq!(h.count(&GlobalLabel::new(1, 1, 1), &GlobalLabel::new(1, 7, 2)), 3);
        assert_eq!(h.count(&GlobalLabel::new(1, 1, 1), &GlobalLabel::new(1, 8, 2)), 0);
    }

    fn node_tracks(node: u32, pts: &[(f64, f64, u32)]) -> TrackSet {
        pts.iter()
            .enumerate()
            .map(|(i, &(px, py, len))| steady(node, i as u32 + 1, px, py, (6 - len)..=5))
            .collect()
    }

    proptest! {
        #[test]
        fn consensus_is_convex_and_unique(
            pa in prop::collection::vec((-300.0f64..300.0, -300.0f64..300.0, 1u32..5), 0..6),
            pb in prop::collection::vec((-300.0f64..300.0, -300.0f64..300.0, 1u32..5), 0..6),
            w in 0.01f64..0.99,
            c_len in 1usize..4,
        ) {
            let a = node_tracks(1, &pa);
            let b = node_tracks(2, &pb);
            let weights = PairWeights::new(w, 1.0 - w).unwrap();
            let out = fuse_two_nodes(&a, &b, None, weights, MatchingParams::ospa(100.0), c_len, 5).unwrap();
            let labels: Vec<_> = out.consensus.labels().collect();
            let mut dedup = labels.clone();
            dedup.dedup();
            prop_assert_eq!(labels.len(), dedup.len());
            let ta: Vec<_> = a.iter().collect();
            let tb: Vec<_> = b.iter().collect();
            for p in out.pairs.iter() {
                let xa = position(ta[p.row].at(5).unwrap());
                let xb = position(tb[p.col].at(5).unwrap());
                let xf = position(out.consensus.get(&p.row_label).unwrap());
                let along = (xf - xa).norm() + (xb - xf).norm();
                prop_assert!((along - (xb - xa).norm()).abs() < 1e-9);
            }
            prop_assert!(out.consensus.len() <= a.len() + b.len() - out.pairs.len());
        }
    }
}
