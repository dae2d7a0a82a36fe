use crate::assignment::{optimal_assignment, CostMatrix};
use crate::error::FusionError;
use crate::track::{GlobalLabel, Track, TrackSet};

use super::MatchingParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    /// Index into the first track set, in label order.
    pub row: usize,
    /// Index into the second track set, in label order.
    pub col: usize,
    pub row_label: GlobalLabel,
    pub col_label: GlobalLabel,
    pub cost: f64,
}

/// Optimally matched track pairs whose distance is below the cut-off.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchedPairs {
    pub pairs: Vec<MatchedPair>,
}

impl MatchedPairs {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MatchedPair> {
        self.pairs.iter()
    }

    pub fn index_pairs(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|p| (p.row, p.col)).collect()
    }

    pub fn is_row_matched(&self, row: usize) -> bool {
        self.pairs.iter().any(|p| p.row == row)
    }

    pub fn is_col_matched(&self, col: usize) -> bool {
        self.pairs.iter().any(|p| p.col == col)
    }
}

/// Matches the tracks of `ta` against those of `tb` by optimal assignment on
/// the track-to-track distance, keeping assigned pairs with cost strictly
/// below the cut-off.
pub fn determine_matched_pairs(
    ta: &TrackSet,
    tb: &TrackSet,
    params: MatchingParams,
) -> Result<MatchedPairs, FusionError> {
    if ta.is_empty() || tb.is_empty() {
        return Ok(MatchedPairs::default());
    }
    let a: Vec<&Track> = ta.iter().collect();
    let b: Vec<&Track> = tb.iter().collect();
    let mut data = Vec::with_capacity(a.len() * b.len());
    for t in &a {
        for u in &b {
            data.push(params.track_distance(t, u)?);
        }
    }
    let cost = CostMatrix::new(a.len(), b.len(), data)?;
    let assignment = optimal_assignment(&cost)?;
    let pairs = assignment
        .pairs
        .iter()
        .filter(|&&(m, n)| cost.get(m, n) < params.cutoff)
        .map(|&(m, n)| MatchedPair {
            row: m,
            col: n,
            row_label: a[m].label,
            col_label: b[n].label,
            cost: cost.get(m, n),
        })
        .collect();
    Ok(MatchedPairs { pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::oracle::brute_force_min;
    use crate::track::{GlobalLabel, StateVector};

    fn track(node: u32, idx: u32, pts: &[(u32, f64, f64)]) -> Track {
        Track::from_samples(
            GlobalLabel::new(1, idx, node),
            pts.iter().map(|&(k, x, y)| (k, StateVector::new(x, 0.0, y, 0.0))),
        )
    }

    fn line(node: u32, idx: u32, x0: f64, y0: f64, ks: std::ops::RangeInclusive<u32>) -> Track {
        let pts: Vec<_> = ks.map(|k| (k, x0 + k as f64, y0)).collect();
        track(node, idx, &pts)
    }

    #[test]
    fn empty_side_has_no_pairs() {
        let a: TrackSet = [line(1, 1, 0.0, 0.0, 1..=3)].into_iter().collect();
        let q = determine_matched_pairs(&a, &TrackSet::new(), MatchingParams::ospa(100.0)).unwrap();
        assert!(q.is_empty());
        let q = determine_matched_pairs(&TrackSet::new(), &a, MatchingParams::ospa(100.0)).unwrap();
        assert!(q.is_empty());
    }

    #[test]
    fn outlier_stays_unmatched() {
        let a: TrackSet = [
            line(1, 1, 0.0, 0.0, 1..=5),
            line(1, 2, 0.0, 300.0, 1..=5),
            line(1, 3, 0.0, 2000.0, 1..=5),
        ]
        .into_iter()
        .collect();
        let b: TrackSet = [line(2, 1, 3.0, 0.0, 1..=5), line(2, 2, 0.0, 304.0, 1..=5)]
            .into_iter()
            .collect();
        let params = MatchingParams::ospa(100.0);
        let q = determine_matched_pairs(&a, &b, params).unwrap();
        assert_eq!(q.index_pairs(), vec![(0, 0), (1, 1)]);
        let cost = CostMatrix::from_fn(3, 2, |i, j| {
            let ta: Vec<_> = a.iter().collect();
            let tb: Vec<_> = b.iter().collect();
            params.track_distance(ta[i], tb[j]).unwrap()
        })
        .unwrap();
        let total: f64 = q.iter().map(|p| p.cost).sum();
        assert!((total - brute_force_min(&cost.transpose())).abs() < 1e-9);
        assert!(!q.is_row_matched(2));
    }

    #[test]
    fn disjoint_domains_never_match() {
        let a: TrackSet = [line(1, 1, 0.0, 0.0, 1..=3), line(1, 2, 50.0, 0.0, 1..=3)]
            .into_iter()
            .collect();
        let b: TrackSet = [line(2, 1, 0.0, 0.0, 4..=6), line(2, 2, 50.0, 0.0, 4..=6)]
            .into_iter()
            .collect();
        let q = determine_matched_pairs(&a, &b, MatchingParams::ospa(100.0)).unwrap();
        assert!(q.is_empty());
    }

    #[test]
    fn cost_equal_to_cutoff_is_rejected() {
        let a: TrackSet = [track(1, 1, &[(1, 0.0, 0.0)])].into_iter().collect();
        let b: TrackSet = [track(2, 1, &[(1, 100.0, 0.0)])].into_iter().collect();
        assert!(determine_matched_pairs(&a, &b, MatchingParams::ospa(100.0))
            .unwrap()
            .is_empty());
        let b: TrackSet = [track(2, 1, &[(1, 99.5, 0.0)])].into_iter().collect();
        assert_eq!(
            determine_matched_pairs(&a, &b, MatchingParams::ospa(100.0))
                .unwrap()
                .len(),
            1
        );
    }
}
