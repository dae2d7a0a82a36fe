use std::collections::HashMap;

use crate::error::FusionError;
use crate::track::{GlobalLabel, TrackSet};

use super::matching::MatchedPairs;

/// Number of scans each label of node a has been matched with each label of
/// node b. Rows and columns follow the order in which labels first appeared
/// and are only ever appended.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchedHistory {
    row_labels: Vec<GlobalLabel>,
    col_labels: Vec<GlobalLabel>,
    row_index: HashMap<GlobalLabel, usize>,
    col_index: HashMap<GlobalLabel, usize>,
    counts: Vec<Vec<u32>>,
}

impl MatchedHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn row_labels(&self) -> &[GlobalLabel] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[GlobalLabel] {
        &self.col_labels
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.row_labels.len(), self.col_labels.len())
    }

    /// Count at cell `(i, j)` by position.
    pub fn at(&self, i: usize, j: usize) -> u32 {
        self.counts[i][j]
    }

    /// Count for a label pair; zero if either label is unknown.
    pub fn count(&self, row: &GlobalLabel, col: &GlobalLabel) -> u32 {
        match (self.row_index.get(row), self.col_index.get(col)) {
            (Some(&i), Some(&j)) => self.counts[i][j],
            _ => 0,
        }
    }

    /// Appends labels not yet in the row space, keeping their given order.
    pub fn extend_rows<'a>(&mut self, labels: impl IntoIterator<Item = &'a GlobalLabel>) {
        for &l in labels {
            if !self.row_index.contains_key(&l) {
                self.row_index.insert(l, self.row_labels.len());
                self.row_labels.push(l);
                self.counts.push(vec![0; self.col_labels.len()]);
            }
        }
    }

    /// Appends labels not yet in the column space.
    pub fn extend_cols<'a>(&mut self, labels: impl IntoIterator<Item = &'a GlobalLabel>) {
        for &l in labels {
            if !self.col_index.contains_key(&l) {
                self.col_index.insert(l, self.col_labels.len());
                self.col_labels.push(l);
                for row in &mut self.counts {
                    row.push(0);
                }
            }
        }
    }

    /// Adds one match between two known labels and returns the new count.
    pub fn increment(&mut self, row: &GlobalLabel, col: &GlobalLabel) -> Result<u32, FusionError> {
        let i = *self.row_index.get(row).ok_or(FusionError::UnknownLabel(*row))?;
        let j = *self.col_index.get(col).ok_or(FusionError::UnknownLabel(*col))?;
        self.counts[i][j] += 1;
        Ok(self.counts[i][j])
    }

    /// Label pairs with a count of at least `min_count`.
    pub fn links(&self, min_count: u32) -> impl Iterator<Item = (GlobalLabel, GlobalLabel, u32)> + '_ {
        self.counts.iter().enumerate().flat_map(move |(i, row)| {
            row.iter()
                .enumerate()
                .filter(move |(_, &n)| n >= min_count && n > 0)
                .map(move |(j, &n)| (self.row_labels[i], self.col_labels[j], n))
        })
    }
}

/// Grows `prev` to the label spaces `la` × `lb` and counts one match for
/// every pair in `q`, addressed through the labels of `current_a` and
/// `current_b`.
pub fn update_matched_history(
    prev: &MatchedHistory,
    la: &[GlobalLabel],
    lb: &[GlobalLabel],
    q: &MatchedPairs,
    current_a: &TrackSet,
    current_b: &TrackSet,
) -> Result<MatchedHistory, FusionError> {
    let mut next = prev.clone();
    next.extend_rows(la);
    next.extend_cols(lb);
    let a: Vec<&GlobalLabel> = current_a.labels().collect();
    let b: Vec<&GlobalLabel> = current_b.labels().collect();
    for pair in q.iter() {
        let (row, col) = match (a.get(pair.row), b.get(pair.col)) {
            (Some(r), Some(c)) => (*r, *c),
            _ => {
                return Err(FusionError::InvalidInput(format!(
                    "matched pair ({}, {}) is out of range",
                    pair.row, pair.col
                )))
            }
        };
        next.increment(row, col)?;
    }
    Ok(next)
}
