use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::track::GlobalLabel;

use super::history::MatchedHistory;
use super::LabelMode;

/// Undirected graph linking labels that have been matched across nodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelGraph {
    adjacency: BTreeMap<GlobalLabel, BTreeSet<GlobalLabel>>,
}

impl LabelGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Graph with an edge for every label pair matched at least `min_count`
    /// times in any of `histories`.
    pub fn from_histories<'a>(histories: impl IntoIterator<Item = &'a MatchedHistory>, min_count: u32) -> Self {
        let mut g = Self::new();
        for h in histories {
            for l in h.row_labels().iter().chain(h.col_labels()) {
                g.add_vertex(*l);
            }
            for (a, b, _) in h.links(min_count) {
                g.add_edge(a, b);
            }
        }
        g
    }

    pub fn add_vertex(&mut self, label: GlobalLabel) {
        self.adjacency.entry(label).or_default();
    }

    /// Links two labels. Labels of the same node are never linked.
    pub fn add_edge(&mut self, a: GlobalLabel, b: GlobalLabel) -> bool {
        if a.node_id == b.node_id {
            return false;
        }
        self.adjacency.entry(a).or_default().insert(b);
        self.adjacency.entry(b).or_default().insert(a)
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: &GlobalLabel, b: &GlobalLabel) -> bool {
        self.adjacency.get(a).is_some_and(|n| n.contains(b))
    }

    pub fn neighbors(&self, label: &GlobalLabel) -> impl Iterator<Item = &GlobalLabel> {
        self.adjacency.get(label).into_iter().flatten()
    }

    /// Every label reachable from `label`, itself included, in label order.
    pub fn component(&self, label: &GlobalLabel) -> BTreeSet<GlobalLabel> {
        let mut seen = BTreeSet::from([*label]);
        let mut queue = VecDeque::from([*label]);
        while let Some(v) = queue.pop_front() {
            for n in self.neighbors(&v) {
                if seen.insert(*n) {
                    queue.push_back(*n);
                }
            }
        }
        seen
    }

    fn candidates(&self, label: &GlobalLabel, mode: LabelMode) -> BTreeSet<GlobalLabel> {
        match mode {
            LabelMode::Component => self.component(label),
            LabelMode::Neighbors => {
                let mut c: BTreeSet<GlobalLabel> = self.neighbors(label).copied().collect();
                c.insert(*label);
                c
            }
            LabelMode::Disabled => BTreeSet::from([*label]),
        }
    }

    /// Rewrites each label to the least candidate label not already taken by
    /// another entry. Entries are processed in label order; the original
    /// label is always a candidate so a replacement is always found.
    pub fn relabel(&self, labels: &[GlobalLabel], mode: LabelMode) -> Vec<GlobalLabel> {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by_key(|&i| labels[i]);
        let mut current = labels.to_vec();
        for &i in &order {
            let own = current[i];
            let taken = |c: &GlobalLabel| current.iter().enumerate().any(|(j, l)| j != i && l == c);
            if let Some(c) = self.candidates(&own, mode).into_iter().find(|c| *c == own || !taken(c)) {
                current[i] = c;
            }
        }
        current
    }
}

/// Rewrites consensed labels so that labels linked through the matched
/// histories collapse onto one representative.
pub fn update_labels<'a>(
    labels: &[GlobalLabel],
    histories: impl IntoIterator<Item = &'a MatchedHistory>,
    mode: LabelMode,
    min_count: u32,
) -> Vec<GlobalLabel> {
    LabelGraph::from_histories(histories, min_count).relabel(labels, mode)
}
