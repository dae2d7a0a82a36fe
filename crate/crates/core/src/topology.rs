//! Undirected communication graph between sensor nodes.

use std::collections::{BTreeMap, BTreeSet};

use crate::track::NodeId;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Topology {
    neighbors: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl Topology {
    /// Every node connected to every other node.
    pub fn full(nodes: impl IntoIterator<Item = NodeId>) -> Self {
        let nodes: BTreeSet<NodeId> = nodes.into_iter().collect();
        let neighbors = nodes
            .iter()
            .map(|&a| (a, nodes.iter().copied().filter(|&b| b != a).collect()))
            .collect();
        Self { neighbors }
    }

    /// Graph over `nodes` with the given undirected edges. Self-loops are
    /// ignored; edge endpoints not listed in `nodes` are added.
    pub fn from_edges(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Self {
        let mut neighbors: BTreeMap<NodeId, BTreeSet<NodeId>> =
            nodes.into_iter().map(|a| (a, BTreeSet::new())).collect();
        for (a, b) in edges {
            neighbors.entry(a).or_default();
            neighbors.entry(b).or_default();
            if a != b {
                neighbors.get_mut(&a).unwrap().insert(b);
                neighbors.get_mut(&b).unwrap().insert(a);
            }
        }
        Self { neighbors }
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.neighbors.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.neighbors.contains_key(&node)
    }

    pub fn neighbors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.neighbors.get(&node).into_iter().flatten().copied()
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.neighbors.get(&node).map_or(0, BTreeSet::len)
    }

    pub fn are_neighbors(&self, a: NodeId, b: NodeId) -> bool {
        self.neighbors.get(&a).is_some_and(|n| n.contains(&b))
    }

    /// Induced subgraph on `keep`.
    pub fn induced(&self, keep: &BTreeSet<NodeId>) -> Self {
        let neighbors = self
            .neighbors
            .iter()
            .filter(|(a, _)| keep.contains(a))
            .map(|(a, n)| (*a, n.intersection(keep).copied().collect()))
            .collect();
        Self { neighbors }
    }
}
