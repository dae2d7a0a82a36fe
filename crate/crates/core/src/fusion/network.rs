use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::error::FusionError;
use crate::topology::Topology;
use crate::track::{GlobalLabel, LabeledStateSet, NodeId, Scan, TrackSet};

use super::history::MatchedHistory;
use super::labels::{update_labels, LabelGraph};
use super::two_node::{fuse_two_nodes, lift_to_tracks};
use super::weights::{metropolis_weights, MetropolisWeights, PairWeights};
use super::{FusionConfig, LabelMode, PeerMode};

/// Consensed estimate of one node at one scan and the wall-clock time the
/// node spent producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeConsensus {
    pub estimates: LabeledStateSet,
    pub elapsed: Duration,
}

type Histories = BTreeMap<(NodeId, NodeId), MatchedHistory>;

fn peers_of(topology: &Topology, mode: PeerMode, a: NodeId) -> Vec<NodeId> {
    match mode {
        PeerMode::AllNodes => topology.nodes().filter(|&b| b != a).collect(),
        PeerMode::Neighbors => topology.neighbors(a).collect(),
    }
}

/// Fuses node `a` with each peer, then merges the per-peer results with
/// running-average weights and no track-length threshold. Every pairwise
/// match is recorded in `histories[(a, b)]`; `on_link` sees each label pair
/// whose count has just reached the configured minimum.
#[allow(clippy::too_many_arguments)]
fn kinematic_consensus(
    a: NodeId,
    peers: &[NodeId],
    live: &BTreeMap<NodeId, TrackSet>,
    histories: &mut Histories,
    weights: &MetropolisWeights,
    config: &FusionConfig,
    k: Scan,
    mut on_link: impl FnMut(GlobalLabel, GlobalLabel),
) -> Result<LabeledStateSet, FusionError> {
    let empty = TrackSet::new();
    let own = live.get(&a).unwrap_or(&empty);
    if peers.is_empty() {
        return Ok(own
            .iter()
            .filter_map(|t| t.latest_at_or_before(k).map(|(_, x)| (t.label, *x)))
            .collect());
    }
    let matching = config.matching();
    let mut temps = Vec::with_capacity(peers.len());
    for &b in peers {
        let peer = live.get(&b).unwrap_or(&empty);
        let history = histories.entry((a, b)).or_default();
        let out = fuse_two_nodes(
            own,
            peer,
            Some(history),
            weights.pair(a, b),
            matching,
            config.min_track_len,
            k,
        )?;
        for p in out.pairs.iter() {
            if history.count(&p.row_label, &p.col_label) == config.min_match_count {
                on_link(p.row_label, p.col_label);
            }
        }
        temps.push(out.consensus);
    }
    let mut temps = temps.into_iter();
    let mut consensus = temps.next().unwrap_or_default();
    for (i, temp) in temps.enumerate() {
        let n = (i + 2) as f64;
        let w = PairWeights::new((n - 1.0) / n, 1.0 / n)?;
        consensus = fuse_two_nodes(
            &lift_to_tracks(&consensus, k),
            &lift_to_tracks(&temp, k),
            None,
            w,
            matching,
            1,
            k,
        )?
        .consensus;
    }
    Ok(consensus)
}

fn relabel_set(set: &LabeledStateSet, graph: &LabelGraph, mode: LabelMode) -> LabeledStateSet {
    if mode == LabelMode::Disabled {
        return set.clone();
    }
    let labels: Vec<GlobalLabel> = set.labels().copied().collect();
    graph
        .relabel(&labels, mode)
        .into_iter()
        .zip(set.states().copied())
        .collect()
}

/// Consensus at scan `k` for every node of `topology`.
///
/// `live` holds each node's live tracks restricted to the fusion window;
/// nodes without an entry have no live tracks. `histories` is keyed by
/// (fusing node, peer) and grows as new labels and matches appear. Labels
/// are rewritten from a label graph rebuilt from all histories.
pub fn fuse_multi_nodes(
    live: &BTreeMap<NodeId, TrackSet>,
    histories: &mut BTreeMap<(NodeId, NodeId), MatchedHistory>,
    config: &FusionConfig,
    topology: &Topology,
    k: Scan,
) -> Result<BTreeMap<NodeId, LabeledStateSet>, FusionError> {
    config.validate()?;
    let weights = metropolis_weights(topology);
    let mut kinematic = BTreeMap::new();
    for a in topology.nodes() {
        let peers = peers_of(topology, config.peers, a);
        let con = kinematic_consensus(a, &peers, live, histories, &weights, config, k, |_, _| {})?;
        kinematic.insert(a, (con, peers.is_empty()));
    }
    Ok(kinematic
        .into_iter()
        .map(|(a, (con, alone))| {
            if alone || config.label_mode == LabelMode::Disabled {
                return (a, con);
            }
            let labels: Vec<GlobalLabel> = con.labels().copied().collect();
            let relabeled = update_labels(&labels, histories.values(), config.label_mode, config.min_match_count);
            (a, relabeled.into_iter().zip(con.states().copied()).collect())
        })
        .collect())
}

/// Stateful multi-node fusion. Keeps the matched histories of every
/// (fusing node, peer) pair and a label graph that is extended as soon as a
/// label pair reaches the minimum match count, so relabelling does not
/// rebuild the graph each scan.
#[derive(Debug, Clone)]
pub struct NetworkFusion {
    config: FusionConfig,
    topology: Topology,
    weights: MetropolisWeights,
    histories: Histories,
    graph: LabelGraph,
}

impl NetworkFusion {
    pub fn new(config: FusionConfig, topology: Topology) -> Result<Self, FusionError> {
        config.validate()?;
        let weights = metropolis_weights(&topology);
        Ok(Self {
            config,
            topology,
            weights,
            histories: BTreeMap::new(),
            graph: LabelGraph::new(),
        })
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn weights(&self) -> &MetropolisWeights {
        &self.weights
    }

    pub fn history(&self, a: NodeId, b: NodeId) -> Option<&MatchedHistory> {
        self.histories.get(&(a, b))
    }

    pub fn histories(&self) -> &BTreeMap<(NodeId, NodeId), MatchedHistory> {
        &self.histories
    }

    pub fn graph(&self) -> &LabelGraph {
        &self.graph
    }

    /// Runs one scan of fusion for every node. Per-node times cover that
    /// node's kinematic consensus and its relabelling.
    pub fn step(
        &mut self,
        live: &BTreeMap<NodeId, TrackSet>,
        k: Scan,
    ) -> Result<BTreeMap<NodeId, NodeConsensus>, FusionError> {
        let nodes: Vec<NodeId> = self.topology.nodes().collect();
        let mut kinematic = Vec::with_capacity(nodes.len());
        for &a in &nodes {
            let start = Instant::now();
            let peers = peers_of(&self.topology, self.config.peers, a);
            let graph = &mut self.graph;
            let con = kinematic_consensus(
                a,
                &peers,
                live,
                &mut self.histories,
                &self.weights,
                &self.config,
                k,
                |x, y| {
                    graph.add_edge(x, y);
                },
            )?;
            kinematic.push((a, con, peers.is_empty(), start.elapsed()));
        }
        let mut out = BTreeMap::new();
        for (a, con, alone, elapsed) in kinematic {
            let start = Instant::now();
            let estimates = if alone {
                con
            } else {
                relabel_set(&con, &self.graph, self.config.label_mode)
            };
            out.insert(
                a,
                NodeConsensus {
                    estimates,
                    elapsed: elapsed + start.elapsed(),
                },
            );
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::MatchingParams;
    use crate::track::{StateVector, Track};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn steady(node: u32, birth: u32, px: f64, py: f64, ks: std::ops::RangeInclusive<u32>) -> Track {
        Track::from_samples(
            GlobalLabel::new(birth, 1, node),
            ks.map(|k| (k, StateVector::new(px, 0.0, py, 0.0))),
        )
    }

    fn config(c_len: usize) -> FusionConfig {
        FusionConfig {
            min_track_len: c_len,
            ..FusionConfig::default()
        }
    }

    #[test]
    fn two_nodes_reduce_to_pairwise_fusion_and_relabel() {
        let t1: TrackSet = [steady(1, 1, 0.0, 0.0, 1..=5), steady(1, 2, 400.0, 0.0, 3..=5)]
            .into_iter()
            .collect();
        let t2: TrackSet = [steady(2, 4, 6.0, 0.0, 4..=5), steady(2, 1, 900.0, 0.0, 1..=5)]
            .into_iter()
            .collect();
        let live = BTreeMap::from([(1, t1.clone()), (2, t2.clone())]);
        let mut net = NetworkFusion::new(config(2), Topology::full([1, 2])).unwrap();
        let out = net.step(&live, 5).unwrap();

        let mut h12 = MatchedHistory::new();
        let mut h21 = MatchedHistory::new();
        let p = MatchingParams::ospa(100.0);
        let c1 = fuse_two_nodes(&t1, &t2, Some(&mut h12), PairWeights::equal(), p, 2, 5).unwrap();
        let c2 = fuse_two_nodes(&t2, &t1, Some(&mut h21), PairWeights::equal(), p, 2, 5).unwrap();
        for (node, c) in [(1, c1), (2, c2)] {
            let labels: Vec<_> = c.consensus.labels().copied().collect();
            let relabeled = update_labels(&labels, [&h12, &h21], LabelMode::Component, 1);
            let want: LabeledStateSet = relabeled.into_iter().zip(c.consensus.states().copied()).collect();
            assert_eq!(out[&node].estimates, want);
        }
        // The object seen by both nodes carries node 1's earlier label.
        assert!(out[&2].estimates.contains(&GlobalLabel::new(1, 1, 1)));
        assert!(!out[&2].estimates.contains(&GlobalLabel::new(4, 1, 2)));
    }

    #[test]
    fn exclusive_object_propagates_to_all_nodes() {
        let shared = |node| steady(node, 1, 0.0, 0.0, 1..=5);
        let live = BTreeMap::from([
            (1, [shared(1)].into_iter().collect::<TrackSet>()),
            (2, [shared(2)].into_iter().collect()),
            (3, [shared(3), steady(3, 2, 700.0, 700.0, 2..=5)].into_iter().collect()),
        ]);
        let mut net = NetworkFusion::new(config(2), Topology::full([1, 2, 3])).unwrap();
        let out = net.step(&live, 5).unwrap();
        let exclusive = GlobalLabel::new(2, 1, 3);
        for node in 1..=3 {
            let est = &out[&node].estimates;
            assert_eq!(est.len(), 2, "node {node}: {est:?}");
            assert!(est.contains(&exclusive), "node {node}");
            assert!(est.contains(&GlobalLabel::new(1, 1, 1)), "node {node}");
        }
    }

    #[test]
    fn isolated_node_passes_through() {
        let t3: TrackSet = [steady(3, 1, 5.0, 5.0, 1..=5)].into_iter().collect();
        let live = BTreeMap::from([(3, t3.clone())]);
        let cfg = FusionConfig {
            peers: PeerMode::Neighbors,
            ..config(2)
        };
        let topo = Topology::from_edges([1, 2, 3], [(1, 2)]);
        let mut net = NetworkFusion::new(cfg, topo).unwrap();
        let out = net.step(&live, 5).unwrap();
        assert_eq!(out[&3].estimates, t3.states_at(5));
        assert!(out[&1].estimates.is_empty());
    }

    #[test]
    fn inputs_are_untouched() {
        let live = BTreeMap::from([
            (1, [steady(1, 1, 0.0, 0.0, 1..=5)].into_iter().collect::<TrackSet>()),
            (2, [steady(2, 1, 3.0, 0.0, 1..=5)].into_iter().collect()),
        ]);
        let before = live.clone();
        let mut net = NetworkFusion::new(config(2), Topology::full([1, 2])).unwrap();
        net.step(&live, 5).unwrap();
        assert_eq!(live, before);
    }

    fn arb_live() -> impl Strategy<Value = Vec<BTreeMap<NodeId, TrackSet>>> {
        // Up to four objects on a coarse grid, each seen by a random subset of
        // three nodes with small offsets, over four scans.
        let obs = (0u32..4, 1u32..4, -20.0f64..20.0, 0u32..3);
        prop::collection::vec(prop::collection::vec(obs, 0..10), 1..5).prop_map(|scans| {
            scans
                .into_iter()
                .enumerate()
                .map(|(s, obs)| {
                    let k = s as u32 + 1;
                    let mut live: BTreeMap<NodeId, TrackSet> = BTreeMap::new();
                    for (obj, node, off, birth) in obs {
                        let set = live.entry(node).or_default();
                        let t = Track::from_samples(
                            GlobalLabel::new(birth + 1, obj + 1, node),
                            [(k, StateVector::new(obj as f64 * 300.0 + off, 0.0, 0.0, 0.0))],
                        );
                        let _ = set.insert(t);
                    }
                    live
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn incremental_graph_matches_rebuilt_graph(scans in arb_live(), c_len in 1usize..3) {
            let topo = Topology::full([1, 2, 3]);
            let cfg = config(c_len);
            let mut net = NetworkFusion::new(cfg.clone(), topo.clone()).unwrap();
            let mut histories = BTreeMap::new();
            for (s, live) in scans.iter().enumerate() {
                let k = s as u32 + 1;
                let a = net.step(live, k).unwrap();
                let b = fuse_multi_nodes(live, &mut histories, &cfg, &topo, k).unwrap();
                for node in 1..=3 {
                    prop_assert_eq!(&a[&node].estimates, &b[&node]);
                    let labels: BTreeSet<_> = b[&node].labels().collect();
                    prop_assert_eq!(labels.len(), b[&node].len());
                }
            }
            prop_assert_eq!(net.histories(), &histories);
        }
    }
}
