use std::collections::BTreeMap;

use num_rational::Ratio;

use crate::error::FusionError;
use crate::topology::Topology;
use crate::track::NodeId;

/// Convex fusing weights of the fusing node and one peer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairWeights {
    own: f64,
    peer: f64,
}

impl PairWeights {
    pub fn new(own: f64, peer: f64) -> Result<Self, FusionError> {
        if !(own > 0.0 && peer > 0.0 && ((own + peer) - 1.0).abs() <= 1e-12) {
            return Err(FusionError::InvalidWeights { own, peer });
        }
        Ok(Self { own, peer })
    }

    pub fn equal() -> Self {
        Self { own: 0.5, peer: 0.5 }
    }

    pub fn own(&self) -> f64 {
        self.own
    }

    pub fn peer(&self) -> f64 {
        self.peer
    }
}

/// Metropolis weights of an undirected topology, kept as exact fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct MetropolisWeights {
    degrees: BTreeMap<NodeId, u64>,
    weights: BTreeMap<(NodeId, NodeId), Ratio<u64>>,
}

fn link_weight(da: u64, db: u64) -> Ratio<u64> {
    Ratio::new(1, 1 + da.max(db))
}

/// `w(a,b) = 1 / (1 + max(deg a, deg b))` for neighbours and
/// `w(a,a) = 1 - sum of the node's link weights`.
pub fn metropolis_weights(topology: &Topology) -> MetropolisWeights {
    let degrees: BTreeMap<NodeId, u64> = topology.nodes().map(|a| (a, topology.degree(a) as u64)).collect();
    let mut weights = BTreeMap::new();
    for a in topology.nodes() {
        let mut total = Ratio::from_integer(0);
        for b in topology.neighbors(a) {
            let w = link_weight(degrees[&a], degrees[&b]);
            total += w;
            weights.insert((a, b), w);
        }
        weights.insert((a, a), Ratio::from_integer(1) - total);
    }
    MetropolisWeights { degrees, weights }
}

impl MetropolisWeights {
    /// Exact weight; zero for nodes that are not linked.
    pub fn exact(&self, a: NodeId, b: NodeId) -> Ratio<u64> {
        self.weights
            .get(&(a, b))
            .copied()
            .unwrap_or_else(|| Ratio::from_integer(0))
    }

    pub fn weight(&self, a: NodeId, b: NodeId) -> f64 {
        let r = self.exact(a, b);
        *r.numer() as f64 / *r.denom() as f64
    }

    pub fn self_weight(&self, a: NodeId) -> f64 {
        self.weight(a, a)
    }

    /// Exact sum of the weights node `a` assigns, itself included.
    pub fn row_sum(&self, a: NodeId) -> Ratio<u64> {
        self.weights
            .range((a, NodeId::MIN)..=(a, NodeId::MAX))
            .fold(Ratio::from_integer(0), |acc, (_, w)| acc + *w)
    }

    /// Normalised weights for fusing `a` with `b`: the two Metropolis
    /// weights rescaled to sum to one. For nodes that are not linked the
    /// link weight is evaluated from the degree formula.
    pub fn pair(&self, a: NodeId, b: NodeId) -> PairWeights {
        let own = self.exact(a, a);
        let link = match self.weights.get(&(a, b)) {
            Some(w) => *w,
            None => link_weight(
                self.degrees.get(&a).copied().unwrap_or(0),
                self.degrees.get(&b).copied().unwrap_or(0),
            ),
        };
        let total = own + link;
        let w_own = own / total;
        let w_peer = Ratio::from_integer(1) - w_own;
        PairWeights {
            own: *w_own.numer() as f64 / *w_own.denom() as f64,
            peer: *w_peer.numer() as f64 / *w_peer.denom() as f64,
        }
    }
}
