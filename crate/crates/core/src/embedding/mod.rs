//! Structural node embeddings: second-order biased random walks on the
//! undirected, unweighted view of the network, skip-gram with negative
//! sampling over the walks, edge-embedding merges and SMOTE oversampling.

mod skipgram;
mod smote;
mod table;
mod walks;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SignedDigraph;

pub use skipgram::{embed_graph, train_skipgram};
pub use smote::{balance_with_smote, smote};
pub use table::{embed_edge, EmbeddingTable, Merge};
pub use walks::{
    biased_walks, transition_probabilities, walk_locality, write_walks, LocalitySummary,
    WalkSampler,
};

/// Walk and skip-gram parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Return parameter.
    pub p: f64,
    /// In-out parameter; large values keep walks local.
    pub q: f64,
    pub walks_per_node: usize,
    /// Transition draws per walk; a walk visits `walk_length + 1` nodes.
    pub walk_length: usize,
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Lock-free parallel skip-gram updates. Faster, not reproducible.
    pub hogwild: bool,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            p: 1.0,
            q: 4.0,
            walks_per_node: 420,
            walk_length: 30,
            dimension: 128,
            window: 10,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            hogwild: false,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.p > 0.0
            && self.q > 0.0
            && self.p.is_finite()
            && self.q.is_finite()
            && self.dimension >= 1
            && self.walk_length >= 1
            && self.walks_per_node >= 1
            && self.epochs >= 1
            && self.learning_rate > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid walk configuration {self:?}")))
        }
    }
}

/// Symmetrized, unweighted adjacency with sorted neighbor lists.
#[derive(Clone, Debug)]
pub struct UndirectedView {
    ids: Vec<String>,
    adj: Vec<Vec<u32>>,
}

impl UndirectedView {
    pub fn from_graph(g: &SignedDigraph) -> Self {
        let mut adj = vec![Vec::new(); g.node_count()];
        for e in g.edges() {
            adj[e.src].push(e.dst as u32);
            adj[e.dst].push(e.src as u32);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        UndirectedView { ids: g.students().iter().map(|s| s.student_id.clone()).collect(), adj }
    }

    /// View over nodes named "0".."n-1" with the given undirected edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b {
                adj[a].push(b as u32);
                adj[b].push(a as u32);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        UndirectedView { ids: (0..n).map(|i| i.to_string()).collect(), adj }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&(b as u32)).is_ok()
    }
}
