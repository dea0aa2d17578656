use std::sync::atomic::{AtomicU64, Ordering::Relaxed};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use rayon::prelude::*;

use super::walks::{walk_round, WalkSampler};
use super::{EmbeddingTable, UndirectedView, WalkConfig};
use crate::error::{Error, Result};
use crate::rng;

// Parameters are stored as f64 bit patterns in relaxed atomics. A relaxed
// load or store compiles to a plain move, so the sequential path pays
// nothing, and the hogwild path gets racy but well-defined updates.
fn load(v: &AtomicU64) -> f64 {
    f64::from_bits(v.load(Relaxed))
}

fn store(v: &AtomicU64, x: f64) {
    v.store(x.to_bits(), Relaxed)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Trainer<'a> {
    config: &'a WalkConfig,
    dim: usize,
    input: Vec<AtomicU64>,
    output: Vec<AtomicU64>,
    noise: WeightedIndex<f64>,
    walks_per_epoch: usize,
}

impl<'a> Trainer<'a> {
    fn new(config: &'a WalkConfig, n_nodes: usize, counts: &[u64], walks_per_epoch: usize) -> Result<Self> {
        let dim = config.dimension;
        let mut init = rng::seeded(config.seed);
        let half = 0.5 / dim as f64;
        let input = (0..n_nodes * dim)
            .map(|_| AtomicU64::new(init.gen_range(-half..half).to_bits()))
            .collect();
        let output = (0..n_nodes * dim).map(|_| AtomicU64::new(0f64.to_bits())).collect();
        let noise = WeightedIndex::new(counts.iter().map(|&c| (c as f64).powf(0.75)))
            .map_err(|e| Error::Training(format!("negative sampling table: {e}")))?;
        Ok(Trainer { config, dim, input, output, noise, walks_per_epoch })
    }

    fn learning_rate(&self, epoch: usize, walk: usize) -> f64 {
        let total = (self.config.epochs * self.walks_per_epoch) as f64;
        let done = (epoch * self.walks_per_epoch + walk) as f64;
        self.config.learning_rate * (1.0 - done / total).max(1e-4)
    }

    /// Skip-gram with negative sampling over one walk. The context window
    /// is shrunk by a random amount per center node, as in word2vec.
    fn train_walk(&self, walk: &[u32], epoch: usize, index: usize, scratch: &mut Vec<f64>) {
        let lr = self.learning_rate(epoch, index);
        let mut rng = rng::stream(rng::child_seed(self.config.seed, epoch as u64 + 1), index as u64);
        let d = self.dim;
        for (pos, &center) in walk.iter().enumerate() {
            let shrink = rng.gen_range(0..self.config.window.max(1));
            let w = self.config.window.saturating_sub(shrink).max(1);
            let lo = pos.saturating_sub(w);
            let hi = (pos + w).min(walk.len() - 1);
            for ctx_pos in lo..=hi {
                let context = walk[ctx_pos];
                if ctx_pos == pos || context == center {
                    continue;
                }
                let vin = &self.input[center as usize * d..(center as usize + 1) * d];
                scratch.clear();
                scratch.resize(d, 0.0);
                for n in 0..=self.config.negatives {
                    let (target, label) = if n == 0 {
                        (context, 1.0)
                    } else {
                        let t = self.noise.sample(&mut rng) as u32;
                        if t == context {
                            continue;
                        }
                        (t, 0.0)
                    };
                    let vout = &self.output[target as usize * d..(target as usize + 1) * d];
                    let dot: f64 = vin.iter().zip(vout).map(|(a, b)| load(a) * load(b)).sum();
                    let g = (label - sigmoid(dot)) * lr;
                    for k in 0..d {
                        let o = load(&vout[k]);
                        scratch[k] += g * o;
                        store(&vout[k], o + g * load(&vin[k]));
                    }
                }
                for k in 0..d {
                    store(&vin[k], load(&vin[k]) + scratch[k]);
                }
            }
        }
    }

    fn train_batch(&self, walks: &[Vec<u32>], epoch: usize, first_index: usize) {
        if self.config.hogwild {
            walks.par_iter().enumerate().for_each_init(Vec::new, |scratch, (i, w)| {
                self.train_walk(w, epoch, first_index + i, scratch)
            });
        } else {
            let mut scratch = Vec::new();
            for (i, w) in walks.iter().enumerate() {
                self.train_walk(w, epoch, first_index + i, &mut scratch);
            }
        }
    }

    fn finish(self, ids: Vec<String>) -> Result<EmbeddingTable> {
        let data = self.input.iter().map(load).collect();
        EmbeddingTable::new(ids, self.dim, data)
    }
}

fn node_counts(counts: &mut [u64], walks: &[Vec<u32>]) {
    for w in walks {
        for &v in w {
            counts[v as usize] += 1;
        }
    }
}

/// Trains node vectors on precomputed walks. `ids` names the nodes the walk
/// entries index into. Deterministic unless `config.hogwild` is set.
pub fn train_skipgram(walks: &[Vec<u32>], ids: &[String], config: &WalkConfig) -> Result<EmbeddingTable> {
    config.validate()?;
    if walks.is_empty() {
        return Err(Error::EmptyInput("no walks to train on"));
    }
    let mut counts = vec![0u64; ids.len()];
    node_counts(&mut counts, walks);
    let trainer = Trainer::new(config, ids.len(), &counts, walks.len())?;
    for epoch in 0..config.epochs {
        trainer.train_batch(walks, epoch, 0);
    }
    trainer.finish(ids.to_vec())
}

/// Walks and skip-gram in one pass, regenerating walks round by round
/// instead of holding all of them in memory. Produces the same table as
/// `train_skipgram(&biased_walks(view, config), view.ids(), config)`.
pub fn embed_graph(view: &UndirectedView, config: &WalkConfig) -> Result<EmbeddingTable> {
    config.validate()?;
    let n = view.node_count();
    if n == 0 {
        return Err(Error::EmptyInput("graph has no nodes"));
    }
    let sampler = WalkSampler::new(view, config.p, config.q);
    let mut counts = vec![0u64; n];
    for r in 0..config.walks_per_node {
        node_counts(&mut counts, &walk_round(&sampler, config, r));
    }
    let trainer = Trainer::new(config, n, &counts, n * config.walks_per_node)?;
    for epoch in 0..config.epochs {
        for r in 0..config.walks_per_node {
            trainer.train_batch(&walk_round(&sampler, config, r), epoch, r * n);
        }
    }
    trainer.finish(view.ids().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::biased_walks;

    fn small() -> WalkConfig {
        WalkConfig { walks_per_node: 10, dimension: 16, epochs: 2, ..WalkConfig::default() }
    }

    fn two_cliques() -> UndirectedView {
        let mut edges = Vec::new();
        for base in [0, 10] {
            for a in 0..10 {
                for b in a + 1..10 {
                    edges.push((base + a, base + b));
                }
            }
        }
        UndirectedView::from_edges(20, &edges)
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn cliques_separate() {
        let view = two_cliques();
        let t = embed_graph(&view, &small()).unwrap();
        let (mut intra, mut inter, mut ni, mut nx) = (0.0, 0.0, 0, 0);
        for a in 0..20 {
            for b in a + 1..20 {
                let c = cosine(t.row(a), t.row(b));
                if (a < 10) == (b < 10) {
                    intra += c;
                    ni += 1;
                } else {
                    inter += c;
                    nx += 1;
                }
            }
        }
        assert!(intra / ni as f64 > inter / nx as f64 + 0.2);
    }

    #[test]
    fn streaming_matches_materialized() {
        let view = two_cliques();
        let cfg = small();
        let a = embed_graph(&view, &cfg).unwrap();
        let b = train_skipgram(&biased_walks(&view, &cfg), view.ids(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, embed_graph(&view, &cfg).unwrap());
        assert_eq!(a.len(), 20);
        assert!((0..20).all(|i| a.row(i).len() == 16));
    }

    #[test]
    fn default_dimension_is_128() {
        let view = UndirectedView::from_edges(3, &[(0, 1)]);
        let cfg = WalkConfig { walks_per_node: 2, epochs: 1, ..WalkConfig::default() };
        let t = embed_graph(&view, &cfg).unwrap();
        assert_eq!(t.dim(), 128);
        assert!(t.get("2").unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn hogwild_still_separates() {
        let view = two_cliques();
        let cfg = WalkConfig { hogwild: true, ..small() };
        let t = embed_graph(&view, &cfg).unwrap();
        assert!(cosine(t.row(0), t.row(1)) > cosine(t.row(0), t.row(15)));
    }
}
