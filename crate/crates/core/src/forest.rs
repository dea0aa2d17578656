//! Random forest of depth-limited CART trees (Gini impurity) with bootstrap
//! samples and a random feature subset at every split. Prediction is the
//! majority vote; ties go to enemy.

use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, Labeled};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` means `floor(sqrt(D))`.
    pub max_features: Option<usize>,
    /// Draw `N` samples with replacement per tree; otherwise use all.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, max_depth: 7, max_features: None, bootstrap: true, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Fraction of friends among the training samples reaching the leaf.
        friend_fraction: f64,
        samples: usize,
    },
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Nodes stored in a flat list; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> &Node {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                leaf => return leaf,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        match self.leaf(x) {
            Node::Leaf { friend_fraction, .. } if *friend_fraction > 0.5 => Label::Friend,
            _ => Label::Enemy,
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_features: usize,
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vote {
    pub label: Label,
    /// Share of trees that voted for `label`.
    pub vote_fraction: f64,
    pub friend_fraction: f64,
}

fn gini(friends: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = friends as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    xs: &'a [&'a [f64]],
    ys: &'a [bool],
    max_depth: usize,
    max_features: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut Rng) -> usize {
        let friends = idx.iter().filter(|&&i| self.ys[i]).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { friend_fraction: friends as f64 / idx.len() as f64, samples: idx.len() });
        if depth >= self.max_depth || friends == 0 || friends == idx.len() {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(idx, friends, rng) else { return id };
        let mut mid = 0;
        for k in 0..idx.len() {
            if self.xs[idx[k]][feature] <= threshold {
                idx.swap(k, mid);
                mid += 1;
            }
        }
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }

    /// Best Gini split over a random feature subset, thresholds at midpoints
    /// between consecutive distinct values. If none of the drawn features
    /// can split the node, further features are tried until one can.
    fn best_split(&self, idx: &[usize], friends: usize, rng: &mut Rng) -> Option<(usize, f64)> {
        let d = self.xs[0].len();
        let n = idx.len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut vals: Vec<(f64, bool)> = Vec::with_capacity(n);
        for (tried, feature) in sample(rng, d, d).into_iter().enumerate() {
            if tried >= self.max_features && best.is_some() {
                break;
            }
            vals.clear();
            vals.extend(idx.iter().map(|&i| (self.xs[i][feature], self.ys[i])));
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_f = 0;
            for k in 1..n {
                left_f += usize::from(vals[k - 1].1);
                if vals[k].0 <= vals[k - 1].0 {
                    continue;
                }
                let score = k as f64 * gini(left_f, k) + (n - k) as f64 * gini(friends - left_f, n - k);
                if best.is_none_or(|b| score < b.0) {
                    best = Some((score, feature, 0.5 * (vals[k - 1].0 + vals[k].0)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

pub fn train_forest<S: Labeled + Sync>(samples: &[S], config: &ForestConfig) -> Result<ForestModel> {
    let first = samples.first().ok_or(Error::EmptyInput("no training samples"))?;
    let d = first.features().len();
    if config.n_trees == 0 || d == 0 {
        return Err(Error::Config("forest needs at least one tree and one feature".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.features().len() != d) {
        return Err(Error::Shape { expected: d, actual: s.features().len() });
    }
    let ys: Vec<bool> = samples.iter().map(|s| s.label() == Label::Friend).collect();
    if ys.iter().all(|&y| y) || ys.iter().all(|&y| !y) {
        return Err(Error::Training("both classes must be present".into()));
    }
    let xs: Vec<&[f64]> = samples.iter().map(|s| s.features()).collect();
    let max_features = config.max_features.unwrap_or(((d as f64).sqrt() as usize).max(1)).max(1);
    let n = samples.len();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(config.seed, t as u64);
            let mut idx: Vec<usize> =
                if config.bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
            let mut b = Builder { xs: &xs, ys: &ys, max_depth: config.max_depth, max_features, nodes: Vec::new() };
            b.grow(&mut idx, 0, &mut rng);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(ForestModel { n_features: d, config: config.clone(), trees })
}

impl ForestModel {
    pub fn vote(&self, x: &[f64]) -> Result<Vote> {
        if x.len() != self.n_features {
            return Err(Error::Shape { expected: self.n_features, actual: x.len() });
        }
        let friends = self.trees.iter().filter(|t| t.predict(x) == Label::Friend).count();
        let friend_fraction = friends as f64 / self.trees.len() as f64;
        let label = if friend_fraction > 0.5 { Label::Friend } else { Label::Enemy };
        let vote_fraction = if label == Label::Friend { friend_fraction } else { 1.0 - friend_fraction };
        Ok(Vote { label, vote_fraction, friend_fraction })
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        Ok(serde_json::from_reader(input)?)
    }
}

pub fn predict_forest(model: &ForestModel, features: &[f64]) -> Result<Vote> {
    model.vote(features)
}
