//! Labeled relationship samples, predictor sets and train/test splits.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embedding::{embed_edge, EmbeddingTable, Merge};
use crate::error::{Error, Result};
use crate::graph::{edge_triads, Gender, SignedDigraph, StudentAttributes, Weight};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Enemy = 0,
    Friend = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Label {
        if i == 1 {
            Label::Friend
        } else {
            Label::Enemy
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Enemy => Label::Friend,
            Label::Friend => Label::Enemy,
        }
    }
}

/// Which weights count as friend and which as enemy. Weights in neither set
/// produce no sample but still contribute to triadic influence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassScheme {
    friend: Vec<Weight>,
    enemy: Vec<Weight>,
}

impl ClassScheme {
    pub fn new(friend: &[Weight], enemy: &[Weight]) -> Result<Self> {
        if friend.is_empty() || enemy.is_empty() {
            return Err(Error::Config("class scheme needs friend and enemy weights".into()));
        }
        if friend.iter().any(|w| !w.is_positive()) || enemy.iter().any(|w| w.is_positive()) {
            return Err(Error::Config(
                "friend weights must be positive and enemy weights negative".into(),
            ));
        }
        let mut friend = friend.to_vec();
        let mut enemy = enemy.to_vec();
        friend.sort();
        friend.dedup();
        enemy.sort();
        enemy.dedup();
        Ok(ClassScheme { friend, enemy })
    }

    /// Friend = {+2}; enemy = {-1, -2}. Plain +1 relationships are left out.
    pub fn strict() -> Self {
        ClassScheme { friend: vec![Weight::VERY_GOOD], enemy: vec![Weight::VERY_BAD, Weight::BAD] }
    }

    /// Friend = {+1, +2}; enemy = {-1, -2}.
    pub fn merged() -> Self {
        ClassScheme {
            friend: vec![Weight::GOOD, Weight::VERY_GOOD],
            enemy: vec![Weight::VERY_BAD, Weight::BAD],
        }
    }

    pub fn friend_weights(&self) -> &[Weight] {
        &self.friend
    }

    pub fn enemy_weights(&self) -> &[Weight] {
        &self.enemy
    }
}

impl Default for ClassScheme {
    fn default() -> Self {
        Self::strict()
    }
}

impl FromStr for ClassScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(Self::strict()),
            "merged" => Ok(Self::merged()),
            other => Err(Error::Config(format!("unknown class scheme `{other}`"))),
        }
    }
}

/// `None` when the weight is excluded by the scheme.
pub fn label_relation(weight: Weight, scheme: &ClassScheme) -> Option<Label> {
    if scheme.friend.contains(&weight) {
        Some(Label::Friend)
    } else if scheme.enemy.contains(&weight) {
        Some(Label::Enemy)
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorSet {
    InfluenceAndTraits,
    InfluenceOnly,
    TraitsOnly,
    ProsocialityOnly,
    EmbeddingPair(Merge),
}

impl PredictorSet {
    /// Feature count; `embedding_dim` only matters for `EmbeddingPair`.
    pub fn dimension(self, embedding_dim: usize) -> usize {
        match self {
            PredictorSet::InfluenceAndTraits => 7,
            PredictorSet::InfluenceOnly => 1,
            PredictorSet::TraitsOnly => 6,
            PredictorSet::ProsocialityOnly => 2,
            PredictorSet::EmbeddingPair(m) => m.output_dim(embedding_dim),
        }
    }

    pub fn uses_influence(self) -> bool {
        matches!(self, PredictorSet::InfluenceAndTraits | PredictorSet::InfluenceOnly)
    }

    pub fn name(self) -> String {
        match self {
            PredictorSet::InfluenceAndTraits => "influence_and_traits".into(),
            PredictorSet::InfluenceOnly => "influence_only".into(),
            PredictorSet::TraitsOnly => "traits_only".into(),
            PredictorSet::ProsocialityOnly => "prosociality_only".into(),
            PredictorSet::EmbeddingPair(m) => format!("embedding_pair:{}", m.name()),
        }
    }
}

impl fmt::Display for PredictorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for PredictorSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "influence_and_traits" => PredictorSet::InfluenceAndTraits,
            "influence_only" => PredictorSet::InfluenceOnly,
            "traits_only" => PredictorSet::TraitsOnly,
            "prosociality_only" => PredictorSet::ProsocialityOnly,
            "embedding_pair" => PredictorSet::EmbeddingPair(Merge::Hadamard),
            other => match other.strip_prefix("embedding_pair:") {
                Some(m) => PredictorSet::EmbeddingPair(m.parse()?),
                None => return Err(Error::Config(format!("unknown predictor set `{other}`"))),
            },
        })
    }
}

/// Anything that carries a feature vector and a binary label.
pub trait Labeled {
    fn features(&self) -> &[f64];
    fn label(&self) -> Label;
}

/// A bare feature vector with its label.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: Label,
}

impl Labeled for Example {
    fn features(&self) -> &[f64] {
        &self.features
    }
    fn label(&self) -> Label {
        self.label
    }
}

/// One declared relationship reduced to features and a label.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationSample {
    pub src: usize,
    pub dst: usize,
    pub features: Vec<f64>,
    pub label: Label,
    pub school_id: String,
    pub course: i32,
    pub two_path_count: u32,
    pub influence: i64,
}

impl Labeled for RelationSample {
    fn features(&self) -> &[f64] {
        &self.features
    }
    fn label(&self) -> Label {
        self.label
    }
}

impl<T: Labeled> Labeled for &T {
    fn features(&self) -> &[f64] {
        (**self).features()
    }
    fn label(&self) -> Label {
        (**self).label()
    }
}

pub fn encode_gender(g: Gender) -> f64 {
    match g {
        Gender::Male => 0.0,
        Gender::Female => 1.0,
        Gender::NonBinary => 0.5,
    }
}

fn push_traits(out: &mut Vec<f64>, s: &StudentAttributes) {
    out.push(encode_gender(s.gender));
    out.push(s.crt as f64);
    out.push(s.prosociality.value());
}

/// One sample per declared edge whose weight the scheme keeps, in
/// `(src, dst)` order. Feature order: influence; src gender, crt,
/// prosociality; dst gender, crt, prosociality (subsets keep this order).
/// Influence is always computed on the full signed graph.
pub fn build_samples(
    g: &SignedDigraph,
    scheme: &ClassScheme,
    predictors: PredictorSet,
    embeddings: Option<&EmbeddingTable>,
) -> Result<Vec<RelationSample>> {
    let table = match (predictors, embeddings) {
        (PredictorSet::EmbeddingPair(_), Some(t)) => Some(t),
        (PredictorSet::EmbeddingPair(_), None) => {
            return Err(Error::Config("embedding predictors need an embedding table".into()))
        }
        (_, Some(_)) => {
            return Err(Error::Config(format!("{predictors} does not take embeddings")))
        }
        (_, None) => None,
    };
    let mut samples = Vec::new();
    for t in edge_triads(g) {
        let Some(label) = label_relation(t.weight, scheme) else { continue };
        let (a, b) = (g.student(t.src), g.student(t.dst));
        let mut f = Vec::with_capacity(predictors.dimension(table.map_or(0, |t| t.dim())));
        match predictors {
            PredictorSet::InfluenceAndTraits => {
                f.push(t.influence as f64);
                push_traits(&mut f, a);
                push_traits(&mut f, b);
            }
            PredictorSet::InfluenceOnly => f.push(t.influence as f64),
            PredictorSet::TraitsOnly => {
                push_traits(&mut f, a);
                push_traits(&mut f, b);
            }
            PredictorSet::ProsocialityOnly => {
                f.push(a.prosociality.value());
                f.push(b.prosociality.value());
            }
            PredictorSet::EmbeddingPair(merge) => {
                let table = table.expect("checked above");
                f = embed_edge(table, &a.student_id, &b.student_id, merge).map_err(|e| match e {
                    Error::UnknownNode(id) => Error::Config(format!("no embedding for `{id}`")),
                    other => other,
                })?;
            }
        }
        samples.push(RelationSample {
            src: t.src,
            dst: t.dst,
            features: f,
            label,
            school_id: a.school_id.clone(),
            course: a.course,
            two_path_count: t.two_paths,
            influence: t.influence,
        });
    }
    Ok(samples)
}

/// Splits samples into those with at least one directed 2-path between the
/// endpoints and the isolated rest.
pub fn split_by_two_paths(samples: Vec<RelationSample>) -> (Vec<RelationSample>, Vec<RelationSample>) {
    samples.into_iter().partition(|s| s.two_path_count > 0)
}

/// Train and test index sets into some sample list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn select<'a, T>(&self, items: &'a [T]) -> (Vec<&'a T>, Vec<&'a T>) {
        (
            self.train.iter().map(|&i| &items[i]).collect(),
            self.test.iter().map(|&i| &items[i]).collect(),
        )
    }
}

/// Random split with `|test| = round(test_fraction * n)`, kept within
/// `1..n` so both sides are non-empty.
pub fn random_split(n: usize, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    if n < 2 {
        return Err(Error::EmptyInput("need at least two samples to split"));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Split { train, test })
}

/// Test set = every sample whose nominator is in the given school and course.
pub fn holdout_course_split(samples: &[RelationSample], school_id: &str, course: i32) -> Result<Split> {
    let (test, train): (Vec<usize>, Vec<usize>) = (0..samples.len())
        .partition(|&i| samples[i].school_id == school_id && samples[i].course == course);
    if test.is_empty() {
        return Err(Error::NotFound(format!("no samples in school {school_id}, course {course}")));
    }
    Ok(Split { train, test })
}

/// Distinct (school, course) pairs, sorted.
pub fn course_holdouts(samples: &[RelationSample]) -> Vec<(String, i32)> {
    samples
        .iter()
        .map(|s| (s.school_id.clone(), s.course))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// `k` folds over a shuffled order; the first `n % k` folds get one extra
/// sample.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Split>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k}, need at least 2 folds")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds sample count {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut test = order[start..start + len].to_vec();
        let mut train: Vec<usize> =
            order[..start].iter().chain(&order[start + len..]).copied().collect();
        test.sort_unstable();
        train.sort_unstable();
        folds.push(Split { train, test });
        start += len;
    }
    Ok(folds)
}

/// Per-feature z-scoring fitted on training data. Constant features get a
/// unit scale so they map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn fit<S: Labeled>(samples: &[S]) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyInput("no samples to fit a scaler"))?;
        let dim = first.features().len();
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            let x = s.features();
            if x.len() != dim {
                return Err(Error::Shape { expected: dim, actual: x.len() });
            }
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for s in samples {
            for ((v, x), m) in var.iter_mut().zip(s.features()).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Shape { expected: self.dim(), actual: x.len() });
        }
        Ok(x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect())
    }
}

/// Writes `src,dst,label,two_path_count,f0..fD` with student ids.
pub fn write_samples<W: Write>(g: &SignedDigraph, samples: &[RelationSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = samples.first().map_or(0, |s| s.features.len());
    let mut header = vec!["src".to_string(), "dst".into(), "label".into(), "two_path_count".into()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for s in samples {
        let mut row = vec![
            g.student(s.src).student_id.clone(),
            g.student(s.dst).student_id.clone(),
            s.label.index().to_string(),
            s.two_path_count.to_string(),
        ];
        row.extend(s.features.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
