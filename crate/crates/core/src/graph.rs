//! Signed, weighted, directed relationship graph with per-student attributes.
//!
//! Weights live in {-2, -1, +1, +2}; the absence of an edge encodes 0. Edges
//! are kept in two sorted adjacency indexes (out- and in-neighbors) so that
//! directed 2-path sums can be computed by merging neighbor lists instead of
//! multiplying dense matrices.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declared relationship strength.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct Weight(i8);

impl Weight {
    pub const VERY_BAD: Weight = Weight(-2);
    pub const BAD: Weight = Weight(-1);
    pub const GOOD: Weight = Weight(1);
    pub const VERY_GOOD: Weight = Weight(2);
    pub const ALL: [Weight; 4] = [Self::VERY_BAD, Self::BAD, Self::GOOD, Self::VERY_GOOD];

    pub fn new(value: i64) -> Result<Self> {
        match value {
            -2 | -1 | 1 | 2 => Ok(Weight(value as i8)),
            other => Err(Error::InvalidWeight(other)),
        }
    }

    pub fn get(self) -> i64 {
        self.0 as i64
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

impl TryFrom<i64> for Weight {
    type Error = Error;
    fn try_from(value: i64) -> Result<Self> {
        Weight::new(value)
    }
}

impl From<Weight> for i64 {
    fn from(w: Weight) -> i64 {
        w.get()
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
    NonBinary,
}

impl Gender {
    pub fn code(self) -> &'static str {
        match self {
            Gender::Male => "M",
            Gender::Female => "F",
            Gender::NonBinary => "NB",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "M" => Some(Gender::Male),
            "F" => Some(Gender::Female),
            "NB" => Some(Gender::NonBinary),
            _ => None,
        }
    }
}

/// Prosociality index `1 - s/3`, where `s` counts selfish answers to the
/// three allocation questions. Stored as the level `3 - s` so the value set
/// {0, 1/3, 2/3, 1} is exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Prosociality(u8);

impl Prosociality {
    pub const LEVELS: [Prosociality; 4] =
        [Prosociality(0), Prosociality(1), Prosociality(2), Prosociality(3)];

    pub fn from_answers(q1: bool, q2: bool, q3: bool) -> Self {
        let selfish = q1 as u8 + q2 as u8 + q3 as u8;
        Prosociality(3 - selfish)
    }

    pub fn from_level(level: u8) -> Result<Self> {
        if level <= 3 {
            Ok(Prosociality(level))
        } else {
            Err(Error::Validation(format!("prosociality level {level} outside 0..=3")))
        }
    }

    /// Accepts values within 1e-9 of 0, 1/3, 2/3 or 1.
    pub fn from_value(value: f64) -> Result<Self> {
        let level = (value * 3.0).round();
        if (0.0..=3.0).contains(&level) && (value - level / 3.0).abs() <= 1e-9 {
            Ok(Prosociality(level as u8))
        } else {
            Err(Error::Validation(format!("prosociality {value} is not one of 0, 1/3, 2/3, 1")))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn selfish_answers(self) -> u8 {
        3 - self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 3.0
    }
}

/// `p = 1 - (q1 + q2 + q3) / 3` for selfish answers `q`.
pub fn prosociality_score(q1: bool, q2: bool, q3: bool) -> f64 {
    Prosociality::from_answers(q1, q2, q3).value()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudentAttributes {
    pub student_id: String,
    pub school_id: String,
    pub course: i32,
    pub class_group: String,
    pub gender: Gender,
    /// Cognitive reflection score, 0..=3.
    pub crt: u8,
    pub prosociality: Prosociality,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: Weight,
}

/// Directed signed graph over dense node indexes `0..node_count()`.
#[derive(Clone, Debug, Default)]
pub struct SignedDigraph {
    students: Vec<StudentAttributes>,
    index: HashMap<String, usize>,
    out: Vec<Vec<(usize, Weight)>>,
    inn: Vec<Vec<(usize, Weight)>>,
    n_edges: usize,
}

impl SignedDigraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_student(&mut self, attrs: StudentAttributes) -> Result<usize> {
        if attrs.crt > 3 {
            return Err(Error::Validation(format!(
                "student {}: crt {} outside 0..=3",
                attrs.student_id, attrs.crt
            )));
        }
        if self.index.contains_key(&attrs.student_id) {
            return Err(Error::Validation(format!("duplicate student id {}", attrs.student_id)));
        }
        let idx = self.students.len();
        self.index.insert(attrs.student_id.clone(), idx);
        self.students.push(attrs);
        self.out.push(Vec::new());
        self.inn.push(Vec::new());
        Ok(idx)
    }

    pub fn add_edge(&mut self, src: usize, dst: usize, weight: Weight) -> Result<()> {
        self.require(src)?;
        self.require(dst)?;
        if src == dst {
            return Err(Error::Validation(format!(
                "self-loop on {}",
                self.students[src].student_id
            )));
        }
        let pos = match self.out[src].binary_search_by_key(&dst, |&(n, _)| n) {
            Ok(_) => {
                return Err(Error::Validation(format!(
                    "duplicate relationship {} -> {}",
                    self.students[src].student_id, self.students[dst].student_id
                )))
            }
            Err(pos) => pos,
        };
        self.out[src].insert(pos, (dst, weight));
        let pos = self.inn[dst].binary_search_by_key(&src, |&(n, _)| n).unwrap_err();
        self.inn[dst].insert(pos, (src, weight));
        self.n_edges += 1;
        Ok(())
    }

    /// Changes the weight of an existing edge.
    pub fn set_weight(&mut self, src: usize, dst: usize, weight: Weight) -> Result<()> {
        self.require(src)?;
        self.require(dst)?;
        let pos = self.out[src]
            .binary_search_by_key(&dst, |&(n, _)| n)
            .map_err(|_| Error::NotFound(format!("edge {src} -> {dst}")))?;
        self.out[src][pos].1 = weight;
        let pos = self.inn[dst].binary_search_by_key(&src, |&(n, _)| n).expect("in-index in sync");
        self.inn[dst][pos].1 = weight;
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.students.len()
    }

    pub fn edge_count(&self) -> usize {
        self.n_edges
    }

    pub fn student(&self, idx: usize) -> &StudentAttributes {
        &self.students[idx]
    }

    pub fn students(&self) -> &[StudentAttributes] {
        &self.students
    }

    pub fn index_of(&self, student_id: &str) -> Option<usize> {
        self.index.get(student_id).copied()
    }

    pub fn require(&self, idx: usize) -> Result<()> {
        if idx < self.students.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(idx.to_string()))
        }
    }

    pub fn weight(&self, src: usize, dst: usize) -> Option<Weight> {
        let list = self.out.get(src)?;
        list.binary_search_by_key(&dst, |&(n, _)| n).ok().map(|p| list[p].1)
    }

    /// Out-neighbors of `idx`, sorted by target index.
    pub fn out_edges(&self, idx: usize) -> &[(usize, Weight)] {
        &self.out[idx]
    }

    /// In-neighbors of `idx`, sorted by source index.
    pub fn in_edges(&self, idx: usize) -> &[(usize, Weight)] {
        &self.inn[idx]
    }

    /// All edges ordered by `(src, dst)`.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.out.iter().enumerate().flat_map(|(src, list)| {
            list.iter().map(move |&(dst, weight)| Edge { src, dst, weight })
        })
    }

    /// Subgraph induced by the students that satisfy `keep`, re-indexed in
    /// their original order.
    pub fn restrict<F>(&self, keep: F) -> SignedDigraph
    where
        F: Fn(&StudentAttributes) -> bool,
    {
        let mut sub = SignedDigraph::new();
        let mut remap = vec![usize::MAX; self.node_count()];
        for (i, s) in self.students.iter().enumerate() {
            if keep(s) {
                remap[i] = sub.add_student(s.clone()).expect("ids unique in parent");
            }
        }
        for e in self.edges() {
            let (a, b) = (remap[e.src], remap[e.dst]);
            if a != usize::MAX && b != usize::MAX {
                sub.add_edge(a, b, e.weight).expect("edge valid in parent");
            }
        }
        sub
    }

    /// Distinct school ids in first-appearance order.
    pub fn school_ids(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for s in &self.students {
            if !seen.contains(&s.school_id) {
                seen.push(s.school_id.clone());
            }
        }
        seen
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        self.require(i)?;
        self.require(j)?;
        if i == j {
            return Err(Error::SelfPair(i));
        }
        Ok(())
    }

    /// Calls `f(w_ik, w_kj)` for every middle node `k` of a directed 2-path
    /// `i -> k -> j`, merging the sorted out-list of `i` with the in-list of `j`.
    fn for_each_two_path<F: FnMut(Weight, Weight)>(&self, i: usize, j: usize, mut f: F) {
        let (a, b) = (&self.out[i], &self.inn[j]);
        let (mut x, mut y) = (0, 0);
        while x < a.len() && y < b.len() {
            match a[x].0.cmp(&b[y].0) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    f(a[x].1, b[y].1);
                    x += 1;
                    y += 1;
                }
            }
        }
    }
}

/// `I_ij = sum_k w_ik * w_kj` over directed 2-paths `i -> k -> j`.
pub fn triadic_influence(g: &SignedDigraph, i: usize, j: usize) -> Result<i64> {
    g.check_pair(i, j)?;
    let mut total = 0;
    g.for_each_two_path(i, j, |a, b| total += a.get() * b.get());
    Ok(total)
}

/// Number of middle nodes `k` with `i -> k` and `k -> j`, ignoring weights.
pub fn two_path_count(g: &SignedDigraph, i: usize, j: usize) -> Result<u32> {
    g.check_pair(i, j)?;
    let mut n = 0;
    g.for_each_two_path(i, j, |_, _| n += 1);
    Ok(n)
}

/// Triadic influence and 2-path count of one declared edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeTriad {
    pub src: usize,
    pub dst: usize,
    pub weight: Weight,
    pub influence: i64,
    pub two_paths: u32,
}

/// Influence and 2-path counts for every declared edge, in `(src, dst)` order.
///
/// Traverses middle nodes: for each `k`, every pair of an in-edge `i -> k`
/// and an out-edge `k -> j` contributes to `(i, j)` when that edge is
/// declared. Cost is `O(sum_k indeg(k) * outdeg(k) * log deg)`.
pub fn edge_triads(g: &SignedDigraph) -> Vec<EdgeTriad> {
    let n = g.node_count();
    let mut offset = Vec::with_capacity(n + 1);
    let mut acc = 0;
    for i in 0..n {
        offset.push(acc);
        acc += g.out[i].len();
    }
    let mut influence = vec![0i64; acc];
    let mut paths = vec![0u32; acc];
    for k in 0..n {
        for &(i, w_ik) in &g.inn[k] {
            let out_i = &g.out[i];
            for &(j, w_kj) in &g.out[k] {
                if i == j {
                    continue;
                }
                if let Ok(p) = out_i.binary_search_by_key(&j, |&(t, _)| t) {
                    influence[offset[i] + p] += w_ik.get() * w_kj.get();
                    paths[offset[i] + p] += 1;
                }
            }
        }
    }
    g.edges()
        .enumerate()
        .map(|(slot, e)| EdgeTriad {
            src: e.src,
            dst: e.dst,
            weight: e.weight,
            influence: influence[slot],
            two_paths: paths[slot],
        })
        .collect()
}

/// Triadic influence of every declared edge.
pub fn influence_matrix(g: &SignedDigraph) -> BTreeMap<(usize, usize), i64> {
    edge_triads(g).into_iter().map(|t| ((t.src, t.dst), t.influence)).collect()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn student(id: &str, p: u8) -> StudentAttributes {
        StudentAttributes {
            student_id: id.to_string(),
            school_id: "s1".into(),
            course: 1,
            class_group: "A".into(),
            gender: Gender::Female,
            crt: 1,
            prosociality: Prosociality::from_level(p).unwrap(),
        }
    }

    /// Graph with nodes 0..n named "0".."n-1" and the given edges.
    pub fn graph(n: usize, edges: &[(usize, usize, i64)]) -> SignedDigraph {
        let mut g = SignedDigraph::new();
        for i in 0..n {
            g.add_student(student(&i.to_string(), 2)).unwrap();
        }
        for &(a, b, w) in edges {
            g.add_edge(a, b, Weight::new(w).unwrap()).unwrap();
        }
        g
    }

    /// The seven-node diagram: the 0 -> 1 influence flows through 5 and 6;
    /// node 3 is reached from both 0 and 1 and so is not on a directed path.
    pub fn diagram() -> SignedDigraph {
        graph(
            7,
            &[
                (0, 1, 2),
                (0, 5, 2),
                (5, 1, 2),
                (0, 6, -1),
                (6, 1, 2),
                (0, 3, 1),
                (1, 3, -2),
                (2, 0, 1),
                (4, 1, -1),
                (1, 4, 1),
            ],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn prosociality_formula() {
        assert_eq!(prosociality_score(true, true, true), 0.0);
        assert_eq!(prosociality_score(false, false, false), 1.0);
        assert!((prosociality_score(true, false, false) - 2.0 / 3.0).abs() < 1e-15);
        assert!(Prosociality::from_value(0.3333333333).is_ok());
        assert!(Prosociality::from_value(0.5).is_err());
    }

    #[test]
    fn weight_domain() {
        assert!(Weight::new(0).is_err());
        assert!(Weight::new(3).is_err());
        assert_eq!(Weight::new(-2).unwrap(), Weight::VERY_BAD);
    }

    #[test]
    fn diagram_influence() {
        let g = diagram();
        assert_eq!(triadic_influence(&g, 0, 1).unwrap(), 2);
        assert_eq!(two_path_count(&g, 0, 1).unwrap(), 2);
        assert_eq!(influence_matrix(&g)[&(0, 1)], 2);
    }

    #[test]
    fn no_two_path_is_zero() {
        let g = graph(3, &[(0, 1, 2)]);
        assert_eq!(triadic_influence(&g, 0, 1).unwrap(), 0);
        assert_eq!(two_path_count(&g, 0, 2).unwrap(), 0);
        let m = influence_matrix(&g);
        assert_eq!(m.len(), 1);
        assert_eq!(m[&(0, 1)], 0);
    }

    #[test]
    fn asymmetric_witness() {
        // 0 -> 2 -> 1 exists, 1 -> ? -> 0 does not.
        let g = graph(3, &[(0, 2, 2), (2, 1, 1)]);
        assert_eq!(triadic_influence(&g, 0, 1).unwrap(), 2);
        assert_eq!(triadic_influence(&g, 1, 0).unwrap(), 0);
    }

    #[test]
    fn errors() {
        let g = graph(2, &[(0, 1, 1)]);
        assert!(matches!(triadic_influence(&g, 0, 7), Err(Error::UnknownNode(_))));
        assert!(matches!(two_path_count(&g, 1, 1), Err(Error::SelfPair(1))));
        let mut g = g;
        assert!(g.add_edge(0, 1, Weight::GOOD).is_err());
        assert!(g.add_edge(0, 0, Weight::GOOD).is_err());
        assert!(g.add_edge(0, 9, Weight::GOOD).is_err());
    }

    #[test]
    fn restrict_keeps_internal_edges() {
        let mut g = diagram();
        g.add_student(StudentAttributes { school_id: "s2".into(), ..student("x", 1) }).unwrap();
        let x = g.index_of("x").unwrap();
        g.add_edge(x, 0, Weight::GOOD).unwrap();
        let sub = g.restrict(|s| s.school_id == "s1");
        assert_eq!(sub.node_count(), 7);
        assert_eq!(sub.edge_count(), 10);
        assert_eq!(g.school_ids(), vec!["s1".to_string(), "s2".to_string()]);
    }

    #[test]
    fn set_weight_updates_both_indexes() {
        let mut g = diagram();
        g.set_weight(0, 5, Weight::VERY_BAD).unwrap();
        assert_eq!(g.weight(0, 5), Some(Weight::VERY_BAD));
        assert_eq!(triadic_influence(&g, 0, 1).unwrap(), -4 - 2);
        assert!(g.set_weight(1, 0, Weight::GOOD).is_err());
    }
}
