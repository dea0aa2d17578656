//! Synthetic networks.
//!
//! [`generate`] builds school-like networks in two stages. Nucleation seeds a
//! share of the relationships, with signs drawn from the students' traits
//! and a cohesion term for students of the same class group. Growth then
//! adds relationships one at a time, preferring triadic closure, and signs
//! each new relationship from its current triadic influence through a
//! logistic curve centered at `influence_mu`.
//!
//! [`planted_threshold_network`] and [`block_corpus`] are validation
//! fixtures with known ground truth.

use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::graph::{
    triadic_influence, two_path_count, Gender, Prosociality, SignedDigraph, StudentAttributes, Weight,
};
use crate::rng::{self, Rng};

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Friend probability from traits: `logistic(alpha (p_i + p_j) + beta +
/// cohesion * s)` with `s = +1` inside a class group and `-1` across groups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraitLogistic {
    pub alpha: f64,
    pub beta: f64,
    pub cohesion: f64,
}

impl TraitLogistic {
    /// Parameters (without cohesion) that give friend probability `p00`
    /// when both students have prosociality 0 and `p11` when both have 1.
    pub fn from_anchors(p00: f64, p11: f64) -> Self {
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let beta = logit(p00);
        TraitLogistic { alpha: (logit(p11) - beta) / 2.0, beta, cohesion: 0.0 }
    }

    pub fn friend_probability(&self, p_i: f64, p_j: f64, same_group: bool) -> f64 {
        let s = if same_group { 1.0 } else { -1.0 };
        logistic(self.alpha * (p_i + p_j) + self.beta + self.cohesion * s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_schools: usize,
    pub courses_per_school: usize,
    pub students_per_course: usize,
    /// Class groups per course.
    pub groups_per_course: usize,
    pub mean_out_degree: f64,
    /// Probabilities of prosociality 0, 1/3, 2/3, 1.
    pub prosociality_levels: [f64; 4],
    /// Probabilities of male, female, non-binary.
    pub gender: [f64; 3],
    /// Probabilities of CRT 0..=3.
    pub crt: [f64; 4],
    /// Share of each course's relationships created by nucleation.
    pub nucleation_fraction: f64,
    pub traits: TraitLogistic,
    /// Chance that a partner is drawn from the nominator's own group.
    pub within_group_bias: f64,
    /// Chance that a growth step tries to close a triad `i -> k -> j`.
    pub closure: f64,
    pub influence_mu: f64,
    pub influence_scale: f64,
    /// P(+2 | friend).
    pub strong_friend: f64,
    /// P(-2 | enemy).
    pub strong_enemy: f64,
    /// Chance of flipping each drawn sign.
    pub noise: f64,
    /// Chance that a growth step re-signs an existing relationship from its
    /// influence instead of adding one. 0 disables re-signing.
    pub resign_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_schools: 13,
            courses_per_school: 3,
            students_per_course: 87,
            groups_per_course: 3,
            mean_out_degree: 18.0,
            prosociality_levels: [0.10, 0.25, 0.40, 0.25],
            gender: [0.495, 0.495, 0.01],
            crt: [0.35, 0.30, 0.20, 0.15],
            nucleation_fraction: 0.65,
            traits: TraitLogistic { alpha: 2.0, beta: -2.37, cohesion: 3.0 },
            within_group_bias: 0.8,
            closure: 0.5,
            influence_mu: 5.0,
            influence_scale: 2.0,
            strong_friend: 0.45,
            strong_enemy: 0.40,
            noise: 0.0,
            resign_rate: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Nucleation-only network whose trait rule gives friend probability
    /// 0.30 for two fully selfish students and 0.65 for two fully prosocial
    /// ones, with no group cohesion.
    pub fn nucleation_anchored() -> Self {
        SynthConfig {
            traits: TraitLogistic::from_anchors(0.30, 0.65),
            nucleation_fraction: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let dist = |d: &[f64]| d.iter().all(|&p| p >= 0.0) && d.iter().sum::<f64>() > 0.0;
        let ok = self.n_schools >= 1
            && self.courses_per_school >= 1
            && self.students_per_course >= 2
            && self.groups_per_course >= 1
            && self.mean_out_degree > 0.0
            && self.mean_out_degree < (self.students_per_course - 1) as f64
            && dist(&self.prosociality_levels)
            && dist(&self.gender)
            && dist(&self.crt)
            && [
                self.nucleation_fraction,
                self.within_group_bias,
                self.closure,
                self.strong_friend,
                self.strong_enemy,
                self.noise,
                self.resign_rate,
            ]
            .into_iter()
            .all(prob)
            && self.resign_rate < 1.0
            && self.influence_mu.is_finite()
            && self.influence_scale.is_finite()
            && self.influence_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid generator configuration {self:?}")))
        }
    }

    fn edges_per_course(&self) -> usize {
        (self.mean_out_degree * self.students_per_course as f64).round() as usize
    }

    /// `friend` becomes a weight with the configured magnitude split.
    fn magnitude(&self, friend: bool, rng: &mut Rng) -> Weight {
        match (friend, rng.gen::<f64>()) {
            (true, u) if u < self.strong_friend => Weight::VERY_GOOD,
            (true, _) => Weight::GOOD,
            (false, u) if u < self.strong_enemy => Weight::VERY_BAD,
            (false, _) => Weight::BAD,
        }
    }

    /// Draws a sign with friend probability `p`, flipped with prob `noise`.
    fn draw_weight(&self, p: f64, rng: &mut Rng) -> Weight {
        let mut friend = rng.gen::<f64>() < p;
        if self.noise > 0.0 && rng.gen::<f64>() < self.noise {
            friend = !friend;
        }
        self.magnitude(friend, rng)
    }

    pub fn influence_friend_probability(&self, influence: i64) -> f64 {
        logistic((influence as f64 - self.influence_mu) / self.influence_scale)
    }
}

/// Node indexes of one course with their class groups.
#[derive(Clone, Debug)]
pub struct Course {
    pub members: Vec<usize>,
    /// Members of each group.
    pub groups: Vec<Vec<usize>>,
    /// Group number per member, aligned with `members`.
    group_of: Vec<usize>,
}

impl Course {
    fn group(&self, node: usize) -> usize {
        let pos = self.members.binary_search(&node).expect("member of course");
        self.group_of[pos]
    }

    /// Partner for `i`: from its group with probability `bias`, otherwise
    /// anyone in the course.
    fn partner(&self, i: usize, bias: f64, rng: &mut Rng) -> usize {
        let pool = if rng.gen::<f64>() < bias { &self.groups[self.group(i)] } else { &self.members };
        *pool.choose(rng).expect("non-empty pool")
    }

    /// All courses of a graph, keyed by (school, course), with groups from
    /// the `class_group` attribute.
    pub fn all(g: &SignedDigraph) -> Vec<Course> {
        use std::collections::BTreeMap;
        let mut by_course: BTreeMap<(String, i32), BTreeMap<String, Vec<usize>>> = BTreeMap::new();
        for (i, s) in g.students().iter().enumerate() {
            by_course
                .entry((s.school_id.clone(), s.course))
                .or_default()
                .entry(s.class_group.clone())
                .or_default()
                .push(i);
        }
        by_course
            .into_values()
            .map(|groups| {
                let mut tagged: Vec<(usize, usize)> = groups
                    .values()
                    .enumerate()
                    .flat_map(|(gi, m)| m.iter().map(move |&i| (i, gi)))
                    .collect();
                tagged.sort_unstable();
                Course {
                    members: tagged.iter().map(|t| t.0).collect(),
                    group_of: tagged.iter().map(|t| t.1).collect(),
                    groups: groups.into_values().collect(),
                }
            })
            .collect()
    }
}

fn trait_probability(g: &SignedDigraph, cfg: &SynthConfig, course: &Course, i: usize, j: usize) -> f64 {
    cfg.traits.friend_probability(
        g.student(i).prosociality.value(),
        g.student(j).prosociality.value(),
        course.group(i) == course.group(j),
    )
}

fn draw<const N: usize>(probs: &[f64; N], rng: &mut Rng) -> usize {
    WeightedIndex::new(probs.iter().copied()).expect("validated distribution").sample(rng)
}

fn sample_students(g: &mut SignedDigraph, cfg: &SynthConfig, school: usize, rng: &mut Rng) -> Result<Vec<Course>> {
    let mut courses = Vec::new();
    for c in 1..=cfg.courses_per_school {
        let n = cfg.students_per_course;
        let mut group_ids: Vec<usize> = (0..n).map(|k| k % cfg.groups_per_course).collect();
        group_ids.shuffle(rng);
        let mut members = Vec::with_capacity(n);
        for (k, &grp) in group_ids.iter().enumerate() {
            let gender = [Gender::Male, Gender::Female, Gender::NonBinary][draw(&cfg.gender, rng)];
            let idx = g.add_student(StudentAttributes {
                student_id: format!("s{school}c{c}n{k}"),
                school_id: format!("school{school}"),
                course: c as i32,
                class_group: format!("g{grp}"),
                gender,
                crt: draw(&cfg.crt, rng) as u8,
                prosociality: Prosociality::from_level(draw(&cfg.prosociality_levels, rng) as u8)?,
            })?;
            members.push(idx);
        }
        let mut groups = vec![Vec::new(); cfg.groups_per_course];
        for (&m, &grp) in members.iter().zip(&group_ids) {
            groups[grp].push(m);
        }
        courses.push(Course { members, groups, group_of: group_ids });
    }
    Ok(courses)
}

fn attempts_exhausted(what: &str) -> Error {
    Error::Config(format!("could not place {what}: course too dense for the requested degree"))
}

/// Adds `count` nucleation relationships inside `course`.
fn nucleate_course(g: &mut SignedDigraph, cfg: &SynthConfig, course: &Course, count: usize, rng: &mut Rng) -> Result<()> {
    let mut placed = 0;
    let mut attempts = 0usize;
    while placed < count {
        attempts += 1;
        if attempts > 1000 * (count + 10) {
            return Err(attempts_exhausted("nucleation relationships"));
        }
        let i = *course.members.choose(rng).expect("non-empty course");
        let j = course.partner(i, cfg.within_group_bias, rng);
        if i == j || g.weight(i, j).is_some() {
            continue;
        }
        let w = cfg.draw_weight(trait_probability(g, cfg, course, i, j), rng);
        g.add_edge(i, j, w)?;
        placed += 1;
    }
    Ok(())
}

/// What one growth step did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Added { src: usize, dst: usize, weight: Weight },
    Resigned { src: usize, dst: usize, weight: Weight },
    /// The drawn pair was unusable (self pair or existing relationship).
    Skipped,
}

/// One growth step inside `course`: draws an ordered pair, closing a triad
/// with probability `closure`, and signs it with probability
/// `logistic((I - mu) / s)` of being a friend. Pairs without any directed
/// 2-path fall back to the trait rule.
pub fn evolve_step(g: &mut SignedDigraph, cfg: &SynthConfig, course: &Course, rng: &mut Rng) -> Result<StepOutcome> {
    let i = *course.members.choose(rng).expect("non-empty course");
    if cfg.resign_rate > 0.0 && rng.gen::<f64>() < cfg.resign_rate {
        let Some(&(j, _)) = g.out_edges(i).choose(rng) else { return Ok(StepOutcome::Skipped) };
        let p = cfg.influence_friend_probability(triadic_influence(g, i, j)?);
        let weight = cfg.draw_weight(p, rng);
        g.set_weight(i, j, weight)?;
        return Ok(StepOutcome::Resigned { src: i, dst: j, weight });
    }
    let mut j = None;
    if rng.gen::<f64>() < cfg.closure {
        if let Some(&(k, _)) = g.out_edges(i).choose(rng) {
            j = g.out_edges(k).choose(rng).map(|e| e.0);
        }
    }
    let j = j.unwrap_or_else(|| course.partner(i, cfg.within_group_bias, rng));
    if i == j || g.weight(i, j).is_some() {
        return Ok(StepOutcome::Skipped);
    }
    let p = if two_path_count(g, i, j)? == 0 {
        trait_probability(g, cfg, course, i, j)
    } else {
        cfg.influence_friend_probability(triadic_influence(g, i, j)?)
    };
    let weight = cfg.draw_weight(p, rng);
    g.add_edge(i, j, weight)?;
    Ok(StepOutcome::Added { src: i, dst: j, weight })
}

fn school(cfg: &SynthConfig, s: usize, grow: bool) -> Result<SignedDigraph> {
    let mut rng = rng::stream(cfg.seed, s as u64);
    let mut g = SignedDigraph::new();
    let courses = sample_students(&mut g, cfg, s, &mut rng)?;
    let target = cfg.edges_per_course();
    let nucleated = ((cfg.nucleation_fraction * target as f64).floor() as usize).min(target);
    for course in &courses {
        nucleate_course(&mut g, cfg, course, nucleated, &mut rng)?;
    }
    if grow {
        for course in &courses {
            let mut added = nucleated;
            let mut steps = 0usize;
            while added < target {
                steps += 1;
                if steps > 1000 * (target + 10) {
                    return Err(attempts_exhausted("growth relationships"));
                }
                if let StepOutcome::Added { .. } = evolve_step(&mut g, cfg, course, &mut rng)? {
                    added += 1;
                }
            }
        }
    }
    Ok(g)
}

fn merge(parts: Vec<SignedDigraph>) -> Result<SignedDigraph> {
    let mut g = SignedDigraph::new();
    for part in parts {
        let offset = g.node_count();
        for s in part.students() {
            g.add_student(s.clone())?;
        }
        for e in part.edges() {
            g.add_edge(e.src + offset, e.dst + offset, e.weight)?;
        }
    }
    Ok(g)
}

fn build(cfg: &SynthConfig, grow: bool) -> Result<SignedDigraph> {
    cfg.validate()?;
    let parts = (0..cfg.n_schools).into_par_iter().map(|s| school(cfg, s, grow)).collect::<Result<Vec<_>>>()?;
    merge(parts)
}

/// Students of every school plus the nucleation relationships only. All
/// relationships stay inside a course.
pub fn nucleate(cfg: &SynthConfig) -> Result<SignedDigraph> {
    build(cfg, false)
}

/// Full nucleation and growth. Schools are generated in parallel, each from
/// its own random stream, so the result depends only on the configuration.
pub fn generate(cfg: &SynthConfig) -> Result<SignedDigraph> {
    build(cfg, true)
}

/// Ground truth of one planted relationship.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantedEdge {
    pub src: usize,
    pub dst: usize,
    pub influence: i64,
    /// `Friend` iff influence exceeds the threshold.
    pub truth: Label,
    /// `truth` after random flips; this is what the graph declares.
    pub label: Label,
}

#[derive(Clone, Debug)]
pub struct Planted {
    pub graph: SignedDigraph,
    pub edges: Vec<PlantedEdge>,
}

/// Three layers A, B, C with scaffold relationships A -> B and B -> C and
/// labeled relationships A -> C. A labeled relationship is never part of a
/// 2-path (nothing points into A and nothing leaves C), so its own weight
/// does not disturb any influence. Its label is friend iff its influence
/// exceeds `theta`, flipped with probability `eta`; friends are declared as
/// +2 and enemies as -1 or -2, so the strict class scheme reads the labels
/// back. Every labeled pair has at least one 2-path; the scaffold pairs have
/// none.
pub fn planted_threshold_network(n: usize, theta: f64, eta: f64, seed: u64) -> Result<Planted> {
    if n < 10 {
        return Err(Error::InvalidArgument(format!("planted network needs n >= 10, got {n}")));
    }
    if !(0.0..0.5).contains(&eta) {
        return Err(Error::InvalidArgument(format!("flip rate {eta} not in [0, 0.5)")));
    }
    let mut rng = rng::seeded(seed);
    let mut g = SignedDigraph::new();
    let third = n / 3;
    let layers = [(0, third), (third, 2 * third), (2 * third, n)];
    for (name, &(lo, hi)) in ["A", "B", "C"].iter().zip(&layers) {
        for k in lo..hi {
            g.add_student(StudentAttributes {
                student_id: format!("p{k}"),
                school_id: "planted".into(),
                course: 1,
                class_group: name.to_string(),
                gender: if rng.gen() { Gender::Male } else { Gender::Female },
                crt: rng.gen_range(0..=3),
                prosociality: Prosociality::from_level(rng.gen_range(0..=3))?,
            })?;
        }
    }
    let scaffold_weight = |rng: &mut Rng| {
        let friend = rng.gen::<f64>() < 0.7;
        let strong = rng.gen::<bool>();
        match (friend, strong) {
            (true, true) => Weight::VERY_GOOD,
            (true, false) => Weight::GOOD,
            (false, true) => Weight::VERY_BAD,
            (false, false) => Weight::BAD,
        }
    };
    let b_nodes: Vec<usize> = (layers[1].0..layers[1].1).collect();
    let link_prob = 0.4;
    for a in layers[0].0..layers[0].1 {
        for &b in &b_nodes {
            if rng.gen::<f64>() < link_prob {
                let w = scaffold_weight(&mut rng);
                g.add_edge(a, b, w)?;
            }
        }
    }
    for &b in &b_nodes {
        for c in layers[2].0..layers[2].1 {
            if rng.gen::<f64>() < link_prob {
                let w = scaffold_weight(&mut rng);
                g.add_edge(b, c, w)?;
            }
        }
    }
    let mut edges = Vec::new();
    for a in layers[0].0..layers[0].1 {
        for c in layers[2].0..layers[2].1 {
            if two_path_count(&g, a, c)? == 0 {
                continue;
            }
            let influence = triadic_influence(&g, a, c)?;
            let truth = if influence as f64 > theta { Label::Friend } else { Label::Enemy };
            let label = if rng.gen::<f64>() < eta { truth.other() } else { truth };
            edges.push(PlantedEdge { src: a, dst: c, influence, truth, label });
        }
    }
    for e in &edges {
        let w = match e.label {
            Label::Friend => Weight::VERY_GOOD,
            Label::Enemy if rng.gen::<bool>() => Weight::BAD,
            Label::Enemy => Weight::VERY_BAD,
        };
        g.add_edge(e.src, e.dst, w)?;
    }
    Ok(Planted { graph: g, edges })
}

/// Sidecar CSV `src,dst,influence,true_label,label` for planted fixtures.
pub fn write_ground_truth<W: Write>(p: &Planted, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["src", "dst", "influence", "true_label", "label"])?;
    for e in &p.edges {
        w.write_record([
            p.graph.student(e.src).student_id.clone(),
            p.graph.student(e.dst).student_id.clone(),
            e.influence.to_string(),
            e.truth.index().to_string(),
            e.label.index().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Corpus where each course splits into dense blocks and each course has
/// its own random friend/enemy pattern between blocks. A classifier can
/// learn a course's pattern from some of its relationships, but the pattern
/// of an unseen course is unrelated to the others.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub n_schools: usize,
    pub courses_per_school: usize,
    pub blocks: usize,
    pub block_size: usize,
    /// Relationship probability inside a block and across blocks.
    pub p_in: f64,
    pub p_out: f64,
    /// Chance that a relationship's sign disagrees with its block pattern.
    pub noise: f64,
    pub seed: u64,
}

impl Default for BlockConfig {
    fn default() -> Self {
        BlockConfig {
            n_schools: 6,
            courses_per_school: 1,
            blocks: 4,
            block_size: 15,
            p_in: 0.5,
            p_out: 0.1,
            noise: 0.05,
            seed: 0,
        }
    }
}

pub fn block_corpus(cfg: &BlockConfig) -> Result<SignedDigraph> {
    if cfg.blocks == 0 || cfg.block_size < 2 || cfg.n_schools == 0 || cfg.courses_per_school == 0 {
        return Err(Error::Config(format!("invalid block configuration {cfg:?}")));
    }
    let mut rng = rng::seeded(cfg.seed);
    let mut g = SignedDigraph::new();
    for s in 0..cfg.n_schools {
        for c in 1..=cfg.courses_per_school {
            let pattern: Vec<bool> = (0..cfg.blocks * cfg.blocks).map(|_| rng.gen()).collect();
            let mut nodes = Vec::new();
            for b in 0..cfg.blocks {
                for k in 0..cfg.block_size {
                    let idx = g.add_student(StudentAttributes {
                        student_id: format!("b{s}c{c}k{b}n{k}"),
                        school_id: format!("school{s}"),
                        course: c as i32,
                        class_group: format!("k{b}"),
                        gender: if rng.gen() { Gender::Male } else { Gender::Female },
                        crt: rng.gen_range(0..=3),
                        prosociality: Prosociality::from_level(rng.gen_range(0..=3))?,
                    })?;
                    nodes.push((idx, b));
                }
            }
            for &(i, bi) in &nodes {
                for &(j, bj) in &nodes {
                    let p = if bi == bj { cfg.p_in } else { cfg.p_out };
                    if i == j || rng.gen::<f64>() >= p {
                        continue;
                    }
                    let mut friend = pattern[bi * cfg.blocks + bj];
                    if rng.gen::<f64>() < cfg.noise {
                        friend = !friend;
                    }
                    let strong = rng.gen::<bool>();
                    let w = match (friend, strong) {
                        (true, true) => Weight::VERY_GOOD,
                        (true, false) => Weight::GOOD,
                        (false, true) => Weight::VERY_BAD,
                        (false, false) => Weight::BAD,
                    };
                    g.add_edge(i, j, w)?;
                }
            }
        }
    }
    Ok(g)
}
