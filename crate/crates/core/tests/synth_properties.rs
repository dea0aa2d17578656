use std::collections::BTreeMap;

use triadic::dataset::{build_samples, split_by_two_paths, ClassScheme, PredictorSet};
use triadic::stats::{mean_nominations_by_prosociality, relation_type_distribution, Direction, Sign};
use triadic::synth::{generate, nucleate, planted_threshold_network, Course, SynthConfig};
use triadic::{triadic_influence, SignedDigraph};

fn small(seed: u64) -> SynthConfig {
    SynthConfig { n_schools: 4, seed, ..SynthConfig::default() }
}

fn isolated_fraction(g: &SignedDigraph) -> f64 {
    let all = build_samples(g, &ClassScheme::merged(), PredictorSet::InfluenceOnly, None).unwrap();
    let n = all.len() as f64;
    split_by_two_paths(all).1.len() as f64 / n
}

#[test]
fn relation_types_order() {
    let d = relation_type_distribution(&generate(&small(3)).unwrap()).unwrap();
    assert!(d[&1] > d[&2] && d[&2] > d[&-1] && d[&-1] > d[&-2], "{d:?}");
}

#[test]
fn nominations_follow_prosociality() {
    let g = generate(&small(5)).unwrap();
    let means = |sign| -> Vec<f64> {
        mean_nominations_by_prosociality(&g, sign, Direction::Out).unwrap().values().map(|v| v.0).collect()
    };
    let friends = means(Sign::Positive);
    let enemies = means(Sign::Negative);
    assert!(friends.windows(2).all(|w| w[0] < w[1]), "{friends:?}");
    assert!(enemies.windows(2).all(|w| w[0] > w[1]), "{enemies:?}");
}

#[test]
fn isolated_fraction_over_twenty_schools() {
    let g = generate(&SynthConfig { n_schools: 20, seed: 11, ..SynthConfig::default() }).unwrap();
    let f = isolated_fraction(&g);
    assert!((0.01..=0.05).contains(&f), "isolated fraction {f}");
}

#[test]
fn deterministic_and_course_bound() {
    let cfg = SynthConfig { n_schools: 2, ..small(9) };
    let (a, b) = (generate(&cfg).unwrap(), generate(&cfg).unwrap());
    assert_eq!(a.edges().collect::<Vec<_>>(), b.edges().collect::<Vec<_>>());
    for e in a.edges() {
        let (s, d) = (a.student(e.src), a.student(e.dst));
        assert_eq!((&s.school_id, s.course), (&d.school_id, d.course));
    }
    assert_eq!(Course::all(&a).len(), 6);
}

#[test]
fn anchored_nucleation_matches_anchors() {
    let g = nucleate(&SynthConfig { n_schools: 6, ..SynthConfig::nucleation_anchored() }).unwrap();
    let mut tally: BTreeMap<(u8, u8), (usize, usize)> = BTreeMap::new();
    for e in g.edges() {
        let key = (g.student(e.src).prosociality.level(), g.student(e.dst).prosociality.level());
        let t = tally.entry(key).or_default();
        t.0 += usize::from(e.weight.is_positive());
        t.1 += 1;
    }
    let share = |k| {
        let (f, n) = tally[&k];
        f as f64 / n as f64
    };
    assert!((share((0, 0)) - 0.30).abs() < 0.07, "{}", share((0, 0)));
    assert!((share((3, 3)) - 0.65).abs() < 0.07, "{}", share((3, 3)));
}

#[test]
fn planted_labels_follow_threshold() {
    let p = planted_threshold_network(200, 5.0, 0.0, 4).unwrap();
    assert!(!p.edges.is_empty());
    for e in &p.edges {
        assert_eq!(triadic_influence(&p.graph, e.src, e.dst).unwrap(), e.influence);
        assert_eq!(e.label, e.truth);
        assert_eq!(e.truth == triadic::dataset::Label::Friend, e.influence as f64 > 5.0);
    }
    let (connected, _) = split_by_two_paths(
        build_samples(&p.graph, &ClassScheme::strict(), PredictorSet::InfluenceOnly, None).unwrap(),
    );
    assert_eq!(connected.len(), p.edges.len());
}
