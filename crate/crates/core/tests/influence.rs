use proptest::prelude::*;
use triadic::graph::edge_triads;
use triadic::{
    influence_matrix, triadic_influence, two_path_count, Gender, Prosociality, SignedDigraph,
    StudentAttributes, Weight,
};

fn student(i: usize) -> StudentAttributes {
    StudentAttributes {
        student_id: format!("n{i}"),
        school_id: "x".into(),
        course: 1,
        class_group: "A".into(),
        gender: Gender::Male,
        crt: 0,
        prosociality: Prosociality::from_level(3).unwrap(),
    }
}

fn build(n: usize, adj: &[Option<i64>]) -> SignedDigraph {
    let mut g = SignedDigraph::new();
    for i in 0..n {
        g.add_student(student(i)).unwrap();
    }
    for i in 0..n {
        for j in 0..n {
            if let Some(w) = adj[i * n + j] {
                g.add_edge(i, j, Weight::new(w).unwrap()).unwrap();
            }
        }
    }
    g
}

fn dense(adj: &[Option<i64>]) -> Vec<i64> {
    adj.iter().map(|w| w.unwrap_or(0)).collect()
}

fn adjacency() -> impl Strategy<Value = (usize, Vec<Option<i64>>)> {
    (2usize..=20).prop_flat_map(|n| {
        let cell = prop_oneof![
            7 => Just(None),
            3 => prop::sample::select(vec![-2i64, -1, 1, 2]).prop_map(Some),
        ];
        (Just(n), prop::collection::vec(cell, n * n)).prop_map(|(n, mut v)| {
            for i in 0..n {
                v[i * n + i] = None;
            }
            (n, v)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn matches_path_enumeration((n, adj) in adjacency()) {
        let g = build(n, &adj);
        let w = dense(&adj);
        let m = influence_matrix(&g);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut sum = 0;
                let mut paths = 0;
                for k in 0..n {
                    if k != i && k != j && w[i * n + k] != 0 && w[k * n + j] != 0 {
                        sum += w[i * n + k] * w[k * n + j];
                        paths += 1;
                    }
                }
                prop_assert_eq!(triadic_influence(&g, i, j).unwrap(), sum);
                prop_assert_eq!(two_path_count(&g, i, j).unwrap(), paths);
                if w[i * n + j] != 0 {
                    prop_assert_eq!(m.get(&(i, j)).copied().unwrap_or(0), sum);
                }
            }
        }
        for t in edge_triads(&g) {
            prop_assert_eq!(t.influence, triadic_influence(&g, t.src, t.dst).unwrap());
            prop_assert_eq!(t.two_paths, two_path_count(&g, t.src, t.dst).unwrap());
        }
    }
}

#[test]
fn self_pair_and_unknown_node() {
    let g = build(3, &[None; 9]);
    assert!(matches!(triadic_influence(&g, 1, 1), Err(triadic::Error::SelfPair(..))));
    assert!(triadic_influence(&g, 0, 7).is_err());
}
