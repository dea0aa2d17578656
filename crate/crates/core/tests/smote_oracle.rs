use proptest::prelude::*;
use triadic::embedding::{balance_with_smote, smote};

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Residual of `s` against the segment `a -> b`, with the interpolation
/// coefficient recovered by projection.
fn segment_residual(s: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let u = if len2 == 0.0 {
        0.0
    } else {
        (s.iter().zip(a).zip(&ab).map(|((s, a), d)| (s - a) * d).sum::<f64>() / len2).clamp(0.0, 1.0)
    };
    let rebuilt: Vec<f64> = a.iter().zip(&ab).map(|(x, d)| x + u * d).collect();
    dist2(s, &rebuilt).sqrt()
}

fn knn(points: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..points.len()).filter(|&j| j != i).collect();
    others.sort_by(|&x, &y| dist2(&points[i], &points[x]).total_cmp(&dist2(&points[i], &points[y])));
    let cut = dist2(&points[i], &points[others[k - 1]]);
    // ties at the k-th distance are all admissible neighbours
    others.into_iter().filter(|&j| dist2(&points[i], &points[j]) <= cut).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn synthetic_points_lie_on_neighbour_segments(
        points in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 6..30),
        k in 1usize..5,
        extra in 1usize..40,
        seed: u64,
    ) {
        let out = smote(&points, k, extra, seed).unwrap();
        prop_assert_eq!(out.len(), extra);
        for s in &out {
            let best = (0..points.len())
                .flat_map(|i| knn(&points, i, k).into_iter().map(move |j| (i, j)))
                .map(|(i, j)| segment_residual(s, &points[i], &points[j]))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-9, "residual {}", best);
        }
    }

    #[test]
    fn balancing_equalizes_counts(minority in 6usize..40, majority in 40usize..200, seed: u64) {
        let pts: Vec<Vec<f64>> = (0..minority).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let extra = balance_with_smote(majority, &pts, 5, seed).unwrap();
        prop_assert_eq!(pts.len() + extra.len(), majority);
    }
}
