use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest other points of each point (Euclidean, ties
/// broken by index).
fn nearest(points: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| (sq_dist(p, q), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(k);
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// `n_synthetic` points `x + u (x_nn - x)`, each from a uniformly chosen
/// minority point `x`, one of its `k` nearest minority neighbors `x_nn` and
/// `u ~ U[0, 1)`. Only ever applied to training data.
pub fn smote(minority: &[Vec<f64>], k: usize, n_synthetic: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k_neighbors must be at least 1".into()));
    }
    if minority.len() < k + 1 {
        return Err(Error::InvalidArgument(format!(
            "{} minority points, need at least {} for k = {k}",
            minority.len(),
            k + 1
        )));
    }
    let dim = minority[0].len();
    if let Some(bad) = minority.iter().find(|p| p.len() != dim) {
        return Err(Error::Shape { expected: dim, actual: bad.len() });
    }
    let knn = nearest(minority, k);
    let mut rng = rng::seeded(seed);
    Ok((0..n_synthetic)
        .map(|_| {
            let i = rng.gen_range(0..minority.len());
            let j = knn[i][rng.gen_range(0..k)];
            let u: f64 = rng.gen();
            minority[i].iter().zip(&minority[j]).map(|(x, y)| x + u * (y - x)).collect()
        })
        .collect())
}

/// Synthetic minority points that bring the minority up to `majority_count`.
pub fn balance_with_smote(
    majority_count: usize,
    minority: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    smote(minority, k, majority_count.saturating_sub(minority.len()), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn collapsed_minority() {
        let pts = vec![vec![1.5, -2.0]; 6];
        for s in smote(&pts, 3, 20, 1).unwrap() {
            assert_eq!(s, vec![1.5, -2.0]);
        }
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![0.0]; 3];
        assert!(matches!(smote(&pts, 3, 5, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn balancing_counts() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let extra = balance_with_smote(37, &pts, 5, 2).unwrap();
        assert_eq!(extra.len() + pts.len(), 37);
    }

    proptest! {
        #[test]
        fn within_bounding_box(
            pts in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 6..30),
            seed: u64,
        ) {
            for s in smote(&pts, 5, 50, seed).unwrap() {
                for d in 0..3 {
                    let lo = pts.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min);
                    let hi = pts.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(s[d] >= lo - 1e-12 && s[d] <= hi + 1e-12);
                }
            }
        }
    }
}
