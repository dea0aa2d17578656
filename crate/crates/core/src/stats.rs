//! Descriptive statistics of a network: relationship types, 2-path counts,
//! prosociality levels and nominations per prosociality level.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::graph::{edge_triads, Prosociality, SignedDigraph};

/// Positive (+1, +2) or negative (-1, -2) relationships.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

/// Whether a student is counted as nominator or as nominee.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
}

fn non_empty_edges(g: &SignedDigraph) -> Result<()> {
    if g.edge_count() == 0 {
        Err(Error::EmptyInput("graph has no relationships"))
    } else {
        Ok(())
    }
}

fn normalize<K: Ord>(counts: BTreeMap<K, usize>) -> BTreeMap<K, f64> {
    let total: usize = counts.values().sum();
    counts.into_iter().map(|(k, c)| (k, c as f64 / total as f64)).collect()
}

/// Fraction of relationships of each weight.
pub fn relation_type_distribution(g: &SignedDigraph) -> Result<BTreeMap<i64, f64>> {
    non_empty_edges(g)?;
    let mut counts = BTreeMap::new();
    for e in g.edges() {
        *counts.entry(e.weight.get()).or_insert(0) += 1;
    }
    Ok(normalize(counts))
}

/// Fraction of relationships by the number of directed 2-paths joining
/// their endpoints.
pub fn two_path_histogram(g: &SignedDigraph) -> Result<BTreeMap<u32, f64>> {
    non_empty_edges(g)?;
    let mut counts = BTreeMap::new();
    for t in edge_triads(g) {
        *counts.entry(t.two_paths).or_insert(0) += 1;
    }
    Ok(normalize(counts))
}

pub fn prosociality_distribution(g: &SignedDigraph) -> Result<BTreeMap<Prosociality, f64>> {
    if g.node_count() == 0 {
        return Err(Error::EmptyInput("graph has no students"));
    }
    let mut counts = BTreeMap::new();
    for s in g.students() {
        *counts.entry(s.prosociality).or_insert(0) += 1;
    }
    Ok(normalize(counts))
}

/// Mean number of nominations of the given sign made (`Out`) or received
/// (`In`) by students at each prosociality level, with the standard error
/// of the mean. Levels with a single student get a standard error of 0.
pub fn mean_nominations_by_prosociality(
    g: &SignedDigraph,
    sign: Sign,
    direction: Direction,
) -> Result<BTreeMap<Prosociality, (f64, f64)>> {
    if g.node_count() == 0 {
        return Err(Error::EmptyInput("graph has no students"));
    }
    let mut per_level: BTreeMap<Prosociality, Vec<f64>> = BTreeMap::new();
    for (i, s) in g.students().iter().enumerate() {
        let list = match direction {
            Direction::Out => g.out_edges(i),
            Direction::In => g.in_edges(i),
        };
        let n = list.iter().filter(|(_, w)| w.is_positive() == (sign == Sign::Positive)).count();
        per_level.entry(s.prosociality).or_default().push(n as f64);
    }
    Ok(per_level.into_iter().map(|(level, xs)| (level, mean_sem(&xs))).collect())
}

/// Mean and standard error of the mean (sample standard deviation, n - 1).
pub fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Writes `header` then one `key,value` row per bin.
pub fn write_distribution<W, K, V>(out: W, header: [&str; 2], dist: &BTreeMap<K, V>) -> Result<()>
where
    W: Write,
    K: std::fmt::Display,
    V: std::fmt::Display,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for (k, v) in dist {
        w.write_record([k.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `prosociality,mean,sem` rows.
pub fn write_nominations<W: Write>(
    out: W,
    table: &BTreeMap<Prosociality, (f64, f64)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["prosociality", "mean", "sem"])?;
    for (p, (m, s)) in table {
        w.write_record([p.value().to_string(), m.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{diagram, graph};

    #[test]
    fn single_edge() {
        let g = graph(2, &[(0, 1, 1)]);
        let d = relation_type_distribution(&g).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[&1], 1.0);
        assert_eq!(two_path_histogram(&g).unwrap()[&0], 1.0);
    }

    #[test]
    fn empty_graph_is_an_error() {
        let g = graph(0, &[]);
        assert!(matches!(relation_type_distribution(&g), Err(Error::EmptyInput(_))));
        assert!(matches!(prosociality_distribution(&g), Err(Error::EmptyInput(_))));
        let g = graph(3, &[]);
        assert!(two_path_histogram(&g).is_err());
    }

    #[test]
    fn diagram_stats_sum_to_one() {
        let g = diagram();
        for total in [
            relation_type_distribution(&g).unwrap().values().sum::<f64>(),
            two_path_histogram(&g).unwrap().values().sum::<f64>(),
            prosociality_distribution(&g).unwrap().values().sum::<f64>(),
        ] {
            assert!((total - 1.0).abs() < 1e-9);
        }
        let nom = mean_nominations_by_prosociality(&g, Sign::Positive, Direction::Out).unwrap();
        // every node has level 2; positive out-edges: 0:3, 1:1, 2:1, 5:1, 6:1
        let (m, _) = nom[&Prosociality::from_level(2).unwrap()];
        assert!((m - 7.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn sem_matches_hand_computation() {
        let (m, s) = mean_sem(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (1.666_666_666_666_666_7f64 / 4.0).sqrt()).abs() < 1e-12);
    }
}
