//! Balanced accuracy, per-run reports, cross-validation and histograms of
//! repeated runs.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{kfold_split, Label, Labeled};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::mean_sem;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub friend_total: usize,
    pub friend_correct: usize,
    pub enemy_total: usize,
    pub enemy_correct: usize,
}

impl ConfusionCounts {
    pub fn tally(predictions: &[Label], labels: &[Label]) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::Shape { expected: labels.len(), actual: predictions.len() });
        }
        let mut c = ConfusionCounts::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            match y {
                Label::Friend => {
                    c.friend_total += 1;
                    c.friend_correct += usize::from(p == y);
                }
                Label::Enemy => {
                    c.enemy_total += 1;
                    c.enemy_correct += usize::from(p == y);
                }
            }
        }
        Ok(c)
    }

    pub fn friend_recall(&self) -> f64 {
        self.friend_correct as f64 / self.friend_total as f64
    }

    pub fn enemy_recall(&self) -> f64 {
        self.enemy_correct as f64 / self.enemy_total as f64
    }

    /// `(N+c / N+t + N-c / N-t) / 2`. A class missing from the labels makes
    /// this undefined; the error carries the recall of the present class.
    pub fn balanced_accuracy(&self) -> Result<f64> {
        match (self.friend_total, self.enemy_total) {
            (0, 0) => Err(Error::EmptyInput("no labels")),
            (0, _) => Err(Error::DegenerateClass { present: Label::Enemy, recall: self.enemy_recall() }),
            (_, 0) => Err(Error::DegenerateClass { present: Label::Friend, recall: self.friend_recall() }),
            _ => Ok(0.5 * (self.friend_recall() + self.enemy_recall())),
        }
    }
}

pub fn balanced_accuracy(predictions: &[Label], labels: &[Label]) -> Result<f64> {
    ConfusionCounts::tally(predictions, labels)?.balanced_accuracy()
}

/// Descriptive tags of one evaluation run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub predictors: String,
    pub treatment: String,
    pub seed: u64,
    /// Fold index, held-out course or similar.
    pub split: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub counts: ConfusionCounts,
    /// `None` for a single-class test set.
    pub bacc: Option<f64>,
    pub meta: RunMeta,
}

impl EvalReport {
    pub fn new(predictions: &[Label], labels: &[Label], meta: RunMeta) -> Result<Self> {
        let counts = ConfusionCounts::tally(predictions, labels)?;
        let bacc = match counts.balanced_accuracy() {
            Ok(b) => Some(b),
            Err(Error::DegenerateClass { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(EvalReport { counts, bacc, meta })
    }

    pub fn is_degenerate(&self) -> bool {
        self.bacc.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sem: f64,
    /// Reports that entered the mean.
    pub n: usize,
    /// Single-class reports left out.
    pub degenerate: usize,
}

/// Mean and standard error of bAcc over the non-degenerate reports.
pub fn summarize(reports: &[EvalReport]) -> Result<Summary> {
    let xs: Vec<f64> = reports.iter().filter_map(|r| r.bacc).collect();
    if xs.is_empty() {
        return Err(Error::EmptyInput("no report with both classes"));
    }
    let (mean, sem) = mean_sem(&xs);
    Ok(Summary { mean, sem, n: xs.len(), degenerate: reports.len() - xs.len() })
}

/// k-fold cross-validation. `train_predict(train, test, seed)` fits on the
/// training fold and returns predictions for the test fold. Folds run in
/// parallel; each gets a seed derived from `seed` and its index.
pub fn cross_validate<S, F>(
    samples: &[S],
    k: usize,
    seed: u64,
    meta: &RunMeta,
    train_predict: F,
) -> Result<Vec<EvalReport>>
where
    S: Labeled + Sync,
    F: Fn(&[&S], &[&S], u64) -> Result<Vec<Label>> + Sync,
{
    let folds = kfold_split(samples.len(), k, seed)?;
    folds
        .par_iter()
        .enumerate()
        .map(|(i, split)| {
            let (train, test) = split.select(samples);
            let fold_seed = rng::child_seed(seed, i as u64);
            let preds = train_predict(&train, &test, fold_seed)?;
            let labels: Vec<Label> = test.iter().map(|s| s.label()).collect();
            EvalReport::new(
                &preds,
                &labels,
                RunMeta { seed: fold_seed, split: format!("fold{i}"), ..meta.clone() },
            )
        })
        .collect()
}

/// Density histogram on `[0, 1]`: bar heights times bin width sum to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    /// Mean of the underlying values.
    pub mean: f64,
}

impl Histogram {
    pub fn area(&self) -> f64 {
        self.density.iter().zip(self.edges.windows(2)).map(|(d, e)| d * (e[1] - e[0])).sum()
    }

    /// `bin_lo,bin_hi,density` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lo", "bin_hi", "density"])?;
        for (d, e) in self.density.iter().zip(self.edges.windows(2)) {
            w.write_record([e[0], e[1], *d].map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn bacc_histogram(reports: &[EvalReport], n_bins: usize) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    let xs: Vec<f64> = reports.iter().filter_map(|r| r.bacc).collect();
    if xs.is_empty() {
        return Err(Error::EmptyInput("no reports to histogram"));
    }
    let width = 1.0 / n_bins as f64;
    let edges = (0..=n_bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0usize; n_bins];
    for &x in &xs {
        counts[((x * n_bins as f64) as usize).min(n_bins - 1)] += 1;
    }
    let n = xs.len() as f64;
    let density = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    Ok(Histogram { edges, density, mean: xs.iter().sum::<f64>() / n })
}

/// One row per report.
pub fn write_reports<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "predictors",
        "treatment",
        "seed",
        "split",
        "friend_total",
        "friend_correct",
        "enemy_total",
        "enemy_correct",
        "bacc",
    ])?;
    for r in reports {
        let c = r.counts;
        w.write_record([
            r.meta.predictors.clone(),
            r.meta.treatment.clone(),
            r.meta.seed.to_string(),
            r.meta.split.clone(),
            c.friend_total.to_string(),
            c.friend_correct.to_string(),
            c.enemy_total.to_string(),
            c.enemy_correct.to_string(),
            r.bacc.map_or_else(String::new, |b| b.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Example;
    use proptest::prelude::*;
    use Label::{Enemy as E, Friend as F};

    #[test]
    fn examples() {
        let labels = [F, F, E, E, E];
        assert_eq!(balanced_accuracy(&labels, &labels).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&[F; 5], &labels).unwrap(), 0.5);
        assert_eq!(balanced_accuracy(&[E; 5], &labels).unwrap(), 0.5);
        let c = ConfusionCounts { friend_total: 100, friend_correct: 80, enemy_total: 50, enemy_correct: 40 };
        assert!((c.balanced_accuracy().unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn degenerate() {
        match balanced_accuracy(&[F, E, F], &[F, F, F]) {
            Err(Error::DegenerateClass { present: F, recall }) => assert!((recall - 2.0 / 3.0).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        let r = EvalReport::new(&[F], &[F], RunMeta::default()).unwrap();
        assert!(r.is_degenerate());
        let ok = EvalReport::new(&[F, E], &[F, E], RunMeta::default()).unwrap();
        let s = summarize(&[r, ok]).unwrap();
        assert_eq!((s.n, s.degenerate, s.mean), (1, 1, 1.0));
    }

    #[test]
    fn cross_validation_on_separable_data() {
        let data: Vec<Example> = (0..50)
            .map(|i| Example { features: vec![i as f64], label: if i >= 25 { F } else { E } })
            .collect();
        let reports = cross_validate(&data, 5, 3, &RunMeta::default(), |_, test, _| {
            Ok(test.iter().map(|s| if s.features[0] >= 25.0 { F } else { E }).collect())
        })
        .unwrap();
        assert_eq!(reports.len(), 5);
        let s = summarize(&reports).unwrap();
        assert_eq!((s.mean, s.sem), (1.0, 0.0));
    }

    #[test]
    fn histogram() {
        let r = EvalReport::new(&[F, E], &[F, E], RunMeta::default()).unwrap();
        let h = bacc_histogram(&[r], 20).unwrap();
        assert_eq!(h.density.iter().filter(|&&d| d > 0.0).count(), 1);
        assert!((h.area() - 1.0).abs() < 1e-9);
        assert!(bacc_histogram(&[], 20).is_err());
    }

    proptest! {
        #[test]
        fn constant_predictor_is_half(labels in proptest::collection::vec(any::<bool>(), 2..200), c: bool) {
            let labels: Vec<Label> = labels.into_iter().map(|b| if b { F } else { E }).collect();
            prop_assume!(labels.contains(&F) && labels.contains(&E));
            let pred = vec![if c { F } else { E }; labels.len()];
            prop_assert_eq!(balanced_accuracy(&pred, &labels).unwrap(), 0.5);
        }

        #[test]
        fn symmetric_under_relabeling(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 2..200)) {
            let to = |b: bool| if b { F } else { E };
            let labels: Vec<Label> = pairs.iter().map(|p| to(p.0)).collect();
            prop_assume!(labels.contains(&F) && labels.contains(&E));
            let preds: Vec<Label> = pairs.iter().map(|p| to(p.1)).collect();
            let swapped_l: Vec<Label> = labels.iter().map(|l| l.other()).collect();
            let swapped_p: Vec<Label> = preds.iter().map(|l| l.other()).collect();
            let a = balanced_accuracy(&preds, &labels).unwrap();
            let b = balanced_accuracy(&swapped_p, &swapped_l).unwrap();
            prop_assert!((a - b).abs() < 1e-15);
        }

        #[test]
        fn histogram_area_is_one(xs in proptest::collection::vec(0.0f64..=1.0, 1..400), bins in 1usize..50) {
            let reports: Vec<EvalReport> = xs.iter().map(|&b| EvalReport {
                counts: ConfusionCounts::default(), bacc: Some(b), meta: RunMeta::default(),
            }).collect();
            let h = bacc_histogram(&reports, bins).unwrap();
            prop_assert!((h.area() - 1.0).abs() < 1e-9);
        }
    }
}
