//! One-hidden-layer classifier with a two-way softmax output, trained by
//! SGD on cross-entropy with class-balanced minibatches. Also provides the
//! oscillating class weights of the dynamical loss and the probability
//! curves and surfaces read off trained ensembles.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, Labeled, PredictorSet, Standardizer};
use crate::error::{Error, Result};
use crate::params::ParamFile;
use crate::rng::{self, Rng};
use crate::stats::mean_sem;

/// Probabilities are clamped to this before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

/// `[p_enemy, p_friend]`, indexed by [`Label::index`].
pub type Probs = [f64; 2];

pub fn softmax(logits: [f64; 2]) -> Probs {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Argmax with exact ties going to enemy.
pub fn decide(p: Probs) -> Label {
    if p[1] > p[0] {
        Label::Friend
    } else {
        Label::Enemy
    }
}

/// Summed loss `-sum_k w_{y_k} ln q_{y_k}`; unit weights when `class_weights`
/// is `None`.
pub fn cross_entropy(probs: &[Probs], labels: &[Label], class_weights: Option<[f64; 2]>) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::Shape { expected: probs.len(), actual: labels.len() });
    }
    let w = class_weights.unwrap_or([1.0, 1.0]);
    Ok(probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| -w[y.index()] * p[y.index()].max(LOG_CLAMP).ln())
        .sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub input_dim: usize,
    pub hidden: usize,
    /// `hidden x input_dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `2 x hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: [f64; 2],
    pub scaler: Standardizer,
    pub predictors: Option<PredictorSet>,
}

/// Parameter gradients shaped like [`MlpModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: [f64; 2],
}

impl Gradients {
    fn zeros(m: &MlpModel) -> Self {
        Gradients {
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: [0.0; 2],
        }
    }

    /// All components in the order w1, b1, w2, b2.
    pub fn flatten(&self) -> Vec<f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).copied().collect()
    }
}

struct Activations {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    probs: Probs,
}

impl MlpModel {
    /// Weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let mut uniform = |n: usize, fan_in: usize| -> Vec<f64> {
            let b = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-b..=b)).collect()
        };
        let w1 = uniform(hidden * input_dim, input_dim);
        let b1 = uniform(hidden, input_dim);
        let w2 = uniform(2 * hidden, hidden);
        let b2 = uniform(2, hidden);
        MlpModel {
            input_dim,
            hidden,
            w1,
            b1,
            w2,
            b2: [b2[0], b2[1]],
            scaler: Standardizer::identity(input_dim),
            predictors: None,
        }
    }

    /// Parameters in the order w1, b1, w2, b2.
    pub fn flatten(&self) -> Vec<f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).copied().collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        let (a, rest) = values.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.input_dim {
            Ok(())
        } else {
            Err(Error::Shape { expected: self.input_dim, actual: x.len() })
        }
    }

    /// Forward pass on an already standardized input.
    fn activations(&self, x: &[f64]) -> Activations {
        let d = self.input_dim;
        let pre: Vec<f64> = (0..self.hidden)
            .map(|h| {
                self.b1[h] + self.w1[h * d..(h + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        let hidden: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
        let logit = |c: usize| {
            self.b2[c]
                + self.w2[c * self.hidden..(c + 1) * self.hidden]
                    .iter()
                    .zip(&hidden)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
        };
        let probs = softmax([logit(0), logit(1)]);
        Activations { pre, hidden, probs }
    }

    /// `[p_enemy, p_friend]` for a raw (unscaled) feature vector.
    pub fn forward_probs(&self, features: &[f64]) -> Result<Probs> {
        self.check(features)?;
        Ok(self.activations(&self.scaler.transform(features)?).probs)
    }

    pub fn predict(&self, features: &[f64]) -> Result<Label> {
        self.forward_probs(features).map(decide)
    }

    /// Adds the gradient of `w_y * (-ln q_y)` for one standardized input.
    fn accumulate(&self, x: &[f64], y: Label, weight: f64, g: &mut Gradients) -> f64 {
        let a = self.activations(x);
        let mut dz = a.probs;
        dz[y.index()] -= 1.0;
        dz.iter_mut().for_each(|v| *v *= weight);
        for c in 0..2 {
            g.b2[c] += dz[c];
            for h in 0..self.hidden {
                g.w2[c * self.hidden + h] += dz[c] * a.hidden[h];
            }
        }
        let d = self.input_dim;
        for h in 0..self.hidden {
            if a.pre[h] <= 0.0 {
                continue;
            }
            let dh = dz[0] * self.w2[h] + dz[1] * self.w2[self.hidden + h];
            g.b1[h] += dh;
            for (gw, v) in g.w1[h * d..(h + 1) * d].iter_mut().zip(x) {
                *gw += dh * v;
            }
        }
        -weight * a.probs[y.index()].max(LOG_CLAMP).ln()
    }

    pub fn to_params(&self) -> ParamFile {
        let mut f = ParamFile::new("mlp");
        f.meta("input_dim", self.input_dim).meta("hidden", self.hidden).meta(
            "predictors",
            self.predictors.map_or_else(|| "none".to_string(), |p| p.name()),
        );
        f.block("scaler_mean", 1, self.input_dim, &self.scaler.mean)
            .block("scaler_std", 1, self.input_dim, &self.scaler.std)
            .block("w1", self.hidden, self.input_dim, &self.w1)
            .block("b1", 1, self.hidden, &self.b1)
            .block("w2", 2, self.hidden, &self.w2)
            .block("b2", 1, 2, &self.b2);
        f
    }

    pub fn from_params(f: &ParamFile) -> Result<Self> {
        if f.kind != "mlp" {
            return Err(Error::Format(format!("expected an mlp file, found `{}`", f.kind)));
        }
        let num = |k: &str| -> Result<usize> {
            f.get_meta(k)?.parse().map_err(|_| Error::Format(format!("bad `{k}`")))
        };
        let (input_dim, hidden) = (num("input_dim")?, num("hidden")?);
        let predictors = match f.get_meta("predictors")? {
            "none" => None,
            p => Some(p.parse()?),
        };
        let block = |name: &str, len: usize| -> Result<Vec<f64>> {
            let b = f.get_block(name)?;
            if b.data.len() != len {
                return Err(Error::Format(format!("block {name} has {} values, expected {len}", b.data.len())));
            }
            Ok(b.data.clone())
        };
        let b2 = block("b2", 2)?;
        Ok(MlpModel {
            input_dim,
            hidden,
            w1: block("w1", hidden * input_dim)?,
            b1: block("b1", hidden)?,
            w2: block("w2", 2 * hidden)?,
            b2: [b2[0], b2[1]],
            scaler: Standardizer {
                mean: block("scaler_mean", input_dim)?,
                std: block("scaler_std", input_dim)?,
            },
            predictors,
        })
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        self.to_params().write(out)
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        Self::from_params(&ParamFile::read(input)?)
    }
}

/// Summed weighted cross-entropy of the model on a batch.
pub fn loss<S: Labeled>(model: &MlpModel, batch: &[S], class_weights: Option<[f64; 2]>) -> Result<f64> {
    let probs = batch.iter().map(|s| model.forward_probs(s.features())).collect::<Result<Vec<_>>>()?;
    let labels: Vec<Label> = batch.iter().map(|s| s.label()).collect();
    cross_entropy(&probs, &labels, class_weights)
}

/// Exact gradient of [`loss`] by backpropagation. The scaler is treated as
/// a constant. At `q_y < 1e-12` this is the gradient of the unclamped loss.
pub fn gradient<S: Labeled>(
    model: &MlpModel,
    batch: &[S],
    class_weights: Option<[f64; 2]>,
) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("empty batch"));
    }
    let w = class_weights.unwrap_or([1.0, 1.0]);
    let mut g = Gradients::zeros(model);
    for s in batch {
        model.check(s.features())?;
        let x = model.scaler.transform(s.features())?;
        model.accumulate(&x, s.label(), w[s.label().index()], &mut g);
    }
    Ok(g)
}

/// Antiphase class weights `w_c(t) = 1 + A (1 + s_c sin(2 pi t / T)) / 2`
/// with `s_enemy = +1`, `s_friend = -1`. Returned as `[enemy, friend]`.
pub fn dynamical_weights(step: usize, amplitude: f64, period: f64) -> [f64; 2] {
    let s = (2.0 * PI * step as f64 / period).sin();
    [1.0 + amplitude * (1.0 + s) / 2.0, 1.0 + amplitude * (1.0 - s) / 2.0]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    pub amplitude: f64,
    /// In optimization steps.
    pub period: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub lr0: f64,
    pub lr_decay: f64,
    /// Must be even: half of every minibatch comes from each class.
    pub minibatch: usize,
    pub steps: usize,
    /// Oscillating class weights; `None` trains on the plain loss.
    pub dynamical: Option<Oscillation>,
    pub standardize: bool,
    pub seed: u64,
}

impl TrainConfig {
    /// 100 hidden units, lr 0.1 decaying by 0.99 per step, minibatch 20,
    /// 200 steps.
    pub fn standard() -> Self {
        TrainConfig {
            hidden: 100,
            lr0: 0.1,
            lr_decay: 0.99,
            minibatch: 20,
            steps: 200,
            dynamical: None,
            standardize: true,
            seed: 0,
        }
    }

    /// 1000 steps with class weights oscillating at amplitude 10, period 5.
    pub fn dynamical() -> Self {
        TrainConfig {
            steps: 1000,
            dynamical: Some(Oscillation { amplitude: 10.0, period: 5.0 }),
            ..Self::standard()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn learning_rate(&self, step: usize) -> f64 {
        self.lr0 * self.lr_decay.powi(step as i32)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.hidden >= 1
            && self.lr0 > 0.0
            && self.lr_decay > 0.0
            && self.minibatch >= 2
            && self.minibatch.is_multiple_of(2)
            && self.steps >= 1
            && self.dynamical.is_none_or(|o| o.amplitude >= 0.0 && o.period > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training configuration {self:?}")))
        }
    }
}

/// Draws minibatches with the same number of samples from each class. Each
/// class is walked through a fresh random permutation, reshuffled when
/// exhausted, so the smaller class is repeated more often.
pub struct BalancedBatcher {
    pools: [Vec<usize>; 2],
    cursor: [usize; 2],
}

impl BalancedBatcher {
    pub fn new(labels: &[Label]) -> Result<Self> {
        let mut pools = [Vec::new(), Vec::new()];
        for (i, l) in labels.iter().enumerate() {
            pools[l.index()].push(i);
        }
        if pools.iter().any(|p| p.is_empty()) {
            return Err(Error::Training(
                "both classes must be present for balanced minibatches".into(),
            ));
        }
        Ok(BalancedBatcher { pools, cursor: [usize::MAX; 2] })
    }

    pub fn next_batch(&mut self, size: usize, rng: &mut Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        for c in 0..2 {
            for _ in 0..size / 2 {
                if self.cursor[c] >= self.pools[c].len() {
                    self.pools[c].shuffle(rng);
                    self.cursor[c] = 0;
                }
                out.push(self.pools[c][self.cursor[c]]);
                self.cursor[c] += 1;
            }
        }
        out
    }
}

/// Per-step record of a training run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    /// Mean unweighted cross-entropy of each minibatch before its update.
    pub batch_loss: Vec<f64>,
    /// `[enemy, friend]` counts in each minibatch.
    pub class_counts: Vec<[usize; 2]>,
    pub learning_rates: Vec<f64>,
}

pub fn train<S: Labeled>(samples: &[S], config: &TrainConfig) -> Result<MlpModel> {
    train_traced(samples, config).map(|(m, _)| m)
}

/// Trains and also returns the per-step trace.
pub fn train_traced<S: Labeled>(samples: &[S], config: &TrainConfig) -> Result<(MlpModel, TrainTrace)> {
    config.validate()?;
    let first = samples.first().ok_or(Error::EmptyInput("no training samples"))?;
    let dim = first.features().len();
    let labels: Vec<Label> = samples.iter().map(|s| s.label()).collect();
    let mut batcher = BalancedBatcher::new(&labels)?;
    let scaler = if config.standardize { Standardizer::fit(samples)? } else { Standardizer::identity(dim) };
    let xs = samples.iter().map(|s| scaler.transform(s.features())).collect::<Result<Vec<_>>>()?;

    let mut model = MlpModel::init(dim, config.hidden, config.seed);
    model.scaler = scaler;
    let mut rng = rng::stream(config.seed, 1);
    let mut trace = TrainTrace::default();
    for step in 0..config.steps {
        let batch = batcher.next_batch(config.minibatch, &mut rng);
        let weights = config
            .dynamical
            .map_or([1.0, 1.0], |o| dynamical_weights(step, o.amplitude, o.period));
        let mut g = Gradients::zeros(&model);
        let mut counts = [0; 2];
        let mut batch_loss = 0.0;
        for &i in &batch {
            let y = labels[i];
            counts[y.index()] += 1;
            batch_loss += model.accumulate(&xs[i], y, weights[y.index()], &mut g) / weights[y.index()];
        }
        let lr = config.learning_rate(step) / batch.len() as f64;
        for (p, d) in model.w1.iter_mut().zip(&g.w1) {
            *p -= lr * d;
        }
        for (p, d) in model.b1.iter_mut().zip(&g.b1) {
            *p -= lr * d;
        }
        for (p, d) in model.w2.iter_mut().zip(&g.w2) {
            *p -= lr * d;
        }
        for c in 0..2 {
            model.b2[c] -= lr * g.b2[c];
        }
        trace.batch_loss.push(batch_loss / batch.len() as f64);
        trace.class_counts.push(counts);
        trace.learning_rates.push(config.learning_rate(step));
    }
    Ok((model, trace))
}

/// Trains one model per seed, in parallel.
pub fn train_ensemble<S: Labeled + Sync>(
    samples: &[S],
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<MlpModel>> {
    seeds.par_iter().map(|&s| train(samples, &config.clone().with_seed(s))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub influence: f64,
    pub p_friend: f64,
    pub p_friend_sem: f64,
    pub p_enemy: f64,
    pub p_enemy_sem: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityCurve {
    pub points: Vec<CurvePoint>,
}

impl ProbabilityCurve {
    /// First influence value where the mean friend probability reaches 0.5,
    /// linearly interpolated between sweep points.
    pub fn crossing(&self) -> Option<f64> {
        let p = &self.points;
        if p.first()?.p_friend >= 0.5 {
            return Some(p[0].influence);
        }
        p.windows(2).find(|w| w[1].p_friend >= 0.5).map(|w| {
            let t = (0.5 - w[0].p_friend) / (w[1].p_friend - w[0].p_friend);
            w[0].influence + t * (w[1].influence - w[0].influence)
        })
    }

    /// `influence,p_friend,p_friend_sem,p_enemy,p_enemy_sem` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["influence", "p_friend", "p_friend_sem", "p_enemy", "p_enemy_sem"])?;
        for p in &self.points {
            w.write_record(
                [p.influence, p.p_friend, p.p_friend_sem, p.p_enemy, p.p_enemy_sem].map(|v| v.to_string()),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

fn require_predictors(models: &[MlpModel], want: PredictorSet) -> Result<()> {
    if models.is_empty() {
        return Err(Error::EmptyInput("no models"));
    }
    if let Some(m) = models.iter().find(|m| m.predictors != Some(want)) {
        return Err(Error::Config(format!(
            "model trained on {}, expected {want}",
            m.predictors.map_or_else(|| "unknown predictors".to_string(), |p| p.name())
        )));
    }
    Ok(())
}

/// Ensemble mean and standard error of class probabilities over an evenly
/// spaced influence sweep. Every model must use influence-only inputs.
pub fn probability_curve(models: &[MlpModel], range: (f64, f64), n_points: usize) -> Result<ProbabilityCurve> {
    require_predictors(models, PredictorSet::InfluenceOnly)?;
    if n_points < 2 {
        return Err(Error::InvalidArgument("a curve needs at least two points".into()));
    }
    let step = (range.1 - range.0) / (n_points - 1) as f64;
    let points = (0..n_points)
        .map(|k| {
            let x = range.0 + step * k as f64;
            let probs = models.iter().map(|m| m.forward_probs(&[x])).collect::<Result<Vec<_>>>()?;
            let (pf, sf) = mean_sem(&probs.iter().map(|p| p[1]).collect::<Vec<_>>());
            let (pe, se) = mean_sem(&probs.iter().map(|p| p[0]).collect::<Vec<_>>());
            Ok(CurvePoint { influence: x, p_friend: pf, p_friend_sem: sf, p_enemy: pe, p_enemy_sem: se })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbabilityCurve { points })
}

/// Ensemble mean friend probability over a prosociality grid:
/// `p_friend[a][b]` is for nominator level `grid[a]` and nominee level
/// `grid[b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilitySurface {
    pub grid: Vec<f64>,
    pub p_friend: Vec<Vec<f64>>,
    pub sem: Vec<Vec<f64>>,
}

impl ProbabilitySurface {
    pub fn p_enemy(&self, a: usize, b: usize) -> f64 {
        1.0 - self.p_friend[a][b]
    }

    /// `p_src,p_dst,p_friend,p_friend_sem,p_enemy` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p_src", "p_dst", "p_friend", "p_friend_sem", "p_enemy"])?;
        for (a, pa) in self.grid.iter().enumerate() {
            for (b, pb) in self.grid.iter().enumerate() {
                w.write_record(
                    [*pa, *pb, self.p_friend[a][b], self.sem[a][b], self.p_enemy(a, b)]
                        .map(|v| v.to_string()),
                )?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn probability_surface(models: &[MlpModel], grid: &[f64]) -> Result<ProbabilitySurface> {
    require_predictors(models, PredictorSet::ProsocialityOnly)?;
    let mut p_friend = vec![vec![0.0; grid.len()]; grid.len()];
    let mut sem = p_friend.clone();
    for (a, &pa) in grid.iter().enumerate() {
        for (b, &pb) in grid.iter().enumerate() {
            let ps = models.iter().map(|m| m.forward_probs(&[pa, pb]).map(|p| p[1])).collect::<Result<Vec<_>>>()?;
            (p_friend[a][b], sem[a][b]) = mean_sem(&ps);
        }
    }
    Ok(ProbabilitySurface { grid: grid.to_vec(), p_friend, sem })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Example;
    use proptest::prelude::*;

    fn ex(x: Vec<f64>, y: Label) -> Example {
        Example { features: x, label: y }
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax([0.0, 0.0]), [0.5, 0.5]);
        let p = softmax([3f64.ln(), 0.0]);
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
        assert_eq!(decide([0.5, 0.5]), Label::Enemy);
    }

    #[test]
    fn cross_entropy_examples() {
        let f = Label::Friend;
        assert_eq!(cross_entropy(&[[0.0, 1.0]], &[f], None).unwrap(), 0.0);
        assert!((cross_entropy(&[[0.5, 0.5]], &[f], None).unwrap() - 2f64.ln()).abs() < 1e-15);
        let l = cross_entropy(&[[0.0, 1.0], [0.5, 0.5], [0.75, 0.25]], &[f, f, f], None).unwrap();
        assert!((l - (2f64.ln() + 4f64.ln())).abs() < 1e-14);
        assert!(cross_entropy(&[[1.0, 0.0]], &[f], None).unwrap().is_finite());
    }

    #[test]
    fn shape_error() {
        let m = MlpModel::init(3, 4, 0);
        assert!(matches!(m.forward_probs(&[1.0]), Err(Error::Shape { expected: 3, actual: 1 })));
    }

    #[test]
    fn zero_input_symmetric_b2_gradient() {
        let m = MlpModel::init(2, 5, 1);
        let batch = [ex(vec![0.0, 0.0], Label::Friend)];
        let g = gradient(&m, &batch, None).unwrap();
        assert!((g.b2[0] + g.b2[1]).abs() < 1e-15);
    }

    /// ||analytic - numeric|| / max(||analytic||, ||numeric||) with central
    /// differences.
    pub(crate) fn fd_relative_error(model: &MlpModel, batch: &[Example], w: Option<[f64; 2]>) -> f64 {
        let analytic = gradient(model, batch, w).unwrap().flatten();
        let base = model.flatten();
        let eps = 1e-5;
        let mut m = model.clone();
        let numeric: Vec<f64> = (0..base.len())
            .map(|k| {
                let mut v = base.clone();
                v[k] += eps;
                m.set_flat(&v);
                let up = loss(&m, batch, w).unwrap();
                v[k] -= 2.0 * eps;
                m.set_flat(&v);
                let down = loss(&m, batch, w).unwrap();
                (up - down) / (2.0 * eps)
            })
            .collect();
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        diff / na.max(nn).max(1e-300)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng::seeded(9);
        for trial in 0..5 {
            let d = 1 + trial % 4;
            let m = MlpModel::init(d, 6, trial as u64);
            let batch: Vec<Example> = (0..7)
                .map(|k| ex((0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(), Label::from_index(k % 2)))
                .collect();
            let e = fd_relative_error(&m, &batch, Some([1.5, 6.0]));
            assert!(e < 1e-4, "trial {trial}: {e}");
        }
    }

    #[test]
    fn perfectly_fit_batch_has_tiny_gradient() {
        let mut m = MlpModel::init(1, 3, 0);
        m.w2.iter_mut().for_each(|w| *w = 0.0);
        m.b2 = [-40.0, 40.0];
        let g = gradient(&m, &[ex(vec![0.3], Label::Friend)], None).unwrap();
        assert!(g.flatten().iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn dynamical_weight_contract() {
        assert_eq!(dynamical_weights(0, 10.0, 5.0), [6.0, 6.0]);
        let mut mean = [0.0; 2];
        for t in 0..5 {
            let w = dynamical_weights(t, 10.0, 5.0);
            assert!((w[0] + w[1] - 12.0).abs() < 1e-12);
            mean[0] += w[0] / 5.0;
            mean[1] += w[1] / 5.0;
        }
        assert!((mean[0] - 6.0).abs() < 1e-12 && (mean[1] - 6.0).abs() < 1e-12);
    }

    fn threshold_data(n: usize, seed: u64) -> Vec<Example> {
        let mut rng = rng::seeded(seed);
        (0..n)
            .map(|_| {
                let i = rng.gen_range(-10i32..=30) as f64;
                ex(vec![i], if i > 5.0 { Label::Friend } else { Label::Enemy })
            })
            .collect()
    }

    #[test]
    fn balanced_batches_and_schedule() {
        let mut data = threshold_data(300, 1);
        data.truncate(300);
        let (_, trace) = train_traced(&data, &TrainConfig::standard()).unwrap();
        assert_eq!(trace.class_counts.len(), 200);
        assert!(trace.class_counts.iter().all(|c| *c == [10, 10]));
        for (t, lr) in trace.learning_rates.iter().enumerate() {
            assert_eq!(*lr, 0.1 * 0.99f64.powi(t as i32));
        }
        let early: f64 = trace.batch_loss[..10].iter().sum();
        let late: f64 = trace.batch_loss[190..].iter().sum();
        assert!(late < early);
    }

    #[test]
    fn learns_threshold_and_is_deterministic() {
        let data = threshold_data(500, 2);
        let cfg = TrainConfig::standard().with_seed(4);
        let a = train(&data, &cfg).unwrap();
        assert_eq!(a, train(&data, &cfg).unwrap());
        let test = threshold_data(500, 3);
        let correct = test.iter().filter(|e| a.predict(&e.features).unwrap() == e.label).count();
        assert!(correct as f64 / 500.0 > 0.95);
    }

    #[test]
    fn learns_xor() {
        let mut rng = rng::seeded(7);
        let data: Vec<Example> = (0..400)
            .map(|_| {
                let (x, y): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                ex(vec![x, y], if (x > 0.0) == (y > 0.0) { Label::Friend } else { Label::Enemy })
            })
            .collect();
        let cfg = TrainConfig { steps: 2000, lr_decay: 0.999, ..TrainConfig::standard() };
        let m = train(&data, &cfg).unwrap();
        let correct = data.iter().filter(|e| m.predict(&e.features).unwrap() == e.label).count();
        assert!(correct as f64 / 400.0 > 0.9, "{correct}");
    }

    #[test]
    fn single_class_is_rejected() {
        let data = vec![ex(vec![1.0], Label::Friend); 5];
        assert!(matches!(train(&data, &TrainConfig::standard()), Err(Error::Training(_))));
    }

    #[test]
    fn model_file_roundtrip() {
        let mut m = train(&threshold_data(100, 5), &TrainConfig { steps: 10, ..TrainConfig::standard() }).unwrap();
        m.predictors = Some(PredictorSet::InfluenceOnly);
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        assert_eq!(MlpModel::load(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn curve_requires_matching_predictors() {
        let mut m = MlpModel::init(1, 3, 0);
        assert!(matches!(probability_curve(&[m.clone()], (0.0, 1.0), 5), Err(Error::Config(_))));
        m.predictors = Some(PredictorSet::InfluenceOnly);
        let c = probability_curve(&[m], (-5.0, 5.0), 11).unwrap();
        assert!(c.points.iter().all(|p| (p.p_friend + p.p_enemy - 1.0).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(seed: u64, x in proptest::collection::vec(-1e3f64..1e3, 3)) {
            let m = MlpModel::init(3, 8, seed);
            let p = m.forward_probs(&x).unwrap();
            prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn dynamical_weights_bounded_periodic(t in 0usize..10_000) {
            let w = dynamical_weights(t, 10.0, 5.0);
            let w5 = dynamical_weights(t + 5, 10.0, 5.0);
            prop_assert!(w.iter().all(|v| (1.0..=11.0).contains(v)));
            prop_assert!((w[0] - w5[0]).abs() < 1e-9 && (w[1] - w5[1]).abs() < 1e-9);
            prop_assert!((w[0] + w[1] - 12.0).abs() < 1e-9);
        }
    }
}
