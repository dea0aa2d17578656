//! Feed-forward net for edge embeddings: four ReLU hidden layers (128, 64,
//! 32, 8) and one sigmoid output unit, trained by minibatch SGD on binary
//! cross-entropy.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, Labeled, Standardizer};
use crate::error::{Error, Result};
use crate::params::ParamFile;
use crate::rng;

/// Smallest distance kept between a reported probability and 0 or 1.
const PROB_MARGIN: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepConfig {
    pub hidden: Vec<usize>,
    pub lr0: f64,
    pub lr_decay: f64,
    pub minibatch: usize,
    pub epochs: usize,
    pub standardize: bool,
    pub seed: u64,
}

impl Default for DeepConfig {
    fn default() -> Self {
        DeepConfig {
            hidden: vec![128, 64, 32, 8],
            lr0: 0.01,
            lr_decay: 0.999,
            minibatch: 64,
            epochs: 50,
            standardize: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                self.b[o]
                    + self.w[o * self.inputs..(o + 1) * self.inputs].iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeepNetModel {
    pub layers: Vec<Dense>,
    pub scaler: Standardizer,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl DeepNetModel {
    /// Layer sizes `input -> hidden... -> 1`, uniform init in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init(input_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|s| {
                let bound = 1.0 / (s[0] as f64).sqrt();
                let mut draw = |n| (0..n).map(|_| rng.gen_range(-bound..=bound)).collect::<Vec<f64>>();
                Dense { inputs: s[0], outputs: s[1], w: draw(s[0] * s[1]), b: draw(s[1]) }
            })
            .collect();
        DeepNetModel { layers, scaler: Standardizer::identity(input_dim) }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    /// Layer widths including input and output.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    /// Pre-activations of every layer for a standardized input.
    fn pre_activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&a);
            if i + 1 < self.layers.len() {
                a = z.iter().map(|v| v.max(0.0)).collect();
            }
            pres.push(z);
        }
        pres
    }

    fn logit_scaled(&self, x: &[f64]) -> f64 {
        self.pre_activations(x).last().expect("at least one layer")[0]
    }

    fn scaled(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape { expected: self.input_dim(), actual: x.len() });
        }
        self.scaler.transform(x)
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        Ok(self.logit_scaled(&self.scaled(x)?))
    }

    /// Friend probability, kept strictly inside (0, 1).
    pub fn forward_prob(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?).clamp(PROB_MARGIN, 1.0 - PROB_MARGIN))
    }

    /// Friend iff the probability exceeds 0.5; ties go to enemy.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(if self.logit(x)? > 0.0 { Label::Friend } else { Label::Enemy })
    }

    /// Adds the gradient of the binary cross-entropy of one standardized
    /// input to `grads` (same layout as `layers`); returns the loss.
    fn accumulate(&self, x: &[f64], y: f64, grads: &mut [Dense]) -> f64 {
        let pres = self.pre_activations(x);
        let z = pres.last().unwrap()[0];
        let mut delta = vec![sigmoid(z) - y];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input: Vec<f64> = if l == 0 { x.to_vec() } else { pres[l - 1].iter().map(|v| v.max(0.0)).collect() };
            let g = &mut grads[l];
            for o in 0..layer.outputs {
                g.b[o] += delta[o];
                for (gw, v) in g.w[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(&input) {
                    *gw += delta[o] * v;
                }
            }
            if l > 0 {
                delta = (0..layer.inputs)
                    .map(|i| {
                        if pres[l - 1][i] <= 0.0 {
                            return 0.0;
                        }
                        (0..layer.outputs).map(|o| delta[o] * layer.w[o * layer.inputs + i]).sum()
                    })
                    .collect();
            }
        }
        softplus(z) - y * z
    }

    fn zero_grads(&self) -> Vec<Dense> {
        self.layers
            .iter()
            .map(|l| Dense { inputs: l.inputs, outputs: l.outputs, w: vec![0.0; l.w.len()], b: vec![0.0; l.b.len()] })
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        let mut rest = values;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.w.len());
            let (b, r) = r.split_at(l.b.len());
            l.w.copy_from_slice(w);
            l.b.copy_from_slice(b);
            rest = r;
        }
    }

    pub fn to_params(&self) -> ParamFile {
        let mut f = ParamFile::new("deep");
        let shape: Vec<String> = self.shape().iter().map(|s| s.to_string()).collect();
        f.meta("layers", shape.join(" "));
        let d = self.input_dim();
        f.block("scaler_mean", 1, d, &self.scaler.mean).block("scaler_std", 1, d, &self.scaler.std);
        for (i, l) in self.layers.iter().enumerate() {
            f.block(&format!("w{i}"), l.outputs, l.inputs, &l.w).block(&format!("b{i}"), 1, l.outputs, &l.b);
        }
        f
    }

    pub fn from_params(f: &ParamFile) -> Result<Self> {
        if f.kind != "deep" {
            return Err(Error::Format(format!("expected a deep-net file, found `{}`", f.kind)));
        }
        let shape = f
            .get_meta("layers")?
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|_| Error::Format(format!("bad layer size `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        if shape.len() < 2 {
            return Err(Error::Format("layer manifest needs input and output sizes".into()));
        }
        let mut layers = Vec::new();
        for (i, s) in shape.windows(2).enumerate() {
            let w = f.get_block(&format!("w{i}"))?;
            let b = f.get_block(&format!("b{i}"))?;
            if w.data.len() != s[0] * s[1] || b.data.len() != s[1] {
                return Err(Error::Format(format!("layer {i} does not match the manifest")));
            }
            layers.push(Dense { inputs: s[0], outputs: s[1], w: w.data.clone(), b: b.data.clone() });
        }
        let scaler = Standardizer {
            mean: f.get_block("scaler_mean")?.data.clone(),
            std: f.get_block("scaler_std")?.data.clone(),
        };
        if scaler.dim() != shape[0] {
            return Err(Error::Format("scaler does not match the input size".into()));
        }
        Ok(DeepNetModel { layers, scaler })
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        self.to_params().write(out)
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        Self::from_params(&ParamFile::read(input)?)
    }
}

fn flatten_layers(layers: &[Dense]) -> Vec<f64> {
    layers.iter().flat_map(|l| l.w.iter().chain(&l.b)).copied().collect()
}

fn target(l: Label) -> f64 {
    l.index() as f64
}

/// Summed binary cross-entropy of the model on a batch.
pub fn deep_loss<S: Labeled>(model: &DeepNetModel, batch: &[S]) -> Result<f64> {
    batch
        .iter()
        .map(|s| {
            let z = model.logit(s.features())?;
            Ok(softplus(z) - target(s.label()) * z)
        })
        .sum()
}

/// Gradient of [`deep_loss`], flattened layer by layer as `w` then `b`.
pub fn deep_gradient<S: Labeled>(model: &DeepNetModel, batch: &[S]) -> Result<Vec<f64>> {
    let mut grads = model.zero_grads();
    for s in batch {
        let x = model.scaled(s.features())?;
        model.accumulate(&x, target(s.label()), &mut grads);
    }
    Ok(flatten_layers(&grads))
}

pub fn train_deep<S: Labeled>(samples: &[S], config: &DeepConfig) -> Result<DeepNetModel> {
    if config.minibatch == 0 || config.epochs == 0 || config.lr0 <= 0.0 {
        return Err(Error::Config(format!("invalid deep-net configuration {config:?}")));
    }
    let first = samples.first().ok_or(Error::EmptyInput("no training samples"))?;
    let friends = samples.iter().filter(|s| s.label() == Label::Friend).count();
    if friends == 0 || friends == samples.len() {
        return Err(Error::Training("both classes must be present".into()));
    }
    let dim = first.features().len();
    let mut model = DeepNetModel::init(dim, &config.hidden, config.seed);
    if config.standardize {
        model.scaler = Standardizer::fit(samples)?;
    }
    let xs = samples.iter().map(|s| model.scaled(s.features())).collect::<Result<Vec<_>>>()?;
    let ys: Vec<f64> = samples.iter().map(|s| target(s.label())).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = rng::stream(config.seed, 1);
    let mut step = 0;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.minibatch) {
            let mut grads = model.zero_grads();
            for &i in batch {
                model.accumulate(&xs[i], ys[i], &mut grads);
            }
            let lr = config.lr0 * config.lr_decay.powi(step) / batch.len() as f64;
            for (l, g) in model.layers.iter_mut().zip(&grads) {
                l.w.iter_mut().zip(&g.w).for_each(|(p, d)| *p -= lr * d);
                l.b.iter_mut().zip(&g.b).for_each(|(p, d)| *p -= lr * d);
            }
            step += 1;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Example;

    fn batch(d: usize, n: usize, seed: u64) -> Vec<Example> {
        let mut rng = rng::seeded(seed);
        (0..n)
            .map(|k| Example {
                features: (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                label: Label::from_index(k % 2),
            })
            .collect()
    }

    #[test]
    fn shape_contract() {
        let m = DeepNetModel::init(128, &DeepConfig::default().hidden, 0);
        assert_eq!(m.shape(), vec![128, 128, 64, 32, 8, 1]);
        assert!(m.forward_prob(&[0.0; 128]).is_ok());
        assert!(m.forward_prob(&[0.0; 256]).is_err());
        let m = DeepNetModel::init(256, &DeepConfig::default().hidden, 0);
        assert_eq!(m.shape()[0], 256);
    }

    #[test]
    fn output_strictly_inside_unit_interval() {
        let mut m = DeepNetModel::init(2, &[3], 0);
        m.layers[1].b[0] = 1e6;
        let p = m.forward_prob(&[0.0, 0.0]).unwrap();
        assert!(p > 0.0 && p < 1.0);
        m.layers[1].b[0] = -1e6;
        let p = m.forward_prob(&[0.0, 0.0]).unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert!(deep_loss(&m, &batch(2, 3, 0)).unwrap().is_finite());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..3 {
            let m = DeepNetModel::init(4, &[6, 5, 4, 3], seed);
            let b = batch(4, 6, seed + 10);
            let analytic = deep_gradient(&m, &b).unwrap();
            let base = m.flatten();
            let mut probe = m.clone();
            let eps = 1e-5;
            let numeric: Vec<f64> = (0..base.len())
                .map(|k| {
                    let mut v = base.clone();
                    v[k] += eps;
                    probe.set_flat(&v);
                    let up = deep_loss(&probe, &b).unwrap();
                    v[k] -= 2.0 * eps;
                    probe.set_flat(&v);
                    (up - deep_loss(&probe, &b).unwrap()) / (2.0 * eps)
                })
                .collect();
            let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
            let norm = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(diff / norm < 1e-4, "seed {seed}: {}", diff / norm);
        }
    }

    #[test]
    fn learns_linear_rule_deterministically() {
        let data: Vec<Example> = batch(4, 400, 3)
            .into_iter()
            .map(|mut e| {
                e.label = if e.features[0] + e.features[1] > 0.0 { Label::Friend } else { Label::Enemy };
                e
            })
            .collect();
        let cfg = DeepConfig { epochs: 30, lr0: 0.1, hidden: vec![16, 8], ..DeepConfig::default() };
        let m = train_deep(&data, &cfg).unwrap();
        assert_eq!(m, train_deep(&data, &cfg).unwrap());
        let ok = data.iter().filter(|e| m.predict(&e.features).unwrap() == e.label).count();
        assert!(ok > 360, "{ok}");
    }

    #[test]
    fn file_roundtrip() {
        let m = DeepNetModel::init(5, &[4, 3], 2);
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        assert_eq!(DeepNetModel::load(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn single_class_rejected() {
        let data = vec![Example { features: vec![0.0], label: Label::Enemy }; 3];
        assert!(matches!(train_deep(&data, &DeepConfig::default()), Err(Error::Training(_))));
    }
}
