//! Feed-forward network with a sigmoid output unit.
//!
//! Parameters live in one flat vector. Layer `l` maps `n_l` inputs to
//! `n_{l+1}` outputs and stores its weights row-major (`n_{l+1} x n_l`)
//! followed by its `n_{l+1}` biases.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::softplus;
use crate::points::Points;
use crate::rng::RngStream;

use super::Posterior;

const MODEL_FORMAT: &str = "ratio-mc-mlp/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Per-dimension affine input transform `(x - mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    /// Sample mean and standard deviation; a zero spread keeps scale 1.
    pub fn fit(points: &Points) -> Self {
        let mean = points.mean();
        let scale = if points.len() > 1 {
            points
                .variance()
                .into_iter()
                .map(|v| if v > 0.0 && v.is_finite() { v.sqrt() } else { 1.0 })
                .collect()
        } else {
            vec![1.0; points.dim()]
        };
        Self { mean, scale }
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(x).zip(&self.mean).zip(&self.scale) {
            *o = (v - m) / s;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpClassifier {
    layer_sizes: Vec<usize>,
    activation: Activation,
    standardizer: Standardizer,
    params: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpClassifier {
    /// Glorot-uniform weights, zero biases, identity standardizer.
    pub fn new(layer_sizes: &[usize], activation: Activation, rng: &mut RngStream) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::invalid(format!("bad layer sizes {layer_sizes:?}")));
        }
        if *layer_sizes.last().unwrap() != 1 {
            return Err(Error::invalid("output layer must have width 1"));
        }
        let mut params = Vec::with_capacity(param_count(layer_sizes));
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| limit * (2.0 * rng.uniform() - 1.0)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self {
            standardizer: Standardizer::identity(layer_sizes[0]),
            layer_sizes: layer_sizes.to_vec(),
            activation,
            params,
        })
    }

    /// Logistic-regression baseline: no hidden layer.
    pub fn logistic(dim: usize, rng: &mut RngStream) -> Result<Self> {
        Self::new(&[dim, 1], Activation::Tanh, rng)
    }

    pub fn from_parts(
        layer_sizes: Vec<usize>,
        activation: Activation,
        standardizer: Standardizer,
        params: Vec<f64>,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) || *layer_sizes.last().unwrap() != 1 {
            return Err(Error::invalid(format!("bad layer sizes {layer_sizes:?}")));
        }
        if params.len() != param_count(&layer_sizes) {
            return Err(Error::DimensionMismatch {
                expected: param_count(&layer_sizes),
                found: params.len(),
            });
        }
        let d = layer_sizes[0];
        if standardizer.mean.len() != d || standardizer.scale.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: standardizer.mean.len(),
            });
        }
        if params.iter().chain(&standardizer.mean).chain(&standardizer.scale).any(|v| !v.is_finite())
            || standardizer.scale.contains(&0.0)
        {
            return Err(Error::invalid("model parameters must be finite, scales nonzero"));
        }
        Ok(Self {
            layer_sizes,
            activation,
            standardizer,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn set_standardizer(&mut self, s: Standardizer) {
        assert_eq!(s.mean.len(), self.input_dim());
        self.standardizer = s;
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Zeroes the output layer so that `forward` is exactly 0.5 everywhere.
    pub fn zero_output_layer(&mut self) {
        let fan_in = self.layer_sizes[self.layer_sizes.len() - 2];
        let n = self.params.len();
        self.params[n - fan_in - 1..].fill(0.0);
    }

    /// Offset of the output bias in the flat parameter vector.
    pub fn output_bias_index(&self) -> usize {
        self.params.len() - 1
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.posterior(x)
    }

    fn scratch(&self) -> Vec<Vec<f64>> {
        self.layer_sizes.iter().map(|&n| vec![0.0; n]).collect()
    }

    /// Fills `acts` with every layer's output; the last entry is the logit.
    fn forward_into(&self, x: &[f64], acts: &mut [Vec<f64>]) -> f64 {
        assert_eq!(x.len(), self.input_dim(), "input dimension");
        self.standardizer.apply_into(x, &mut acts[0]);
        let n_layers = self.layer_sizes.len() - 1;
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let (w, rest) = self.params[off..].split_at(n_in * n_out);
            let b = &rest[..n_out];
            let (prev, next) = acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut next[0];
            for j in 0..n_out {
                let row = &w[j * n_in..(j + 1) * n_in];
                let mut z = b[j];
                for (wi, ai) in row.iter().zip(input.iter()) {
                    z += wi * ai;
                }
                out[j] = if l + 1 < n_layers { self.activation.apply(z) } else { z };
            }
            off += n_in * n_out + n_out;
        }
        acts[n_layers][0]
    }

    /// Adds the gradient of the unclamped BCE on `(x, k)` to `grad` and
    /// returns that sample's loss. `deltas` is scratch shaped like `acts`.
    fn accumulate(
        &self,
        x: &[f64],
        k: u8,
        acts: &mut [Vec<f64>],
        deltas: &mut [Vec<f64>],
        grad: &mut [f64],
    ) -> f64 {
        let logit = self.forward_into(x, acts);
        let n_layers = self.layer_sizes.len() - 1;
        let loss = if k == 1 { softplus(-logit) } else { softplus(logit) };
        deltas[n_layers][0] = crate::linalg::sigmoid(logit) - k as f64;

        let mut off = self.params.len();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            off -= n_in * n_out + n_out;
            let w = &self.params[off..off + n_in * n_out];
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let (lower, upper) = deltas.split_at_mut(l + 1);
            let delta = &upper[0];
            let input = &acts[l];
            for j in 0..n_out {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                gb[j] += dj;
                for (g, a) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(input.iter()) {
                    *g += dj * a;
                }
            }
            if l > 0 {
                let prev = &mut lower[l];
                prev.fill(0.0);
                for j in 0..n_out {
                    let dj = delta[j];
                    if dj == 0.0 {
                        continue;
                    }
                    for (p, wi) in prev.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                        *p += dj * wi;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input.iter()) {
                    *p *= self.activation.derivative_from_output(*a);
                }
            }
        }
        loss
    }

    /// Unclamped BCE summed over the given rows, with its gradient written
    /// into `grad` (overwritten).
    pub fn loss_and_grad<'a>(
        &self,
        batch: impl IntoIterator<Item = (&'a [f64], u8)>,
        grad: &mut [f64],
    ) -> f64 {
        assert_eq!(grad.len(), self.params.len());
        grad.fill(0.0);
        let mut acts = self.scratch();
        let mut deltas = self.scratch();
        batch
            .into_iter()
            .map(|(x, k)| self.accumulate(x, k, &mut acts, &mut deltas, grad))
            .sum()
    }

    /// Unclamped BCE summed over `ds`.
    pub fn raw_loss(&self, ds: &LabeledDataset) -> f64 {
        let mut acts = self.scratch();
        ds.iter()
            .map(|(x, k)| {
                let l = self.forward_into(x, &mut acts);
                if k == 1 {
                    softplus(-l)
                } else {
                    softplus(l)
                }
            })
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(s)?;
        f.try_into()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

impl Posterior for MlpClassifier {
    fn logit(&self, x: &[f64]) -> f64 {
        let mut acts = self.scratch();
        self.forward_into(x, &mut acts)
    }
}

/// Gradient of the summed BCE over `batch` with respect to every parameter.
pub fn grad_bce(clf: &MlpClassifier, batch: &LabeledDataset) -> Vec<f64> {
    let mut g = vec![0.0; clf.n_params()];
    clf.loss_and_grad(batch.iter(), &mut g);
    g
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    layer_sizes: Vec<usize>,
    activation: Activation,
    standardizer: Standardizer,
    layers: Vec<LayerFile>,
}

impl From<&MlpClassifier> for ModelFile {
    fn from(m: &MlpClassifier) -> Self {
        let mut layers = Vec::new();
        let mut off = 0;
        for w in m.layer_sizes.windows(2) {
            let nw = w[0] * w[1];
            layers.push(LayerFile {
                weights: m.params[off..off + nw].to_vec(),
                biases: m.params[off + nw..off + nw + w[1]].to_vec(),
            });
            off += nw + w[1];
        }
        ModelFile {
            format: MODEL_FORMAT.into(),
            layer_sizes: m.layer_sizes.clone(),
            activation: m.activation,
            standardizer: m.standardizer.clone(),
            layers,
        }
    }
}

impl TryFrom<ModelFile> for MlpClassifier {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.format != MODEL_FORMAT {
            return Err(Error::invalid(format!("unknown model format `{}`", f.format)));
        }
        if f.layers.len() + 1 != f.layer_sizes.len() {
            return Err(Error::invalid("layer count does not match layer_sizes"));
        }
        let mut params = Vec::new();
        for (layer, w) in f.layers.iter().zip(f.layer_sizes.windows(2)) {
            if layer.weights.len() != w[0] * w[1] || layer.biases.len() != w[1] {
                return Err(Error::DimensionMismatch {
                    expected: w[0] * w[1],
                    found: layer.weights.len(),
                });
            }
            params.extend_from_slice(&layer.weights);
            params.extend_from_slice(&layer.biases);
        }
        MlpClassifier::from_parts(f.layer_sizes, f.activation, f.standardizer, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::create_rng;

    fn net(sizes: &[usize], act: Activation, seed: u64) -> MlpClassifier {
        MlpClassifier::new(sizes, act, &mut create_rng(seed, 0)).unwrap()
    }

    fn random_batch(d: usize, n: usize, seed: u64) -> LabeledDataset {
        let mut rng = create_rng(seed, 9);
        let mut pts = Points::new(d);
        let mut labels = Vec::new();
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| 1.5 * rng.normal()).collect();
            pts.push(&x);
            labels.push((rng.uniform() < 0.5) as u8);
        }
        LabeledDataset::new(pts, labels).unwrap()
    }

    #[test]
    fn zero_output_layer_gives_half() {
        let mut m = net(&[2, 8, 8, 1], Activation::Tanh, 1);
        m.zero_output_layer();
        for x in [[0.0, 0.0], [3.0, -7.0], [1e3, 2e-3]] {
            assert_eq!(m.forward(&x), 0.5);
        }
    }

    #[test]
    fn forward_is_deterministic_and_in_range() {
        let m = net(&[3, 16, 1], Activation::Relu, 2);
        let x = [0.3, -1.0, 2.0];
        assert_eq!(m.forward(&x).to_bits(), m.forward(&x).to_bits());
        assert!((0.0..=1.0).contains(&m.forward(&x)));
        let big = [1e4, -1e4, 1e4];
        let r = m.forward(&big);
        assert!((0.0..=1.0).contains(&r) && r.is_finite());
    }

    #[test]
    fn output_gradient_is_r_minus_k() {
        let mut m = net(&[1, 4, 1], Activation::Tanh, 3);
        m.zero_output_layer();
        let ds = LabeledDataset::new(Points::from_scalars(&[0.7]), vec![1]).unwrap();
        let g = grad_bce(&m, &ds);
        assert_eq!(g[m.output_bias_index()], -0.5);
    }

    #[test]
    fn symmetric_batch_has_zero_output_bias_gradient() {
        // Odd network (tanh, zero biases), zero output layer, and each point
        // x with label 1 paired with -x labeled 0.
        let mut m = net(&[2, 6, 1], Activation::Tanh, 4);
        m.zero_output_layer();
        let pts = Points::from_rows(2, &[[1.0, 0.5], [-1.0, -0.5], [0.2, -2.0], [-0.2, 2.0]]).unwrap();
        let ds = LabeledDataset::new(pts, vec![1, 0, 1, 0]).unwrap();
        let g = grad_bce(&m, &ds);
        assert_eq!(g[m.output_bias_index()], 0.0);
    }

    fn finite_difference_check(m: &mut MlpClassifier, ds: &LabeledDataset) -> f64 {
        let g = grad_bce(m, ds);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..m.n_params() {
            let orig = m.params()[i];
            m.params_mut()[i] = orig + h;
            let up = m.raw_loss(ds);
            m.params_mut()[i] = orig - h;
            let down = m.raw_loss(ds);
            m.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let err = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-3);
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (seed, act) in [(10, Activation::Tanh), (11, Activation::Relu)] {
            let mut m = net(&[2, 7, 5, 1], act, seed);
            for (i, p) in m.params_mut().iter_mut().enumerate() {
                *p += 0.05 * ((i % 7) as f64 - 3.0);
            }
            m.set_standardizer(Standardizer {
                mean: vec![0.1, -0.2],
                scale: vec![1.3, 0.8],
            });
            let ds = random_batch(2, 12, seed);
            let err = finite_difference_check(&mut m, &ds);
            assert!(err < 1e-4, "{act:?}: {err}");
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut m = net(&[2, 5, 1], Activation::Relu, 5);
        m.set_standardizer(Standardizer {
            mean: vec![0.1 + 0.2, std::f64::consts::PI],
            scale: vec![1.0 / 3.0, 7.0],
        });
        let back = MlpClassifier::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(m.to_json().unwrap().contains("\"activation\": \"relu\""));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(MlpClassifier::new(&[2, 3, 2], Activation::Tanh, &mut create_rng(0, 0)).is_err());
        assert!(MlpClassifier::new(&[2], Activation::Tanh, &mut create_rng(0, 0)).is_err());
        let bad = r#"{"format":"ratio-mc-mlp/1","layer_sizes":[1,1],"activation":"tanh",
            "standardizer":{"mean":[0],"scale":[1]},"layers":[{"weights":[1,2],"biases":[0]}]}"#;
        assert!(MlpClassifier::from_json(bad).is_err());
    }

    #[test]
    fn logistic_baseline_shape() {
        let m = MlpClassifier::logistic(3, &mut create_rng(0, 0)).unwrap();
        assert_eq!(m.n_params(), 4);
    }
}
