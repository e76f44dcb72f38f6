//! Classical building blocks: Mish, affine layers, the residual DNN,
//! softmax cross-entropy and AdamW.
//!
//! Parameters of every model are kept in a single flat `Vec<f64>` so that the
//! optimiser, freeze masks and checkpoints all share one layout. Weight
//! matrices are row-major `out × in`.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::FeatureNormalizer;
use crate::model::{argmax, Classifier, ModelKind, ParamGroup, SampleGradient, Trainable};
use crate::{Error, Result, N_BEAMS, N_CLASSES};

const SOFTPLUS_LINEAR_ABOVE: f64 = 20.0;

/// ln(1 + eˣ), returning `x` directly once eˣ dwarfs 1.
pub fn softplus(x: f64) -> f64 {
    if x > SOFTPLUS_LINEAR_ABOVE {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Mish activation, x·tanh(softplus(x)).
pub fn mish(x: f64) -> f64 {
    x * softplus(x).tanh()
}

/// d/dx mish(x) = tanh(sp) + x·sech²(sp)·σ(x).
pub fn mish_derivative(x: f64) -> f64 {
    let t = softplus(x).tanh();
    let sigmoid = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    t + x * (1.0 - t * t) * sigmoid
}

/// `out = W·x + b` for row-major `W` of shape `out.len() × x.len()`.
pub fn affine(weights: &[f64], bias: &[f64], x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(weights.len(), out.len() * x.len());
    for ((o, row), b) in out.iter_mut().zip(weights.chunks_exact(x.len())).zip(bias) {
        *o = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
}

/// Accumulates the gradient of an affine map: `dW += dy ⊗ x`, `db += dy`,
/// and, when requested, `dx = Wᵀ·dy`.
pub fn affine_backward(
    weights: &[f64],
    x: &[f64],
    dy: &[f64],
    dweights: &mut [f64],
    dbias: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    for ((drow, g), db) in dweights.chunks_exact_mut(x.len()).zip(dy).zip(dbias.iter_mut()) {
        *db += g;
        for (dw, v) in drow.iter_mut().zip(x) {
            *dw += g * v;
        }
    }
    if let Some(dx) = dx {
        dx.iter_mut().for_each(|v| *v = 0.0);
        for (row, g) in weights.chunks_exact(x.len()).zip(dy) {
            for (d, w) in dx.iter_mut().zip(row) {
                *d += g * w;
            }
        }
    }
}

/// Fills `weights` and `bias` from uniform(±1/√fan_in).
pub(crate) fn init_affine<R: Rng>(rng: &mut R, fan_in: usize, weights: &mut [f64], bias: &mut [f64]) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    weights.iter_mut().chain(bias.iter_mut()).for_each(|p| *p = dist.sample(rng));
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Returns `(loss, dloss/dlogits)` with loss = logsumexp(logits) − logits[label].
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::Validation(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let loss = (max + sum_exp.ln() - logits[label]).max(0.0);
    let mut grad: Vec<f64> = logits.iter().map(|l| (l - max).exp() / sum_exp).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DnnConfig {
    pub n_features: usize,
    pub hidden: usize,
    /// Residual blocks after the input projection.
    pub n_blocks: usize,
    pub n_classes: usize,
}

impl Default for DnnConfig {
    fn default() -> Self {
        Self {
            n_features: N_BEAMS,
            hidden: 100,
            n_blocks: 3,
            n_classes: N_CLASSES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dense {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl Dense {
    fn weights(&self) -> Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    fn bias(&self) -> Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }

    fn end(&self) -> usize {
        self.offset + (self.fan_in + 1) * self.fan_out
    }
}

fn dnn_layers(config: &DnnConfig) -> Vec<Dense> {
    let mut shapes = vec![(config.n_features, config.hidden)];
    shapes.extend(std::iter::repeat_n((config.hidden, config.hidden), config.n_blocks));
    shapes.push((config.hidden, config.n_classes));
    let mut offset = 0;
    shapes
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let layer = Dense {
                fan_in,
                fan_out,
                offset,
            };
            offset = layer.end();
            layer
        })
        .collect()
}

/// Residual MLP: Mish(input projection), then `n_blocks` blocks
/// `h ← h + Mish(W·h + b)`, then a raw affine output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DnnModel {
    config: DnnConfig,
    layers: Vec<Dense>,
    params: Vec<f64>,
    normalizer: FeatureNormalizer,
}

impl DnnModel {
    pub fn parameter_count(config: &DnnConfig) -> usize {
        dnn_layers(config).last().map_or(0, Dense::end)
    }

    /// All weights and biases zero.
    pub fn zeroed(config: DnnConfig, normalizer: FeatureNormalizer) -> Result<Self> {
        if config.n_features == 0 || config.hidden == 0 || config.n_classes < 2 {
            return Err(Error::Config(format!("degenerate DNN shape {config:?}")));
        }
        if normalizer.dim() != config.n_features {
            return Err(Error::Config(format!(
                "normalizer has {} features, model expects {}",
                normalizer.dim(),
                config.n_features
            )));
        }
        let layers = dnn_layers(&config);
        let params = vec![0.0; layers.last().map_or(0, Dense::end)];
        Ok(Self {
            config,
            layers,
            params,
            normalizer,
        })
    }

    /// Layers initialised from uniform(±1/√fan_in).
    pub fn new<R: Rng>(config: DnnConfig, normalizer: FeatureNormalizer, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeroed(config, normalizer)?;
        for layer in model.layers.clone() {
            let (w, b) = model.params[layer.offset..layer.end()].split_at_mut(layer.fan_in * layer.fan_out);
            init_affine(rng, layer.fan_in, w, b);
        }
        Ok(model)
    }

    pub(crate) fn from_parts(config: DnnConfig, normalizer: FeatureNormalizer, params: Vec<f64>) -> Result<Self> {
        let mut model = Self::zeroed(config, normalizer)?;
        if params.len() != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "DNN expects {} parameters, document has {}",
                model.params.len(),
                params.len()
            )));
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &DnnConfig {
        &self.config
    }

    pub fn normalizer(&self) -> &FeatureNormalizer {
        &self.normalizer
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Output-layer bias, i.e. the logits of an all-zero network.
    pub fn output_bias(&self) -> &[f64] {
        &self.params[self.layers.last().expect("output layer").bias()]
    }

    fn layer_weights(&self, layer: &Dense) -> &[f64] {
        &self.params[layer.weights()]
    }

    fn layer_bias(&self, layer: &Dense) -> &[f64] {
        &self.params[layer.bias()]
    }

    /// Forward pass keeping the pre-activations and hidden states needed by
    /// backpropagation.
    fn forward_cached(&self, features: &[f64]) -> Result<DnnTape> {
        let input = self.normalizer.apply(features)?;
        let hidden = self.config.hidden;
        let mut pre = Vec::with_capacity(self.config.n_blocks + 1);
        let mut states = Vec::with_capacity(self.config.n_blocks + 1);

        let first = &self.layers[0];
        let mut z = vec![0.0; hidden];
        affine(self.layer_weights(first), self.layer_bias(first), &input, &mut z);
        let h: Vec<f64> = z.iter().map(|&v| mish(v)).collect();
        pre.push(z);
        states.push(h);

        for block in &self.layers[1..=self.config.n_blocks] {
            let h = states.last().expect("hidden state");
            let mut z = vec![0.0; hidden];
            affine(self.layer_weights(block), self.layer_bias(block), h, &mut z);
            let next: Vec<f64> = h.iter().zip(&z).map(|(h, &z)| h + mish(z)).collect();
            pre.push(z);
            states.push(next);
        }

        let output = self.layers.last().expect("output layer");
        let mut logits = vec![0.0; self.config.n_classes];
        affine(
            self.layer_weights(output),
            self.layer_bias(output),
            states.last().expect("hidden state"),
            &mut logits,
        );
        Ok(DnnTape {
            input,
            pre,
            states,
            logits,
        })
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(features)?.logits)
    }

    /// Adds the gradient of the loss with respect to every parameter into
    /// `grad`, given `dlogits = dloss/dlogits`.
    fn backward(&self, tape: &DnnTape, dlogits: &[f64], grad: &mut [f64]) {
        let n_blocks = self.config.n_blocks;
        let hidden = self.config.hidden;

        let output = self.layers.last().expect("output layer");
        let mut dh = vec![0.0; hidden];
        {
            let (gw, gb) = grad[output.offset..output.end()].split_at_mut(output.fan_in * output.fan_out);
            affine_backward(
                self.layer_weights(output),
                &tape.states[n_blocks],
                dlogits,
                gw,
                gb,
                Some(&mut dh),
            );
        }

        let mut dx = vec![0.0; hidden];
        for k in (1..=n_blocks).rev() {
            let block = &self.layers[k];
            let dz: Vec<f64> = dh.iter().zip(&tape.pre[k]).map(|(g, &z)| g * mish_derivative(z)).collect();
            let (gw, gb) = grad[block.offset..block.end()].split_at_mut(block.fan_in * block.fan_out);
            affine_backward(self.layer_weights(block), &tape.states[k - 1], &dz, gw, gb, Some(&mut dx));
            dh.iter_mut().zip(&dx).for_each(|(g, d)| *g += d);
        }

        let first = &self.layers[0];
        let dz: Vec<f64> = dh.iter().zip(&tape.pre[0]).map(|(g, &z)| g * mish_derivative(z)).collect();
        let (gw, gb) = grad[first.offset..first.end()].split_at_mut(first.fan_in * first.fan_out);
        affine_backward(self.layer_weights(first), &tape.input, &dz, gw, gb, None);
    }
}

struct DnnTape {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    states: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

impl Classifier for DnnModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Dnn
    }

    fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    fn class_scores(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward(features)?))
    }
}

impl Trainable for DnnModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn param_groups(&self) -> Vec<(ParamGroup, Range<usize>)> {
        let first = self.layers[0].end();
        let output = self.layers.last().expect("output layer");
        vec![
            (ParamGroup::InputLayer, 0..first),
            (ParamGroup::HiddenBlocks, first..output.offset),
            (ParamGroup::OutputLayer, output.offset..output.end()),
        ]
    }

    fn sample_gradient(&self, features: &[f64], label: usize) -> Result<SampleGradient> {
        let tape = self.forward_cached(features)?;
        let (loss, dlogits) = softmax_cross_entropy(&tape.logits, label)?;
        let mut grad = vec![0.0; self.params.len()];
        self.backward(&tape, &dlogits, &mut grad);
        Ok(SampleGradient {
            loss,
            grad,
            predicted: argmax(&tape.logits),
        })
    }

    fn accumulate_gradient(&self, features: &[f64], label: usize, grad: &mut [f64]) -> Result<(f64, usize)> {
        if grad.len() != self.params.len() {
            return Err(Error::Validation(format!(
                "gradient buffer holds {} entries, model has {}",
                grad.len(),
                self.params.len()
            )));
        }
        let tape = self.forward_cached(features)?;
        let (loss, dlogits) = softmax_cross_entropy(&tape.logits, label)?;
        self.backward(&tape, &dlogits, grad);
        Ok((loss, argmax(&tape.logits)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 0.02,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// AdamW with decoupled weight decay and bias-corrected moments:
///
/// ```text
/// m ← β₁m + (1−β₁)g        v ← β₂v + (1−β₂)g²
/// p ← p − lr·m̂/(√v̂ + ε) − lr·wd·p
/// ```
///
/// Entries excluded by the trainable mask keep their value and moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    config: AdamWConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
}

impl AdamW {
    pub fn new(config: AdamWConfig, n_params: usize) -> Self {
        Self {
            config,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamWConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// One update. `trainable[i] == false` freezes entry `i`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], trainable: Option<&[bool]>) -> Result<()> {
        let n = self.first_moment.len();
        if params.len() != n || grads.len() != n || trainable.is_some_and(|m| m.len() != n) {
            return Err(Error::Validation(format!(
                "optimizer tracks {n} parameters, got params {} / grads {} / mask {:?}",
                params.len(),
                grads.len(),
                trainable.map(<[bool]>::len)
            )));
        }
        self.step += 1;
        let AdamWConfig {
            lr,
            weight_decay,
            beta1,
            beta2,
            eps,
        } = self.config;
        let correction1 = 1.0 - beta1.powf(self.step as f64);
        let correction2 = 1.0 - beta2.powf(self.step as f64);
        for i in 0..n {
            if trainable.is_some_and(|m| !m[i]) {
                continue;
            }
            let g = grads[i];
            let m = beta1 * self.first_moment[i] + (1.0 - beta1) * g;
            let v = beta2 * self.second_moment[i] + (1.0 - beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / correction1;
            let v_hat = v / correction2;
            let p = params[i];
            params[i] = p - lr * (m_hat / (v_hat.sqrt() + eps)) - lr * weight_decay * p;
        }
        Ok(())
    }
}
