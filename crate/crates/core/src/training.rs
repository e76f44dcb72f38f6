//! Source-domain pretraining, few-shot transfer fine-tuning with frozen
//! parameter groups, and repeated transfer runs.
//!
//! Gradients inside a mini-batch may be computed in parallel over fixed
//! chunks, but they are always summed in the same order, so parallel and
//! single-threaded runs produce the same bits.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split_labeled, BeamSnrSample, Dataset, Domain, SplitSize};
use crate::evaluation::{accuracy, mean_std};
use crate::model::{ModelKind, ParamGroup, Trainable};
use crate::neural::{AdamW, AdamWConfig};
use crate::rng::{self, derive_seed, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: AdamWConfig,
    pub seed: u64,
    /// Compute per-sample gradients on the calling thread only.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            epochs: 100,
            optimizer: AdamWConfig::default(),
            seed: 0,
            deterministic: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        let o = &self.optimizer;
        if !(o.lr >= 0.0 && o.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be finite and ≥ 0", o.lr)));
        }
        if !(o.weight_decay >= 0.0 && o.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight decay {} must be finite and ≥ 0", o.weight_decay)));
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            return Err(Error::Config("betas must lie in [0, 1)".into()));
        }
        if o.eps.is_nan() || o.eps <= 0.0 {
            return Err(Error::Config("eps must be positive".into()));
        }
        Ok(())
    }
}

/// Parameter groups held fixed during fine-tuning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreezePolicy {
    pub frozen: Vec<ParamGroup>,
}

impl FreezePolicy {
    /// Input and output layers frozen: only the circuit angles (QNN) or the
    /// residual blocks (DNN) adapt.
    pub fn default_for(kind: ModelKind) -> Result<Self> {
        match kind {
            ModelKind::Dnn | ModelKind::Qnn => Ok(Self {
                frozen: vec![ParamGroup::InputLayer, ParamGroup::OutputLayer],
            }),
            other => Err(Error::Config(format!("{other} is not fine-tuned by gradient descent"))),
        }
    }

    pub fn none() -> Self {
        Self { frozen: Vec::new() }
    }

    /// Per-parameter trainable mask for `model`.
    pub fn mask<M: Trainable>(&self, model: &M) -> Result<Vec<bool>> {
        let groups = model.param_groups();
        for g in &self.frozen {
            if !groups.iter().any(|(have, _)| have == g) {
                return Err(Error::Config(format!("{} model has no {g:?} group", model.kind())));
            }
        }
        let mut mask = vec![true; model.params().len()];
        for (group, range) in groups {
            if self.frozen.contains(&group) {
                mask[range].fill(false);
            }
        }
        if !mask.iter().any(|&t| t) {
            return Err(Error::Config("freeze policy leaves no trainable parameters".into()));
        }
        Ok(mask)
    }
}

/// How repeated transfer runs differ from each other.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepeatMode {
    /// Draw a new few-shot subset and a new shuffle order per repeat.
    #[default]
    Resample,
    /// Keep one subset; only the shuffle order changes.
    Reshuffle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    /// Labelled target samples used for fine-tuning.
    pub samples: SplitSize,
    pub epochs: usize,
    pub freeze: FreezePolicy,
    pub repeat_mode: RepeatMode,
}

impl TransferConfig {
    pub fn new(kind: ModelKind, samples: SplitSize) -> Result<Self> {
        Ok(Self {
            samples,
            epochs: 50,
            freeze: FreezePolicy::default_for(kind)?,
            repeat_mode: RepeatMode::Resample,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the per-batch mean losses.
    pub loss: f64,
    /// Accuracy on the evaluation set after the epoch, or the running
    /// training accuracy when no evaluation set is given.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    pub optimizer_steps: u64,
}

/// Samples per gradient accumulator. Chunk boundaries do not depend on the
/// thread count, so the summation order is fixed.
const CHUNK: usize = 10;

/// Summed loss, summed gradient and correct count over one chunk.
fn chunk_gradient<M: Trainable>(model: &M, chunk: &[&BeamSnrSample]) -> Result<(f64, Vec<f64>, usize)> {
    let mut grad = vec![0.0; model.params().len()];
    let mut loss = 0.0;
    let mut correct = 0;
    for s in chunk {
        let (l, predicted) = model.accumulate_gradient(&s.features, s.label, &mut grad)?;
        loss += l;
        correct += usize::from(predicted == s.label);
    }
    Ok((loss, grad, correct))
}

/// Mean loss, mean gradient and correct count over one batch.
fn batch_gradient<M: Trainable>(
    model: &M,
    batch: &[&BeamSnrSample],
    deterministic: bool,
) -> Result<(f64, Vec<f64>, usize)> {
    let parts: Vec<(f64, Vec<f64>, usize)> = if deterministic || batch.len() <= CHUNK {
        batch.chunks(CHUNK).map(|c| chunk_gradient(model, c)).collect::<Result<_>>()?
    } else {
        batch.par_chunks(CHUNK).map(|c| chunk_gradient(model, c)).collect::<Result<_>>()?
    };
    let mut parts = parts.into_iter();
    let (mut loss, mut grad, mut correct) = parts.next().expect("non-empty batch");
    for (l, g, c) in parts {
        loss += l;
        correct += c;
        grad.iter_mut().zip(&g).for_each(|(acc, v)| *acc += v);
    }
    let scale = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|v| *v *= scale);
    Ok((loss * scale, grad, correct))
}

#[allow(clippy::too_many_arguments)]
fn run_epochs<M: Trainable>(
    model: &mut M,
    samples: &[&BeamSnrSample],
    eval: Option<&[&BeamSnrSample]>,
    epochs: usize,
    batch_size: usize,
    optimizer: &mut AdamW,
    mask: Option<&[bool]>,
    shuffle_seed: u64,
    deterministic: bool,
) -> Result<TrainTrace> {
    let mut shuffle = rng::stream(shuffle_seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut trace = TrainTrace::default();
    let mut batch: Vec<&BeamSnrSample> = Vec::with_capacity(batch_size);
    for epoch in 0..epochs {
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        let mut correct = 0usize;
        for chunk in order.chunks(batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| samples[i]));
            let (loss, grad, c) = batch_gradient(model, &batch, deterministic)?;
            optimizer.step(model.params_mut(), &grad, mask)?;
            loss_sum += loss;
            n_batches += 1;
            correct += c;
        }
        let accuracy = match eval {
            Some(set) if !set.is_empty() => accuracy(model, set)?,
            _ => correct as f64 / samples.len() as f64,
        };
        trace.epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / n_batches as f64,
            accuracy,
        });
    }
    trace.optimizer_steps = optimizer.steps();
    Ok(trace)
}

/// Trains every parameter of `model` on labelled samples with shuffled
/// mini-batches and AdamW. The last short batch is kept.
pub fn pretrain<M: Trainable>(
    model: &mut M,
    samples: &[&BeamSnrSample],
    eval: Option<&[&BeamSnrSample]>,
    config: &TrainConfig,
) -> Result<TrainTrace> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Validation("pretraining set is empty".into()));
    }
    let mut optimizer = AdamW::new(config.optimizer, model.params().len());
    run_epochs(
        model,
        samples,
        eval,
        config.epochs,
        config.batch_size,
        &mut optimizer,
        None,
        config.seed,
        config.deterministic,
    )
}

/// Fine-tunes the unfrozen groups of a pretrained model on few-shot target
/// samples. Frozen parameters keep their exact values. The optimizer starts
/// from fresh moments.
pub fn transfer_finetune<M: Trainable>(
    model: &mut M,
    samples: &[&BeamSnrSample],
    eval: Option<&[&BeamSnrSample]>,
    transfer: &TransferConfig,
    train: &TrainConfig,
) -> Result<TrainTrace> {
    train.validate()?;
    let mask = transfer.freeze.mask(model)?;
    if samples.is_empty() {
        return Err(Error::Validation("fine-tuning set is empty".into()));
    }
    let mut optimizer = AdamW::new(train.optimizer, model.params().len());
    run_epochs(
        model,
        samples,
        eval,
        transfer.epochs,
        train.batch_size,
        &mut optimizer,
        Some(&mask),
        train.seed,
        train.deterministic,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRun {
    pub split_seed: u64,
    pub shuffle_seed: u64,
    pub n_transfer: usize,
    pub n_eval: usize,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedTransfer {
    pub runs: Vec<TransferRun>,
    pub mean_before: f64,
    pub std_before: f64,
    pub mean_after: f64,
    pub std_after: f64,
}

impl RepeatedTransfer {
    pub fn mean_gain(&self) -> f64 {
        self.mean_after - self.mean_before
    }
}

/// Seeds for repeat `r`: (split, shuffle).
pub fn repeat_seeds(seed: u64, n_repeats: usize, mode: RepeatMode) -> Vec<(u64, u64)> {
    (0..n_repeats as u64)
        .map(|r| {
            let shuffle = derive_seed(seed, 2 * r + 1);
            let split = match mode {
                RepeatMode::Resample => derive_seed(seed, 2 * r),
                RepeatMode::Reshuffle => derive_seed(seed, 0),
            };
            (split, shuffle)
        })
        .collect()
}

/// Repeats few-shot fine-tuning from the same pretrained model. Each
/// repeat is scored on the target samples outside its fine-tuning subset.
pub fn run_repeated<M: Trainable>(
    pretrained: &M,
    dataset: &Dataset,
    transfer: &TransferConfig,
    train: &TrainConfig,
    n_repeats: usize,
) -> Result<RepeatedTransfer> {
    if n_repeats == 0 {
        return Err(Error::Validation("n_repeats must be at least 1".into()));
    }
    let seeds = repeat_seeds(train.seed, n_repeats, transfer.repeat_mode);
    run_repeated_with_seeds(pretrained, dataset, transfer, train, &seeds)
}

/// [`run_repeated`] with explicit (split, shuffle) seeds per repeat.
pub fn run_repeated_with_seeds<M: Trainable>(
    pretrained: &M,
    dataset: &Dataset,
    transfer: &TransferConfig,
    train: &TrainConfig,
    seeds: &[(u64, u64)],
) -> Result<RepeatedTransfer> {
    if seeds.is_empty() {
        return Err(Error::Validation("n_repeats must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(seeds.len());
    for &(split_seed, shuffle_seed) in seeds {
        runs.push(finetune_once(pretrained, dataset, transfer, train, split_seed, shuffle_seed)?.1);
    }
    Ok(summarize_runs(runs))
}

/// One transfer repeat: draws the few-shot subset with `split_seed`,
/// fine-tunes a copy of `pretrained` and scores it on the remaining target
/// samples.
pub fn finetune_once<M: Trainable>(
    pretrained: &M,
    dataset: &Dataset,
    transfer: &TransferConfig,
    train: &TrainConfig,
    split_seed: u64,
    shuffle_seed: u64,
) -> Result<(M, TransferRun)> {
    let split = split_labeled(dataset, Domain::Target, transfer.samples, split_seed)?;
    let few_shot = dataset.select(&split.labeled);
    let held_out = dataset.select(&split.eval);
    if held_out.is_empty() {
        return Err(Error::Validation("no target samples left for evaluation".into()));
    }
    let accuracy_before = accuracy(pretrained, &held_out)?;
    let mut model = pretrained.clone();
    let cfg = TrainConfig {
        seed: shuffle_seed,
        ..*train
    };
    transfer_finetune(&mut model, &few_shot, None, transfer, &cfg)?;
    let run = TransferRun {
        split_seed,
        shuffle_seed,
        n_transfer: few_shot.len(),
        n_eval: held_out.len(),
        accuracy_before,
        accuracy_after: accuracy(&model, &held_out)?,
    };
    Ok((model, run))
}

/// Aggregates per-repeat results (population standard deviation).
pub fn summarize_runs(runs: Vec<TransferRun>) -> RepeatedTransfer {
    let before: Vec<f64> = runs.iter().map(|r| r.accuracy_before).collect();
    let after: Vec<f64> = runs.iter().map(|r| r.accuracy_after).collect();
    let (mean_before, std_before) = mean_std(&before);
    let (mean_after, std_after) = mean_std(&after);
    RepeatedTransfer {
        runs,
        mean_before,
        std_before,
        mean_after,
        std_after,
    }
}
