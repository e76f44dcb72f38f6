//! Model construction from a kind plus configs, and run metadata documents.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{GnbModel, KnnModel};
use crate::checkpoint::AnyModel;
use crate::data::{generate_synthetic, BeamSnrSample, Dataset, FeatureNormalizer, ShiftSpec};
use crate::model::{ModelKind, Trainable};
use crate::neural::{DnnConfig, DnnModel};
use crate::quantum_classifier::{DressedQnn, QnnConfig};
use crate::rng::{self, Stream};
use crate::training::{pretrain, transfer_finetune, TrainConfig, TrainTrace, TransferConfig};
use crate::{Error, Result};

pub const METADATA_FORMAT_VERSION: u32 = 1;

/// The seeded synthetic setup used for the reference tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub n_source: usize,
    pub n_target: usize,
    pub shift: ShiftSpec,
    /// Labelled source samples for pretraining; the rest score in-domain
    /// accuracy.
    pub source_labels: usize,
    /// Labelled target samples per fine-tuning repeat (10 % of the target
    /// domain).
    pub transfer_samples: usize,
    pub repeats: usize,
    /// Seed for splits, initialisation and shuffling.
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            n_source: 2000,
            n_target: 1040,
            shift: ShiftSpec::default(),
            source_labels: 1000,
            transfer_samples: 104,
            repeats: 5,
            seed: 0,
        }
    }
}

impl FixtureSpec {
    pub fn dataset(&self) -> Result<Dataset> {
        generate_synthetic(self.n_source, self.n_target, self.shift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub dnn: DnnConfig,
    pub qnn: QnnConfig,
    pub knn_k: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            dnn: DnnConfig::default(),
            qnn: QnnConfig::default(),
            knn_k: KnnModel::DEFAULT_K,
        }
    }
}

/// Fits a normalizer on `samples`, initialises the model from the config
/// seed and trains it. Baselines are fitted directly and return no trace.
pub fn train_model(
    spec: &ModelSpec,
    samples: &[&BeamSnrSample],
    eval: Option<&[&BeamSnrSample]>,
    config: &TrainConfig,
) -> Result<(AnyModel, Option<TrainTrace>)> {
    if samples.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    let normalizer = FeatureNormalizer::fit_samples(samples)?;
    let mut init = rng::stream(config.seed, Stream::Init);
    Ok(match spec.kind {
        ModelKind::Dnn => {
            let mut m = DnnModel::new(spec.dnn, normalizer, &mut init)?;
            let trace = pretrain(&mut m, samples, eval, config)?;
            (AnyModel::Dnn(m), Some(trace))
        }
        ModelKind::Qnn => {
            let mut m = DressedQnn::new(spec.qnn, normalizer, &mut init)?;
            let trace = pretrain(&mut m, samples, eval, config)?;
            (AnyModel::Qnn(m), Some(trace))
        }
        ModelKind::Knn => (AnyModel::Knn(KnnModel::fit_samples(samples, spec.knn_k, normalizer)?), None),
        ModelKind::Gnb => (AnyModel::Gnb(GnbModel::fit_samples(samples, normalizer)?), None),
    })
}

/// Fine-tunes a gradient-trained model in place.
pub fn finetune_model(
    model: &mut AnyModel,
    samples: &[&BeamSnrSample],
    transfer: &TransferConfig,
    config: &TrainConfig,
) -> Result<TrainTrace> {
    match model {
        AnyModel::Dnn(m) => transfer_finetune(m, samples, None, transfer, config),
        AnyModel::Qnn(m) => transfer_finetune(m, samples, None, transfer, config),
        other => Err(Error::Config(format!(
            "{} models cannot be fine-tuned",
            crate::model::Classifier::kind(other)
        ))),
    }
}

/// Number of trainable circuit angles, for QNN models.
pub fn quantum_param_count(model: &AnyModel) -> Option<usize> {
    match model {
        AnyModel::Qnn(m) => Some(m.quantum_param_count()),
        _ => None,
    }
}

/// Total learnable parameter count, for gradient-trained models.
pub fn param_count(model: &AnyModel) -> Option<usize> {
    match model {
        AnyModel::Dnn(m) => Some(m.params().len()),
        AnyModel::Qnn(m) => Some(m.params().len()),
        _ => None,
    }
}

/// Everything needed to repeat a run, plus its headline metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub format_version: u32,
    pub command: String,
    pub seed: u64,
    pub deterministic: bool,
    /// Git-style blob hash of the dataset CSV.
    pub dataset_hash: String,
    pub model: Option<ModelSpec>,
    pub train: Option<TrainConfig>,
    pub transfer: Option<TransferConfig>,
    /// Command-specific settings (paths, grids, repeat counts).
    pub settings: serde_json::Value,
    pub metrics: serde_json::Value,
}

impl RunMetadata {
    pub fn new(command: &str, seed: u64, deterministic: bool, dataset_hash: String) -> Self {
        Self {
            format_version: METADATA_FORMAT_VERSION,
            command: command.to_string(),
            seed,
            deterministic,
            dataset_hash,
            model: None,
            train: None,
            transfer: None,
            settings: serde_json::Value::Null,
            metrics: serde_json::Value::Null,
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("metadata values are plain JSON");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
