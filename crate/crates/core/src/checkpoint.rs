//! JSON checkpoints for every model kind, and a type-erased model wrapper.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{GnbModel, KnnModel};
use crate::data::FeatureNormalizer;
use crate::model::{Classifier, ModelKind};
use crate::neural::{DnnConfig, DnnModel};
use crate::quantum_classifier::{DressedQnn, QnnConfig};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Body {
    Dnn {
        config: DnnConfig,
        normalizer: FeatureNormalizer,
        params: Vec<f64>,
    },
    Qnn {
        config: QnnConfig,
        normalizer: FeatureNormalizer,
        params: Vec<f64>,
    },
    Knn {
        model: KnnModel,
    },
    Gnb {
        model: GnbModel,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct Document {
    format_version: u32,
    #[serde(flatten)]
    body: Body,
}

/// Any trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Dnn(DnnModel),
    Qnn(DressedQnn),
    Knn(KnnModel),
    Gnb(GnbModel),
}

impl AnyModel {
    pub fn to_json(&self) -> String {
        let body = match self {
            AnyModel::Dnn(m) => Body::Dnn {
                config: *m.config(),
                normalizer: m.normalizer().clone(),
                params: crate::model::Trainable::params(m).to_vec(),
            },
            AnyModel::Qnn(m) => Body::Qnn {
                config: *m.config(),
                normalizer: m.normalizer().clone(),
                params: crate::model::Trainable::params(m).to_vec(),
            },
            AnyModel::Knn(m) => Body::Knn { model: m.clone() },
            AnyModel::Gnb(m) => Body::Gnb { model: m.clone() },
        };
        let doc = Document {
            format_version: CHECKPOINT_FORMAT_VERSION,
            body,
        };
        serde_json::to_string(&doc).expect("checkpoint values are finite")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if doc.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint format version {}",
                doc.format_version
            )));
        }
        Ok(match doc.body {
            Body::Dnn {
                config,
                normalizer,
                params,
            } => AnyModel::Dnn(DnnModel::from_parts(config, normalizer, params)?),
            Body::Qnn {
                config,
                normalizer,
                params,
            } => AnyModel::Qnn(DressedQnn::from_parts(config, normalizer, params)?),
            Body::Knn { model } => AnyModel::Knn(model),
            Body::Gnb { model } => AnyModel::Gnb(model),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            AnyModel::Dnn(m) => m,
            AnyModel::Qnn(m) => m,
            AnyModel::Knn(m) => m,
            AnyModel::Gnb(m) => m,
        }
    }
}

impl Classifier for AnyModel {
    fn kind(&self) -> ModelKind {
        self.inner().kind()
    }

    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }

    fn class_scores(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.inner().class_scores(features)
    }
}
