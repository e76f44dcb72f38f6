//! Traits shared by every classifier in the crate.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dnn,
    Qnn,
    Knn,
    Gnb,
}

impl ModelKind {
    pub fn is_gradient_trained(self) -> bool {
        matches!(self, ModelKind::Dnn | ModelKind::Qnn)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Dnn => "dnn",
            ModelKind::Qnn => "qnn",
            ModelKind::Knn => "knn",
            ModelKind::Gnb => "gnb",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dnn" => Ok(ModelKind::Dnn),
            "qnn" => Ok(ModelKind::Qnn),
            "knn" => Ok(ModelKind::Knn),
            "gnb" => Ok(ModelKind::Gnb),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

/// Named slices of a model's flat parameter vector, used by freeze policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    InputLayer,
    /// Variational angles of the quantum circuit.
    Ansatz,
    /// Residual blocks of the DNN.
    HiddenBlocks,
    OutputLayer,
}

pub trait Classifier: Send + Sync {
    fn kind(&self) -> ModelKind;

    fn n_classes(&self) -> usize;

    /// Per-class scores; higher means more likely. Used both for the argmax
    /// prediction and as ROC scores.
    fn class_scores(&self, features: &[f64]) -> Result<Vec<f64>>;

    fn predict(&self, features: &[f64]) -> Result<usize> {
        Ok(argmax(&self.class_scores(features)?))
    }
}

/// Loss, flat gradient and prediction for one labelled sample.
#[derive(Debug, Clone)]
pub struct SampleGradient {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub predicted: usize,
}

/// A classifier whose parameters live in one flat vector and can be trained
/// by gradient descent.
pub trait Trainable: Classifier + Clone {
    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Disjoint ranges covering the whole parameter vector.
    fn param_groups(&self) -> Vec<(ParamGroup, Range<usize>)>;

    /// Softmax cross-entropy loss and its gradient for one sample.
    fn sample_gradient(&self, features: &[f64], label: usize) -> Result<SampleGradient>;

    /// Adds one sample's gradient into `grad` and returns (loss, predicted).
    fn accumulate_gradient(&self, features: &[f64], label: usize, grad: &mut [f64]) -> Result<(f64, usize)> {
        let g = self.sample_gradient(features, label)?;
        grad.iter_mut().zip(&g.grad).for_each(|(acc, v)| *acc += v);
        Ok((g.loss, g.predicted))
    }
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
