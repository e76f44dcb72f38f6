//! Hybrid quantum-classical transfer learning for Wi-Fi beam-SNR pose
//! recognition.
//!
//! The crate is organised bottom-up:
//!
//! - [`statevector`]: dense RY/CZ circuit simulation with exact Pauli-Z readout.
//! - [`quantum_classifier`]: the dressed QNN (linear encoder, STD ansatz,
//!   linear readout) with parameter-shift gradients.
//! - [`neural`]: linear layers, Mish, the residual DNN, softmax cross-entropy
//!   and AdamW.
//! - [`data`]: beam-SNR samples, CSV I/O, the seeded synthetic generator and
//!   stratified splits.
//! - [`baselines`]: kNN and Gaussian naive Bayes.
//! - [`training`]: source pretraining, few-shot transfer fine-tuning and
//!   repeated runs.
//! - [`evaluation`]: accuracy, confusion matrices, ROC curves and AUC.
//! - [`checkpoint`] / [`experiment`]: model documents, run metadata and the
//!   end-to-end figure pipelines.

pub mod baselines;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod model;
pub mod neural;
pub mod quantum_classifier;
pub mod rng;
pub mod statevector;
pub mod training;

pub use error::{Error, Result};

/// Beam SNRs collected per beam training (one feature vector).
pub const N_BEAMS: usize = 36;

/// Number of pose classes.
pub const N_CLASSES: usize = 8;
