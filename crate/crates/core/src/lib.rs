//! Latent-feature malware classification toolkit.
//!
//! A dense variational autoencoder compresses high-dimensional static feature
//! vectors into a small latent space; five classical classifiers (CART decision
//! tree, random forest, histogram gradient boosting, logistic regression and
//! Gaussian naive Bayes) are then trained on either the raw or the latent
//! features and compared with cross-validation, ROC/AUC and two-sample t-tests.
//!
//! Everything is deterministic given a seed: there is no ambient randomness.

// `!(x > 0.0)` guards are written that way so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod classifier;
pub mod dataio;
mod error;
pub mod eval;
pub mod numcore;
pub mod persist;
pub mod pipeline;
pub mod service;
pub mod trees;
pub mod vae;

pub use classifier::{ClassifierKind, ClassifierModel};
pub use dataio::{Dataset, ScalerParams, SplitSpec, SyntheticSpec};
pub use error::{Error, Result};
pub use numcore::{Matrix, RngState};
pub use vae::{TrainConfig, VaeModel};
