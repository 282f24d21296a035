//! Conditional autoregressive generative models of measurement data.
//!
//! A decoder-only transformer factorizes the joint outcome distribution
//! site by site, with a trainable conditioner injecting the system
//! description into every position; training, ancestral sampling, and
//! exhaustive enumeration live in the submodules.

mod conditioner;
mod config;
mod infer;
mod train;
mod transformer;

pub use conditioner::{
    rydberg_features, Condition, FeatureNorm, CONDITION_FEATURES, GCN_HIDDEN,
};
pub use config::{
    positional_encoding, positional_encoding_table, ConditionerKind, TransformerConfig,
};
pub use infer::MAX_EXHAUSTIVE;
pub use train::{TrainConfig, Trainer, TrainingSet};
pub use transformer::{GenerativeModel, LN_EPS, MASK_FILL};

pub(crate) use transformer::STREAM_SAMPLE;
