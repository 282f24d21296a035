//! Model architecture configuration and the positional encoding.

use serde::{Deserialize, Serialize};

use crate::measure::Basis;
use crate::{Error, Result};

/// Which trainable map turns a system description into the conditioning
/// vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionerKind {
    /// Graph-convolution conditioner over a coupling graph.
    Gcn,
    /// Affine map over a fixed-length standardized feature vector.
    Linear,
}

/// Architecture of the conditional autoregressive transformer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_blocks: usize,
    /// Hidden width of the position-wise feed-forward sublayer.
    pub ffn_hidden: usize,
    pub dropout: f64,
    /// Token vocabulary (6 for pauli6, 2 for zbasis); BOS id = vocab_size.
    pub vocab_size: usize,
    /// Longest supported sequence (= largest site count).
    pub max_sites: usize,
    pub conditioner: ConditionerKind,
}

impl TransformerConfig {
    /// Reference-scale defaults for a measurement basis.
    pub fn defaults(basis: Basis, max_sites: usize, conditioner: ConditionerKind) -> Self {
        Self {
            d_model: 128,
            n_heads: 4,
            n_blocks: 4,
            ffn_hidden: 512,
            dropout: 0.1,
            vocab_size: basis.vocab_size(),
            max_sites,
            conditioner,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.n_blocks == 0 || self.ffn_hidden == 0 || self.max_sites == 0 {
            return Err(Error::Config(
                "n_blocks, ffn_hidden, and max_sites must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.vocab_size < 2 {
            return Err(Error::Config(format!(
                "vocab_size must be at least 2, got {}",
                self.vocab_size
            )));
        }
        Ok(())
    }

    /// BOS token id (one past the outcome vocabulary).
    pub fn bos(&self) -> usize {
        self.vocab_size
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// Sinusoidal positional encoding entry: even indices are
/// `sin(k / 10000^(i/d))`, odd indices the matching cosine.
pub fn positional_encoding(position: usize, index: usize, d_model: usize) -> f64 {
    debug_assert!(index < d_model);
    let pair = (index / 2) * 2; // 2i of the sin/cos pair
    let angle = position as f64 / 10000f64.powf(pair as f64 / d_model as f64);
    if index % 2 == 0 {
        angle.sin()
    } else {
        angle.cos()
    }
}

/// The `[max_sites, d_model]` positional-encoding table.
pub fn positional_encoding_table(max_sites: usize, d_model: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(max_sites * d_model);
    for k in 0..max_sites {
        for i in 0..d_model {
            table.push(positional_encoding(k, i, d_model));
        }
    }
    table
}
