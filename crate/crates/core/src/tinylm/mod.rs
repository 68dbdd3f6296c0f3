//! A minimal decoder-only transformer built for observability rather than
//! speed: every forward pass exposes each layer's hidden state, its
//! early-exit next-token distribution, and the per-head attention outputs
//! at the final position.

mod corpus;
mod io;
mod model;
mod tokenizer;
mod train;

pub use corpus::builtin_corpus;
pub use io::{load_model, save_model};
pub use model::{LayerTrace, Model, EPS_PROB};
pub use tokenizer::{ByteTokenizer, TokenId, BOS_TOKEN, EOS_TOKEN};
pub use train::{train_toy, TrainOptions, TrainStats};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Geometry and seed of a toy model. `d_head` is redundant with
/// `d_model / n_heads` but kept explicit so mismatches fail loudly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_head: usize,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Small default: 4 layers, 4 heads, d_model 64, byte-level vocabulary.
    pub fn toy(seed: u64) -> Self {
        ModelConfig {
            n_layers: 4,
            n_heads: 4,
            d_model: 64,
            d_head: 16,
            vocab_size: tokenizer::VOCAB_SIZE,
            max_seq_len: 128,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_heads == 0 || self.d_head == 0 || self.d_model == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.n_heads * self.d_head != self.d_model {
            return Err(Error::Config(format!(
                "n_heads ({}) x d_head ({}) must equal d_model ({})",
                self.n_heads, self.d_head, self.d_model
            )));
        }
        if self.vocab_size < 2 {
            return Err(Error::Config("vocab_size must be at least 2".into()));
        }
        if self.n_layers < 2 {
            return Err(Error::Config(
                "n_layers must be at least 2 for layer-contrast decoding".into(),
            ));
        }
        if self.max_seq_len == 0 {
            return Err(Error::Config("max_seq_len must be positive".into()));
        }
        Ok(())
    }

    /// Feed-forward hidden width. Fixed 4x multiplier, the usual convention.
    pub fn d_ff(&self) -> usize {
        4 * self.d_model
    }
}
