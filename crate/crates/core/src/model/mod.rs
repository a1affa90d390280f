//! GPT-2 Small: checkpoint loading, tokenizer, and a hookable forward pass.

mod config;
mod forward;
mod hooks;
mod tokenizer;
mod weights;

use std::path::{Path, PathBuf};

pub use config::ModelConfig;
pub use forward::{ForwardOptions, ForwardOutput};
pub(crate) use forward::ln_moments;
pub use hooks::{ActivationCache, HeadActivation, HeadId, PatchSet, TokenSequence};
pub use tokenizer::{Tokenizer, END_OF_TEXT};
pub use weights::{expected_tensors, LayerWeights, ModelWeights};

use crate::error::{Error, Result};

/// Environment variable naming the default asset directory.
pub const MODEL_DIR_ENV: &str = "MODEL_DIR";

/// Weights file name inside a model directory.
pub const WEIGHTS_FILE: &str = "model.safetensors";

/// Immutable model: configuration, weights and tokenizer. `Sync`, so one
/// instance can serve any number of concurrent forward passes.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    weights: ModelWeights,
    tokenizer: Tokenizer,
}

impl Model {
    /// Load GPT-2 Small from a safetensors checkpoint and a directory holding
    /// `vocab.json` / `merges.txt`.
    pub fn load(weights_path: impl AsRef<Path>, tokenizer_dir: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_config(weights_path, tokenizer_dir, ModelConfig::gpt2_small())
    }

    pub fn load_with_config(
        weights_path: impl AsRef<Path>,
        tokenizer_dir: impl AsRef<Path>,
        config: ModelConfig,
    ) -> Result<Self> {
        let weights = ModelWeights::load(weights_path, &config)?;
        let tokenizer = Tokenizer::from_dir(tokenizer_dir)?;
        Self::from_parts(config, weights, tokenizer)
    }

    /// Load `model.safetensors` from `dir`. Tokenizer files are read from the
    /// same directory when present, otherwise the bundled GPT-2 assets are used.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let weights = ModelWeights::load(dir.join(WEIGHTS_FILE), &ModelConfig::gpt2_small())?;
        let tokenizer = if dir.join("vocab.json").exists() && dir.join("merges.txt").exists() {
            Tokenizer::from_dir(dir)?
        } else {
            Tokenizer::gpt2()
        };
        Self::from_parts(ModelConfig::gpt2_small(), weights, tokenizer)
    }

    /// Model directory from `$MODEL_DIR`, if set and it holds a checkpoint.
    pub fn default_dir() -> Option<PathBuf> {
        let dir = PathBuf::from(std::env::var_os(MODEL_DIR_ENV)?);
        dir.join(WEIGHTS_FILE).is_file().then_some(dir)
    }

    pub fn from_parts(config: ModelConfig, weights: ModelWeights, tokenizer: Tokenizer) -> Result<Self> {
        config.validate()?;
        if !weights.config_matches(&config) {
            return Err(Error::Config("weights do not match model config".into()));
        }
        if tokenizer.vocab_size() > config.vocab_size {
            log::warn!(
                "tokenizer has {} entries but model vocab is {}",
                tokenizer.vocab_size(),
                config.vocab_size
            );
        }
        Ok(Self {
            config,
            weights,
            tokenizer,
        })
    }

    /// Random weights with the bundled GPT-2 tokenizer, for tests and demos
    /// that do not need trained behaviour.
    pub fn synthetic(config: ModelConfig, seed: u64) -> Self {
        let weights = ModelWeights::random(&config, seed);
        Self::from_parts(config, weights, Tokenizer::gpt2()).expect("random weights match config")
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    /// Mutable access for building fixtures; a loaded model is never mutated.
    pub fn weights_mut(&mut self) -> &mut ModelWeights {
        &mut self.weights
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn encode(&self, text: &str) -> TokenSequence {
        self.tokenizer.encode(text)
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        self.tokenizer.decode(ids)
    }
}
