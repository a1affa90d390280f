use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuits::SearchConfig;
use crate::error::{Error, Result};
use crate::model::{Model, MODEL_DIR_ENV};
use crate::patching::{AblationKind, KnockoutConfig, PatchAlignment, PoolSpec, ResampleMode};
use crate::prompts::{ContrastRule, Factor, Lexicon, PromptFactors, Setting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub dataset: u64,
    pub pool: u64,
    pub search: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            dataset: 0,
            pool: 1,
            search: 2,
        }
    }
}

/// Search settings as they appear in a config file; the seed lives in
/// [`Seeds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub tolerance: f64,
    pub min_gain: f64,
    pub patience: usize,
    pub eval_n: usize,
    /// Re-rank heads on the target setting when expanding.
    pub rerank: bool,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            tolerance: 0.05,
            min_gain: 0.005,
            patience: 12,
            eval_n: 25,
            rerank: true,
        }
    }
}

/// Everything one experiment needs. Stored verbatim in every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory with `model.safetensors`; falls back to `$MODEL_DIR`.
    pub model_dir: Option<PathBuf>,
    /// Random weights with this seed instead of a checkpoint (smoke runs only).
    pub synthetic_model: Option<u64>,
    /// Lexicon TOML; the bundled lexicon when absent.
    pub lexicon: Option<PathBuf>,
    pub setting: Setting,
    pub n_per_cell: usize,
    pub seeds: Seeds,
    pub flip: Factor,
    pub alignment: PatchAlignment,
    pub contrast: ContrastRule,
    pub ablation: AblationKind,
    pub resample_mode: ResampleMode,
    pub pool_size: usize,
    pub search: SearchSection,
    pub output_dir: PathBuf,
    /// Worker threads; all hardware threads when absent.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RunConfig {
    /// Small sample sizes for a single workstation.
    pub fn desk() -> Self {
        Self {
            model_dir: None,
            synthetic_model: None,
            lexicon: None,
            setting: Setting::Base,
            n_per_cell: 25,
            seeds: Seeds::default(),
            flip: Factor::Plural,
            alignment: PatchAlignment::Auto,
            contrast: ContrastRule::Agreement,
            ablation: AblationKind::Resample,
            resample_mode: ResampleMode::PerHead,
            pool_size: 16,
            search: SearchSection::default(),
            output_dir: PathBuf::from("runs/latest"),
            workers: None,
        }
    }

    /// Sample sizes of the published experiments.
    pub fn full() -> Self {
        Self {
            n_per_cell: 100,
            pool_size: 32,
            search: SearchSection {
                eval_n: 100,
                ..SearchSection::default()
            },
            ..Self::desk()
        }
    }

    /// Switch an existing config to the full-scale sample sizes.
    pub fn apply_full_profile(&mut self) {
        let full = Self::full();
        self.n_per_cell = full.n_per_cell;
        self.pool_size = full.pool_size;
        self.search.eval_n = full.search.eval_n;
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// The config as embedded in artifacts: output location and worker count
    /// cannot change results and are cleared, so reruns elsewhere or with a
    /// different thread count produce identical bytes.
    pub fn snapshot(&self) -> Self {
        Self {
            output_dir: PathBuf::new(),
            workers: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_cell == 0 {
            return Err(Error::Config("n_per_cell must be at least 1".into()));
        }
        if self.pool_size == 0 {
            return Err(Error::Config("pool_size must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if let Some(p) = &self.lexicon {
            if !p.is_file() {
                return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
        }
        self.search_config().validate()
    }

    /// Prompts for a dataset of `setting`: one cell's worth, or every cell's.
    pub fn dataset_size(&self, setting: Setting) -> usize {
        match setting {
            Setting::All => self.n_per_cell * PromptFactors::N_CELLS,
            _ => self.n_per_cell,
        }
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            tolerance: self.search.tolerance,
            min_gain: self.search.min_gain,
            patience: self.search.patience,
            eval_n: self.search.eval_n,
            seed: self.seeds.search,
            ablation: self.ablation,
            resample_mode: self.resample_mode,
        }
    }

    pub fn knockout_config(&self) -> KnockoutConfig {
        self.search_config().knockout()
    }

    pub fn pool_spec(&self) -> PoolSpec {
        PoolSpec::new(self.pool_size, self.seeds.pool)
    }

    pub fn load_lexicon(&self) -> Result<Lexicon> {
        match &self.lexicon {
            Some(p) => Lexicon::load(p),
            None => Ok(Lexicon::default()),
        }
    }

    /// Checkpoint directory from the config, then `$MODEL_DIR`.
    pub fn resolve_model_dir(&self) -> Option<PathBuf> {
        self.model_dir
            .clone()
            .or_else(|| std::env::var_os(MODEL_DIR_ENV).map(PathBuf::from))
    }

    pub fn load_model(&self) -> Result<Model> {
        if let Some(seed) = self.synthetic_model {
            log::warn!("using random synthetic weights (seed {seed}); results carry no meaning");
            return Ok(Model::synthetic(crate::model::ModelConfig::gpt2_small(), seed));
        }
        let dir = self.resolve_model_dir().ok_or_else(|| Error::Checkpoint {
            path: PathBuf::from("<unset>"),
            message: format!("no model directory: pass --model-dir or set {MODEL_DIR_ENV}"),
        })?;
        Model::from_dir(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::full();
        c.setting = Setting::Flip(Factor::Pronoun);
        c.model_dir = Some("/models/gpt2".into());
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = RunConfig::from_toml("setting = \"is_negated\"\n[search]\npatience = 3\n").unwrap();
        assert_eq!(c.setting, Setting::Flip(Factor::Negated));
        assert_eq!(c.search.patience, 3);
        assert_eq!(c.search.eval_n, 25);
        assert_eq!(c.pool_size, 16);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("n_per_cel = 3\n").is_err());
        assert!(RunConfig::from_toml("setting = \"plural\"\n").is_err());
    }

    #[test]
    fn profiles() {
        let d = RunConfig::desk();
        assert_eq!((d.n_per_cell, d.pool_size, d.search.eval_n), (25, 16, 25));
        let f = RunConfig::full();
        assert_eq!((f.n_per_cell, f.pool_size, f.search.eval_n), (100, 32, 100));
        assert_eq!(f.dataset_size(Setting::All), 6400);
        assert_eq!(f.dataset_size(Setting::Base), 100);
    }

    #[test]
    fn validation() {
        assert!(RunConfig::desk().validate().is_ok());
        let mut c = RunConfig::desk();
        c.lexicon = Some("/nonexistent/lexicon.toml".into());
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        let mut c = RunConfig::desk();
        c.search.tolerance = 0.0;
        assert_eq!(c.validate().unwrap_err().exit_code(), 3);
    }
}
