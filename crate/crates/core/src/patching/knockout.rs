use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ablation::{AblationKind, AblationStrategy, ResampleMode};
use super::pool::PoolBank;
use crate::error::Result;
use crate::eval::{EvalReport, PreparedPrompt};
use crate::model::{HeadId, Model, PatchSet};
use crate::prompts::Dataset;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnockoutConfig {
    pub ablation: AblationKind,
    pub resample_mode: ResampleMode,
    pub seed: u64,
}

impl KnockoutConfig {
    pub fn resample(seed: u64) -> Self {
        Self {
            ablation: AblationKind::Resample,
            resample_mode: ResampleMode::PerHead,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnockoutResult {
    pub report: EvalReport,
    pub n_circuit: usize,
    pub n_ablated: usize,
    pub diffs: Vec<f32>,
}

/// Patches ablating every head outside `circuit` for prompt `index` of a
/// run. Draws for a given `(seed, index, head)` do not depend on the
/// circuit, so candidate circuits are compared on identical donors.
pub fn knockout_patches(
    model: &Model,
    circuit: &BTreeSet<HeadId>,
    seq_len: usize,
    index: usize,
    bank: &PoolBank,
    cfg: &KnockoutConfig,
) -> Result<PatchSet> {
    let mcfg = model.config();
    let strategy = AblationStrategy::new(cfg.ablation, mcfg.d_head, bank);
    let shared_donor = match (cfg.ablation, cfg.resample_mode) {
        (AblationKind::Resample, ResampleMode::SharedDonor) => {
            let pool = bank.get(seq_len)?;
            Some(seed::rng(cfg.seed, &[index as u64]).random_range(0..pool.len().max(1)))
        }
        _ => None,
    };
    let mut patches = PatchSet::new();
    for head in HeadId::all(mcfg).filter(|h| !circuit.contains(h)) {
        let value = match shared_donor {
            Some(entry) => bank.get(seq_len)?.activation(entry, head).clone(),
            None => {
                let mut rng = seed::rng(cfg.seed, &[index as u64, head.flat_index(mcfg.n_heads) as u64]);
                strategy.value(head, seq_len, &mut rng)?
            }
        };
        patches.insert(head, value);
    }
    Ok(patches)
}

/// Knockout over prompts already encoded. Prompt `i` uses RNG streams
/// derived from `(seed, i, head)`, so results do not depend on scheduling.
pub fn knockout_prepared(
    model: &Model,
    circuit: &BTreeSet<HeadId>,
    prompts: &[PreparedPrompt],
    bank: &PoolBank,
    cfg: &KnockoutConfig,
    group_key: Option<String>,
) -> Result<KnockoutResult> {
    let diffs: Vec<f32> = prompts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let patches = knockout_patches(model, circuit, p.tokens.len(), i, bank, cfg)?;
            p.logit_diff(model, &patches)
        })
        .collect::<Result<_>>()?;
    let total = model.config().total_heads();
    let n_circuit = HeadId::all(model.config()).filter(|h| circuit.contains(h)).count();
    Ok(KnockoutResult {
        report: EvalReport::from_diffs(&diffs, group_key)?,
        n_circuit,
        n_ablated: total - n_circuit,
        diffs,
    })
}

/// Evaluate `circuit` on `dataset` with every other head ablated.
pub fn knockout_eval(
    model: &Model,
    circuit: &BTreeSet<HeadId>,
    dataset: &Dataset,
    bank: &PoolBank,
    cfg: &KnockoutConfig,
) -> Result<KnockoutResult> {
    let prompts = prepare_all(model, dataset)?;
    knockout_prepared(model, circuit, &prompts, bank, cfg, Some(dataset.setting.label().to_string()))
}

pub fn prepare_all(model: &Model, dataset: &Dataset) -> Result<Vec<PreparedPrompt>> {
    dataset
        .instances
        .iter()
        .map(|p| PreparedPrompt::new(model, p))
        .collect()
}
