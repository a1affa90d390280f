use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::PreparedPrompt;
use crate::model::{HeadActivation, HeadId, Model, ModelConfig, PatchSet};
use crate::prompts::{counterfactual, Dataset, Factor, Lexicon, PromptInstance};

/// Handling of prompt/counterfactual pairs whose token lengths differ.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchAlignment {
    /// Equal lengths patch every position. Unequal lengths keep the prompt's
    /// own activation at every position but the last, which takes the
    /// counterfactual's final-position activation.
    #[default]
    Auto,
    /// Unequal lengths are skipped.
    Strict,
}

impl FromStr for PatchAlignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(PatchAlignment::Auto),
            "strict" => Ok(PatchAlignment::Strict),
            _ => Err(Error::Parse(format!("unknown alignment `{s}` (auto, strict)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairAlignment {
    Positionwise,
    FinalPosition,
}

/// A prompt, its unpatched logit difference, and the counterfactual
/// activation of every head aligned to the prompt's length.
#[derive(Debug, Clone)]
pub struct PatchPair {
    prompt: PreparedPrompt,
    baseline: f32,
    donors: Vec<HeadActivation>,
    n_heads: usize,
    alignment: PairAlignment,
}

impl PatchPair {
    /// Two capture passes, one per side of the pair.
    pub fn new(model: &Model, p: &PromptInstance, cf: &PromptInstance, alignment: PatchAlignment) -> Result<Self> {
        let prompt = PreparedPrompt::new(model, p)?;
        let cf_tokens = model.encode(&cf.text);
        let (logits, own) = model.run_with_cache(&prompt.tokens)?;
        let (_, donor) = model.run_with_cache(&cf_tokens)?;
        let n = prompt.tokens.len();
        let (donors, kind) = if cf_tokens.len() == n {
            (donor.into_head_outputs(), PairAlignment::Positionwise)
        } else if alignment == PatchAlignment::Auto {
            let donors = own
                .head_outputs()
                .iter()
                .zip(donor.head_outputs())
                .map(|(mine, theirs)| splice_final_row(mine, theirs))
                .collect();
            (donors, PairAlignment::FinalPosition)
        } else {
            return Err(Error::LengthMismatch {
                expected: n,
                found: cf_tokens.len(),
            });
        };
        Ok(Self {
            baseline: prompt.answers.diff(logits.view()),
            prompt,
            donors,
            n_heads: model.config().n_heads,
            alignment: kind,
        })
    }

    pub fn baseline(&self) -> f32 {
        self.baseline
    }

    pub fn alignment(&self) -> PairAlignment {
        self.alignment
    }

    pub fn donor(&self, head: HeadId) -> &HeadActivation {
        &self.donors[head.flat_index(self.n_heads)]
    }

    /// Baseline logit difference minus the logit difference with `head`
    /// replaced by its counterfactual activation.
    pub fn effect(&self, model: &Model, head: HeadId) -> Result<f32> {
        head.check(model.config())?;
        let mut patches = PatchSet::new();
        patches.insert(head, self.donor(head).clone());
        Ok(self.baseline - self.prompt.logit_diff(model, &patches)?)
    }

    /// Effects of every head, indexed by `HeadId::flat_index`.
    pub fn all_effects(&self, model: &Model) -> Result<Vec<f32>> {
        HeadId::all(model.config())
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&h| self.effect(model, h))
            .collect()
    }
}

pub fn head_effect(
    model: &Model,
    p: &PromptInstance,
    cf: &PromptInstance,
    head: HeadId,
    alignment: PatchAlignment,
) -> Result<f32> {
    PatchPair::new(model, p, cf, alignment)?.effect(model, head)
}

/// Per-head mean signed and mean absolute patching effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadEffectMatrix {
    pub n_layers: usize,
    pub n_heads: usize,
    pub flip_factor: Factor,
    pub n_prompts: usize,
    /// `[layer][head]`
    pub mean_effect: Vec<Vec<f64>>,
    /// `[layer][head]`
    pub mean_abs_effect: Vec<Vec<f64>>,
}

impl HeadEffectMatrix {
    /// Average per-prompt effect vectors (each indexed by flat head index).
    /// Each head's values are summed in sorted order.
    pub fn from_effects(cfg: &ModelConfig, flip_factor: Factor, per_prompt: &[Vec<f32>]) -> Result<Self> {
        if per_prompt.is_empty() {
            return Err(Error::EmptyInput("no effects to average"));
        }
        let total = cfg.total_heads();
        if let Some(bad) = per_prompt.iter().find(|v| v.len() != total) {
            return Err(Error::LengthMismatch {
                expected: total,
                found: bad.len(),
            });
        }
        let n = per_prompt.len() as f64;
        let mut mean_effect = vec![vec![0.0; cfg.n_heads]; cfg.n_layers];
        let mut mean_abs_effect = vec![vec![0.0; cfg.n_heads]; cfg.n_layers];
        for flat in 0..total {
            let h = HeadId::from_flat_index(flat, cfg.n_heads);
            let mut vals: Vec<f64> = per_prompt.iter().map(|v| v[flat] as f64).collect();
            vals.sort_by(f64::total_cmp);
            mean_effect[h.layer][h.head] = vals.iter().sum::<f64>() / n;
            let mut abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
            abs.sort_by(f64::total_cmp);
            mean_abs_effect[h.layer][h.head] = abs.iter().sum::<f64>() / n;
        }
        Ok(Self {
            n_layers: cfg.n_layers,
            n_heads: cfg.n_heads,
            flip_factor,
            n_prompts: per_prompt.len(),
            mean_effect,
            mean_abs_effect,
        })
    }

    pub fn mean(&self, head: HeadId) -> f64 {
        self.mean_effect[head.layer][head.head]
    }

    pub fn mean_abs(&self, head: HeadId) -> f64 {
        self.mean_abs_effect[head.layer][head.head]
    }

    pub fn is_finite(&self) -> bool {
        self.mean_effect
            .iter()
            .chain(&self.mean_abs_effect)
            .flatten()
            .all(|v| v.is_finite())
    }

    /// Rows are layers, columns heads.
    pub fn grid_csv(&self, absolute: bool) -> String {
        let grid = if absolute {
            &self.mean_abs_effect
        } else {
            &self.mean_effect
        };
        let mut out = String::from("layer");
        for h in 0..self.n_heads {
            out.push_str(&format!(",h{h}"));
        }
        out.push('\n');
        for (l, row) in grid.iter().enumerate() {
            out.push_str(&l.to_string());
            for v in row {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        out
    }

    /// One `layer,head,mean_effect,mean_abs_effect` record per head.
    pub fn records_csv(&self) -> String {
        let mut out = String::from("layer,head,mean_effect,mean_abs_effect\n");
        for l in 0..self.n_layers {
            for h in 0..self.n_heads {
                out.push_str(&format!(
                    "{l},{h},{:.6},{:.6}\n",
                    self.mean_effect[l][h], self.mean_abs_effect[l][h]
                ));
            }
        }
        out
    }
}

/// What happened to each prompt/counterfactual pair of a sweep.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReport {
    pub pairs: usize,
    pub positionwise: usize,
    pub final_position: usize,
    pub skipped_length_mismatch: usize,
    /// Dataset indices of skipped pairs.
    pub skipped_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSweep {
    pub matrix: HeadEffectMatrix,
    pub skips: SkipReport,
}

/// Mean per-head effect over `dataset`, each prompt paired with its
/// counterfactual under `flip`. Parallel over prompts and heads.
pub fn effect_matrix(
    model: &Model,
    dataset: &Dataset,
    flip: Factor,
    lexicon: &Lexicon,
    alignment: PatchAlignment,
) -> Result<EffectSweep> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("effect sweep over an empty dataset"));
    }
    let outcomes: Vec<Option<(PairAlignment, Vec<f32>)>> = dataset
        .instances
        .par_iter()
        .map(|p| {
            let cf = counterfactual(p, flip, lexicon)?;
            match PatchPair::new(model, p, &cf, alignment) {
                Ok(pair) => Ok(Some((pair.alignment(), pair.all_effects(model)?))),
                Err(Error::LengthMismatch { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let mut skips = SkipReport {
        pairs: outcomes.len(),
        ..SkipReport::default()
    };
    let mut effects = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Some((PairAlignment::Positionwise, e)) => {
                skips.positionwise += 1;
                effects.push(e);
            }
            Some((PairAlignment::FinalPosition, e)) => {
                skips.final_position += 1;
                effects.push(e);
            }
            None => {
                skips.skipped_length_mismatch += 1;
                skips.skipped_indices.push(i);
            }
        }
    }
    if effects.is_empty() {
        return Err(Error::AllPairsSkipped(skips.pairs));
    }
    let matrix = HeadEffectMatrix::from_effects(model.config(), flip, &effects)?;
    Ok(EffectSweep { matrix, skips })
}

/// Replace the final row of `base` with the final row of `donor`.
pub fn splice_final_row(base: &HeadActivation, donor: &HeadActivation) -> HeadActivation {
    let mut v = base.values().to_owned();
    let n = v.nrows();
    v.row_mut(n - 1).assign(&donor.values().row(donor.seq_len() - 1));
    HeadActivation::new(v)
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::prompts::{build_prompt, setting_dataset, PromptFactors, Setting};

    fn tiny() -> Model {
        let cfg = ModelConfig {
            n_layers: 2,
            n_heads: 3,
            d_model: 12,
            d_head: 4,
            d_mlp: 16,
            vocab_size: 50257,
            context_len: 32,
            ln_epsilon: 1e-5,
        };
        Model::synthetic(cfg, 11)
    }

    #[test]
    fn self_counterfactual_has_zero_effect() {
        let m = tiny();
        let p = build_prompt(PromptFactors::BASE, &Lexicon::default(), 2).unwrap();
        let pair = PatchPair::new(&m, &p, &p, PatchAlignment::Strict).unwrap();
        for e in pair.all_effects(&m).unwrap() {
            assert!(e.abs() < 1e-5);
        }
    }

    #[test]
    fn strict_rejects_length_mismatch() {
        let m = tiny();
        let lex = Lexicon::default();
        let p = build_prompt(PromptFactors::BASE, &lex, 2).unwrap();
        let cf = counterfactual(&p, Factor::Plural, &lex).unwrap();
        let err = head_effect(&m, &p, &cf, HeadId::new(0, 0), PatchAlignment::Strict).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { expected: 1, found: 3 }));
        let pair = PatchPair::new(&m, &p, &cf, PatchAlignment::Auto).unwrap();
        assert_eq!(pair.alignment(), PairAlignment::FinalPosition);
        assert_eq!(pair.donor(HeadId::new(1, 1)).shape(), (1, 4));
    }

    #[test]
    fn sweep_reports_skips() {
        let m = tiny();
        let lex = Lexicon::default();
        let d = setting_dataset(Setting::Base, 3, &lex, 0).unwrap();
        let err = effect_matrix(&m, &d, Factor::Plural, &lex, PatchAlignment::Strict).unwrap_err();
        assert!(matches!(err, Error::AllPairsSkipped(3)));
        let sweep = effect_matrix(&m, &d, Factor::Plural, &lex, PatchAlignment::Auto).unwrap();
        assert_eq!(sweep.skips.final_position, 3);
        assert_eq!(sweep.matrix.n_prompts, 3);
        assert!(sweep.matrix.is_finite());
        // Same-length flip: pronoun singular -> plural keeps one token.
        let she = setting_dataset(Setting::Flip(Factor::Pronoun), 2, &lex, 0).unwrap();
        let sweep = effect_matrix(&m, &she, Factor::Plural, &lex, PatchAlignment::Strict).unwrap();
        assert_eq!(sweep.skips.positionwise, 2);
    }

    #[test]
    fn single_prompt_matrix_equals_its_effects() {
        let m = tiny();
        let lex = Lexicon::default();
        let d = setting_dataset(Setting::Base, 1, &lex, 4).unwrap();
        let sweep = effect_matrix(&m, &d, Factor::Pronoun, &lex, PatchAlignment::Auto).unwrap();
        let cf = counterfactual(&d.instances[0], Factor::Pronoun, &lex).unwrap();
        let pair = PatchPair::new(&m, &d.instances[0], &cf, PatchAlignment::Auto).unwrap();
        for (flat, e) in pair.all_effects(&m).unwrap().into_iter().enumerate() {
            let h = HeadId::from_flat_index(flat, 3);
            assert_eq!(sweep.matrix.mean(h), e as f64);
            assert_eq!(sweep.matrix.mean_abs(h), e.abs() as f64);
        }
    }

    #[test]
    fn matrix_exports() {
        let cfg = ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 8,
            d_head: 4,
            ..ModelConfig::default()
        };
        let m = HeadEffectMatrix::from_effects(&cfg, Factor::Plural, &[vec![1.0, -2.0, 0.0, 0.5], vec![-1.0, -2.0, 0.0, 0.5]])
            .unwrap();
        assert_eq!(m.mean(HeadId::new(0, 0)), 0.0);
        assert_eq!(m.mean_abs(HeadId::new(0, 0)), 1.0);
        assert_eq!(m.grid_csv(true), "layer,h0,h1\n0,1.000000,2.000000\n1,0.000000,0.500000\n");
        assert_eq!(m.records_csv().lines().count(), 5);
    }

    #[test]
    fn splice_replaces_only_last_row() {
        let base = HeadActivation::new(array![[1.0, 2.0], [3.0, 4.0]]);
        let donor = HeadActivation::new(array![[9.0, 9.0], [8.0, 8.0], [7.0, 6.0]]);
        assert_eq!(splice_final_row(&base, &donor).values(), array![[1.0, 2.0], [7.0, 6.0]]);
    }
}
