use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::circuit::{Circuit, ProvenanceEntry};
use crate::error::{Error, Result};
use crate::eval::{EvalReport, PreparedPrompt};
use crate::model::{HeadId, Model};
use crate::patching::{
    knockout_prepared, prepare_all, AblationKind, HeadEffectMatrix, KnockoutConfig, PoolBank, ResampleMode,
};
use crate::prompts::Dataset;

/// Accuracy differences closer than this are treated as equal.
const ACC_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Stop once circuit accuracy is within this gap of the full model.
    pub tolerance: f64,
    /// Minimum accuracy gain for a head to be kept.
    pub min_gain: f64,
    /// Consecutive rejections before giving up.
    pub patience: usize,
    /// Prompts per candidate evaluation.
    pub eval_n: usize,
    /// Knockout resampling seed.
    pub seed: u64,
    #[serde(default)]
    pub ablation: AblationKind,
    #[serde(default)]
    pub resample_mode: ResampleMode,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.05,
            min_gain: 0.005,
            patience: 12,
            eval_n: 100,
            seed: 0,
            ablation: AblationKind::Resample,
            resample_mode: ResampleMode::PerHead,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.min_gain.is_nan() || self.min_gain < 0.0 {
            return Err(Error::Config(format!("min_gain must be non-negative, got {}", self.min_gain)));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.eval_n == 0 {
            return Err(Error::Config("eval_n must be at least 1".into()));
        }
        Ok(())
    }

    pub fn knockout(&self) -> KnockoutConfig {
        KnockoutConfig {
            ablation: self.ablation,
            resample_mode: self.resample_mode,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    WithinTolerance,
    Patience,
    Exhausted,
}

/// Search settings and outcome, stored with the circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub config: SearchConfig,
    pub dataset_seed: u64,
    pub n_prompts: usize,
    pub full_accuracy: f64,
    pub full_mean_logit_diff: f64,
    pub initial_accuracy: f64,
    pub final_accuracy: f64,
    pub final_mean_logit_diff: f64,
    pub candidates_evaluated: usize,
    pub stop_reason: StopReason,
}

/// Heads by descending mean |effect|; ties by `(layer, head)` ascending.
pub fn rank_heads(m: &HeadEffectMatrix) -> Vec<HeadId> {
    let mut heads: Vec<HeadId> = (0..m.n_layers)
        .flat_map(|l| (0..m.n_heads).map(move |h| HeadId::new(l, h)))
        .collect();
    heads.sort_by(|a, b| m.mean_abs(*b).total_cmp(&m.mean_abs(*a)).then(a.cmp(b)));
    heads
}

/// Start from the empty circuit and greedily add heads in `ranked` order.
pub fn greedy_search(
    model: &Model,
    dataset: &Dataset,
    ranked: &[HeadId],
    bank: &PoolBank,
    cfg: &SearchConfig,
) -> Result<Circuit> {
    grow(model, Vec::new(), dataset, ranked, bank, cfg)
}

/// Grow `base` on a new setting with the same acceptance rule, starting from
/// the base circuit's knockout accuracy there. The result contains `base`.
pub fn expand_circuit(
    model: &Model,
    base: &Circuit,
    dataset: &Dataset,
    ranked: &[HeadId],
    bank: &PoolBank,
    cfg: &SearchConfig,
) -> Result<Circuit> {
    base.validate()?;
    grow(model, base.heads.clone(), dataset, ranked, bank, cfg)
}

fn correct_count(r: &EvalReport) -> usize {
    (r.accuracy * r.count as f64).round() as usize
}

fn grow(
    model: &Model,
    start: Vec<HeadId>,
    dataset: &Dataset,
    ranked: &[HeadId],
    bank: &PoolBank,
    cfg: &SearchConfig,
) -> Result<Circuit> {
    cfg.validate()?;
    for h in start.iter().chain(ranked) {
        h.check(model.config())?;
    }
    let data = dataset.truncated(cfg.eval_n);
    let prompts: Vec<PreparedPrompt> = prepare_all(model, &data)?;
    if prompts.is_empty() {
        return Err(Error::EmptyInput("search dataset"));
    }
    let ko = cfg.knockout();
    let group = Some(data.setting.label().to_string());
    let full_set: BTreeSet<HeadId> = HeadId::all(model.config()).collect();
    let full = knockout_prepared(model, &full_set, &prompts, bank, &ko, group.clone())?.report;

    let mut current: BTreeSet<HeadId> = start.iter().copied().collect();
    let mut report = knockout_prepared(model, &current, &prompts, bank, &ko, group.clone())?.report;
    let initial_accuracy = report.accuracy;
    let threshold = full.accuracy - cfg.tolerance;
    let n = prompts.len() as f64;

    let mut provenance = Vec::new();
    let mut rejections = 0;
    let mut evaluated = 0;
    let mut stop = StopReason::Exhausted;
    for &head in ranked {
        if report.accuracy >= threshold - ACC_EPS {
            stop = StopReason::WithinTolerance;
            break;
        }
        if rejections >= cfg.patience {
            stop = StopReason::Patience;
            break;
        }
        if current.contains(&head) {
            continue;
        }
        let mut candidate = current.clone();
        candidate.insert(head);
        let r = knockout_prepared(model, &candidate, &prompts, bank, &ko, group.clone())?.report;
        evaluated += 1;
        let gain = (correct_count(&r) as f64 - correct_count(&report) as f64) / n;
        log::debug!("candidate {head}: accuracy {:.4} (gain {gain:+.4})", r.accuracy);
        if gain >= cfg.min_gain - ACC_EPS && gain > 0.0 {
            log::info!("accept {head}: accuracy {:.4}", r.accuracy);
            current = candidate;
            provenance.push(ProvenanceEntry {
                head,
                accuracy: r.accuracy,
                mean_logit_diff: r.mean_logit_diff,
            });
            report = r;
            rejections = 0;
        } else {
            rejections += 1;
        }
    }
    if stop == StopReason::Exhausted && report.accuracy >= threshold - ACC_EPS {
        stop = StopReason::WithinTolerance;
    }

    let heads = start
        .iter()
        .copied()
        .chain(provenance.iter().map(|p: &ProvenanceEntry| p.head))
        .collect();
    let circuit = Circuit {
        setting: data.setting.label().to_string(),
        heads,
        base: start,
        provenance,
        search: Some(SearchSummary {
            config: *cfg,
            dataset_seed: data.seed,
            n_prompts: prompts.len(),
            full_accuracy: full.accuracy,
            full_mean_logit_diff: full.mean_logit_diff,
            initial_accuracy,
            final_accuracy: report.accuracy,
            final_mean_logit_diff: report.mean_logit_diff,
            candidates_evaluated: evaluated,
            stop_reason: stop,
        }),
    };
    circuit.validate()?;
    Ok(circuit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::patching::PoolSpec;
    use crate::prompts::{setting_dataset, Factor, Lexicon, Setting};

    fn matrix(cells: &[(usize, usize, f64)]) -> HeadEffectMatrix {
        let cfg = ModelConfig::gpt2_small();
        let mut m = HeadEffectMatrix::from_effects(&cfg, Factor::Plural, &[vec![0.0; 144]]).unwrap();
        for &(l, h, v) in cells {
            m.mean_abs_effect[l][h] = v;
        }
        m
    }

    #[test]
    fn ranking_rules() {
        let r = rank_heads(&matrix(&[(11, 7, 2.0)]));
        assert_eq!(r[0], HeadId::new(11, 7));
        assert_eq!(r[1], HeadId::new(0, 0));
        let r = rank_heads(&matrix(&[]));
        assert_eq!(&r[..3], &[HeadId::new(0, 0), HeadId::new(0, 1), HeadId::new(0, 2)]);
        let r = rank_heads(&matrix(&[(3, 1, 1.0), (2, 5, 1.0), (9, 9, 0.5)]));
        assert_eq!(&r[..3], &[HeadId::new(2, 5), HeadId::new(3, 1), HeadId::new(9, 9)]);
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        for bad in [
            SearchConfig { tolerance: 0.0, ..Default::default() },
            SearchConfig { min_gain: -0.1, ..Default::default() },
            SearchConfig { patience: 0, ..Default::default() },
            SearchConfig { tolerance: f64::NAN, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

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
        Model::synthetic(cfg, 5)
    }

    #[test]
    fn search_is_replayable_and_monotone() {
        let m = tiny();
        let lex = Lexicon::default();
        let d = setting_dataset(Setting::All, 40, &lex, 3).unwrap();
        let bank = PoolBank::for_dataset(&m, &d, Setting::All, &lex, PoolSpec::new(4, 1)).unwrap();
        let ranked: Vec<_> = HeadId::all(m.config()).collect();
        let cfg = SearchConfig {
            tolerance: 0.01,
            min_gain: 0.0,
            patience: 6,
            eval_n: 40,
            seed: 9,
            ..Default::default()
        };
        let a = greedy_search(&m, &d, &ranked, &bank, &cfg).unwrap();
        let b = greedy_search(&m, &d, &ranked, &bank, &cfg).unwrap();
        assert_eq!(a, b);
        let s = a.search.as_ref().unwrap();
        let mut prev = s.initial_accuracy;
        for p in &a.provenance {
            assert!(p.accuracy > prev + cfg.min_gain - 1e-9);
            prev = p.accuracy;
        }
        assert_eq!(prev, s.final_accuracy);
        let ko = knockout_prepared(&m, &a.head_set(), &prepare_all(&m, &d).unwrap(), &bank, &cfg.knockout(), None)
            .unwrap();
        assert_eq!(ko.report.accuracy, s.final_accuracy);
    }

    #[test]
    fn expansion_keeps_base() {
        let m = tiny();
        let lex = Lexicon::default();
        let d = setting_dataset(Setting::All, 20, &lex, 4).unwrap();
        let bank = PoolBank::for_dataset(&m, &d, Setting::All, &lex, PoolSpec::new(3, 1)).unwrap();
        let base = Circuit::from_head_list("base", "(1, 2), (0, 1)").unwrap();
        let ranked: Vec<_> = HeadId::all(m.config()).collect();
        let cfg = SearchConfig {
            tolerance: 0.01,
            min_gain: 0.0,
            eval_n: 20,
            ..Default::default()
        };
        let e = expand_circuit(&m, &base, &d, &ranked, &bank, &cfg).unwrap();
        assert_eq!(&e.heads[..2], &base.heads[..]);
        assert_eq!(e.base, base.heads);
        assert!(base.head_set().is_subset(&e.head_set()));
    }

    #[test]
    fn full_circuit_stops_immediately() {
        let m = tiny();
        let lex = Lexicon::default();
        let d = setting_dataset(Setting::Base, 5, &lex, 4).unwrap();
        let bank = PoolBank::for_dataset(&m, &d, Setting::Base, &lex, PoolSpec::new(2, 1)).unwrap();
        let all = Circuit::new("all", HeadId::all(m.config()).collect()).unwrap();
        let ranked: Vec<_> = HeadId::all(m.config()).collect();
        let e = expand_circuit(&m, &all, &d, &ranked, &bank, &SearchConfig { eval_n: 5, ..Default::default() })
            .unwrap();
        assert_eq!(e.heads, all.heads);
        let s = e.search.unwrap();
        assert_eq!(s.stop_reason, StopReason::WithinTolerance);
        assert_eq!(s.candidates_evaluated, 0);
    }
}
