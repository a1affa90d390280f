use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::artifacts::{ArtifactWriter, Envelope, Manifest};
use super::config::RunConfig;
use crate::analysis::{dla_sweep, mean_abs_head_dla, probe_suite, attention_patterns, AttentionPattern, DlaReport};
use crate::circuits::{compare_circuits, expand_circuit, greedy_search, rank_heads, Circuit, CircuitComparison};
use crate::error::{Error, Result};
use crate::eval::{evaluate_dataset, per_cell_csv, summary_csv, EvalReport};
use crate::model::{HeadId, Model};
use crate::patching::{effect_matrix, knockout_eval, EffectSweep, HeadEffectMatrix, KnockoutResult, PoolBank};
use crate::prompts::{setting_dataset_with, Dataset, Lexicon, PromptFactors, Setting};

/// A loaded model, lexicon and config shared by every command.
#[derive(Debug)]
pub struct Session {
    pub model: Model,
    pub config: RunConfig,
    pub lexicon: Lexicon,
}

impl Session {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let model = config.load_model()?;
        Self::with_model(model, config)
    }

    pub fn with_model(model: Model, config: RunConfig) -> Result<Self> {
        config.validate()?;
        let lexicon = config.load_lexicon()?;
        lexicon.validate(model.tokenizer())?;
        Ok(Self {
            model,
            config,
            lexicon,
        })
    }

    /// Run `f` on a thread pool of `config.workers` threads, or on the
    /// global pool when unset.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.config.workers {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }

    /// `n` prompts of `setting` under the dataset seed.
    pub fn dataset(&self, setting: Setting, n: usize) -> Result<Dataset> {
        setting_dataset_with(setting, n, &self.lexicon, self.config.seeds.dataset, self.config.contrast)
    }

    /// The evaluation-sized dataset used for search and knockout.
    pub fn eval_dataset(&self, setting: Setting) -> Result<Dataset> {
        self.dataset(setting, self.config.search.eval_n)
    }

    pub fn pools_for(&self, dataset: &Dataset) -> Result<PoolBank> {
        PoolBank::for_dataset(
            &self.model,
            dataset,
            dataset.setting,
            &self.lexicon,
            self.config.pool_spec(),
        )
    }

    pub fn effects(&self, setting: Setting) -> Result<EffectSweep> {
        let data = self.dataset(setting, self.config.dataset_size(setting))?;
        effect_matrix(&self.model, &data, self.config.flip, &self.lexicon, self.config.alignment)
    }

    fn writer(&self, command: &str) -> Result<ArtifactWriter> {
        ArtifactWriter::create(&self.config.output_dir, command, &self.config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    /// One row per setting, in summary-table order.
    pub summary: Vec<EvalReport>,
    pub per_cell: Vec<(PromptFactors, EvalReport)>,
}

/// Full-model metrics for all eight settings plus the per-cell breakdown.
/// Single-cell settings reuse the grid's prompts: instance `i` of a cell has
/// the same seed in both.
pub fn verify(s: &Session) -> Result<VerifyOutcome> {
    let n = s.config.n_per_cell;
    let grid = s.dataset(Setting::All, n * PromptFactors::N_CELLS)?;
    let all = evaluate_dataset(&s.model, &grid)?;
    let mut summary = Vec::new();
    for setting in Setting::ALL_SETTINGS {
        let report = match setting.cell() {
            None => all.aggregate.overall.clone(),
            Some(cell) => {
                let diffs: Vec<f32> = grid
                    .instances
                    .iter()
                    .zip(&all.diffs)
                    .filter(|(p, _)| p.factors == cell)
                    .map(|(_, d)| *d)
                    .collect();
                EvalReport::from_diffs(&diffs, None)?
            }
        };
        summary.push(EvalReport {
            group_key: Some(setting.label().to_string()),
            ..report
        });
    }
    Ok(VerifyOutcome {
        summary,
        per_cell: all.aggregate.per_cell,
    })
}

pub fn cmd_verify(s: &Session) -> Result<(VerifyOutcome, Manifest)> {
    let out = verify(s)?;
    let mut w = s.writer("verify")?;
    w.write_json("summary.json", &out.summary)?;
    w.write("summary.csv", summary_csv(&out.summary).as_bytes())?;
    w.write_json("per_cell.json", &out.per_cell)?;
    w.write("per_cell.csv", per_cell_csv(&out.per_cell).as_bytes())?;
    Ok((out, w.finish()?))
}

fn write_effects(w: &mut ArtifactWriter, prefix: &str, sweep: &EffectSweep) -> Result<()> {
    w.write_json(&format!("{prefix}.json"), sweep)?;
    w.write(&format!("{prefix}_abs.csv"), sweep.matrix.grid_csv(true).as_bytes())?;
    w.write(&format!("{prefix}_signed.csv"), sweep.matrix.grid_csv(false).as_bytes())?;
    w.write(&format!("{prefix}_records.csv"), sweep.matrix.records_csv().as_bytes())?;
    Ok(())
}

pub fn cmd_effects(s: &Session) -> Result<(EffectSweep, Manifest)> {
    let sweep = s.effects(s.config.setting)?;
    let mut w = s.writer("effects")?;
    write_effects(&mut w, "effects", &sweep)?;
    Ok((sweep, w.finish()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub ranking: Vec<HeadId>,
    pub circuit: Circuit,
    pub effects: HeadEffectMatrix,
}

pub fn search(s: &Session) -> Result<SearchOutcome> {
    let setting = s.config.setting;
    let sweep = s.effects(setting)?;
    let ranking = rank_heads(&sweep.matrix);
    let data = s.eval_dataset(setting)?;
    let bank = s.pools_for(&data)?;
    let circuit = greedy_search(&s.model, &data, &ranking, &bank, &s.config.search_config())?;
    Ok(SearchOutcome {
        ranking,
        circuit,
        effects: sweep.matrix,
    })
}

pub fn cmd_search(s: &Session) -> Result<(SearchOutcome, Manifest)> {
    let out = search(s)?;
    let mut w = s.writer("search")?;
    w.write_json("circuit.json", &out.circuit)?;
    w.write_json("ranking.json", &out.ranking)?;
    w.write("effects_abs.csv", out.effects.grid_csv(true).as_bytes())?;
    Ok((out, w.finish()?))
}

/// A circuit from a file (circuit JSON, artifact envelope or bare head list)
/// or from the published set by name.
pub fn load_circuit(spec: &str) -> Result<Circuit> {
    let path = Path::new(spec);
    if !path.exists() {
        return Circuit::reference(spec);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(env) = serde_json::from_str::<Envelope<Circuit>>(&text) {
        env.result.validate()?;
        return Ok(env.result);
    }
    if let Ok(env) = serde_json::from_str::<Envelope<ExpandOutcome>>(&text) {
        env.result.circuit.validate()?;
        return Ok(env.result.circuit);
    }
    Circuit::load(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandOutcome {
    pub circuit: Circuit,
    pub vs_base: CircuitComparison,
    /// `(heads, circuit accuracy, full-model accuracy)`.
    pub summary: (usize, f64, f64),
}

pub fn expand(s: &Session, base: &Circuit) -> Result<ExpandOutcome> {
    let setting = s.config.setting;
    let ranking_setting = if s.config.search.rerank { setting } else { Setting::Base };
    let ranking = rank_heads(&s.effects(ranking_setting)?.matrix);
    let data = s.eval_dataset(setting)?;
    let bank = s.pools_for(&data)?;
    let circuit = expand_circuit(&s.model, base, &data, &ranking, &bank, &s.config.search_config())?;
    let summary = circuit.search.as_ref().expect("search summary");
    Ok(ExpandOutcome {
        summary: (circuit.len(), summary.final_accuracy, summary.full_accuracy),
        vs_base: compare_circuits(base, &circuit),
        circuit,
    })
}

pub fn cmd_expand(s: &Session, base: &Circuit) -> Result<(ExpandOutcome, Manifest)> {
    let out = expand(s, base)?;
    let mut w = s.writer("expand")?;
    w.write_json("circuit.json", &out.circuit)?;
    w.write_json("expansion.json", &out)?;
    Ok((out, w.finish()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnockoutOutcome {
    pub circuit: Circuit,
    pub knockout: KnockoutResult,
    pub full: EvalReport,
}

pub fn knockout(s: &Session, circuit: &Circuit) -> Result<KnockoutOutcome> {
    for h in &circuit.heads {
        h.check(s.model.config())?;
    }
    let data = s.eval_dataset(s.config.setting)?;
    let bank = s.pools_for(&data)?;
    let ko = knockout_eval(&s.model, &circuit.head_set(), &data, &bank, &s.config.knockout_config())?;
    let all: BTreeSet<HeadId> = HeadId::all(s.model.config()).collect();
    let full = knockout_eval(&s.model, &all, &data, &bank, &s.config.knockout_config())?.report;
    Ok(KnockoutOutcome {
        circuit: circuit.clone(),
        knockout: ko,
        full,
    })
}

pub fn cmd_knockout(s: &Session, circuit: &Circuit) -> Result<(KnockoutOutcome, Manifest)> {
    let out = knockout(s, circuit)?;
    let mut w = s.writer("knockout")?;
    w.write_json("knockout.json", &out)?;
    Ok((out, w.finish()?))
}

/// Patterns for `heads` on `texts`, or on the probe sentences when `texts`
/// is empty. Text-major order.
pub fn attn(s: &Session, heads: &[HeadId], texts: &[String]) -> Result<Vec<AttentionPattern>> {
    if texts.is_empty() {
        return probe_suite(&s.model, heads);
    }
    let mut out = Vec::new();
    for t in texts {
        if s.model.encode(t).is_empty() {
            return Err(Error::EmptyInput("attention text encodes to no tokens"));
        }
        out.extend(attention_patterns(&s.model, t, heads)?);
    }
    Ok(out)
}

pub fn cmd_attn(s: &Session, heads: &[HeadId], texts: &[String]) -> Result<(Vec<AttentionPattern>, Manifest)> {
    let patterns = attn(s, heads, texts)?;
    let mut w = s.writer("attn")?;
    let n_heads = heads.len().max(1);
    for (i, p) in patterns.iter().enumerate() {
        let stem = format!("attention/t{}_l{}_h{}", i / n_heads, p.head.layer, p.head.head);
        w.write(&format!("{stem}.csv"), p.to_csv()?.as_bytes())?;
        w.write(&format!("{stem}.pgm"), &p.to_pgm(16))?;
    }
    w.write_json("patterns.json", &patterns)?;
    Ok((patterns, w.finish()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlaOutcome {
    pub mean_abs_heads: Vec<Vec<f64>>,
    pub max_completeness_error: f64,
    pub reports: Vec<DlaReport>,
}

pub fn dla(s: &Session) -> Result<DlaOutcome> {
    let data = s.dataset(s.config.setting, s.config.dataset_size(s.config.setting))?;
    let reports = dla_sweep(&s.model, &data.instances)?;
    Ok(DlaOutcome {
        mean_abs_heads: mean_abs_head_dla(&reports)?,
        max_completeness_error: reports.iter().map(|r| r.completeness_error()).fold(0.0, f64::max),
        reports,
    })
}

pub fn cmd_dla(s: &Session) -> Result<(DlaOutcome, Manifest)> {
    let out = dla(s)?;
    let mut w = s.writer("dla")?;
    w.write_json("dla.json", &out)?;
    let mut csv = String::from("layer");
    for h in 0..s.model.config().n_heads {
        csv.push_str(&format!(",h{h}"));
    }
    csv.push('\n');
    for (l, row) in out.mean_abs_heads.iter().enumerate() {
        csv.push_str(&l.to_string());
        for v in row {
            csv.push_str(&format!(",{v:.6}"));
        }
        csv.push('\n');
    }
    w.write("dla_mean_abs.csv", csv.as_bytes())?;
    Ok((out, w.finish()?))
}

/// Prompts only; needs no model.
pub fn gen(config: &RunConfig) -> Result<(Dataset, Manifest)> {
    config.validate()?;
    let lexicon = config.load_lexicon()?;
    lexicon.validate(&crate::model::Tokenizer::gpt2())?;
    let n = config.dataset_size(config.setting);
    let data = setting_dataset_with(config.setting, n, &lexicon, config.seeds.dataset, config.contrast)?;
    let mut w = ArtifactWriter::create(&config.output_dir, "gen", config)?;
    let mut buf = Vec::new();
    data.write_jsonl(&mut buf)?;
    w.write("prompts.jsonl", &buf)?;
    Ok((data, w.finish()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::prompts::Factor;

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
        Model::synthetic(cfg, 8)
    }

    fn session(dir: &Path) -> Session {
        let mut cfg = RunConfig::desk();
        cfg.n_per_cell = 2;
        cfg.pool_size = 2;
        cfg.search.eval_n = 6;
        cfg.search.patience = 2;
        cfg.output_dir = dir.to_path_buf();
        Session::with_model(tiny(), cfg).unwrap()
    }

    #[test]
    fn verify_matches_separate_setting_datasets() {
        let dir = tempfile::tempdir().unwrap();
        let s = session(dir.path());
        let out = verify(&s).unwrap();
        assert_eq!(out.summary.len(), 8);
        assert_eq!(out.per_cell.len(), 64);
        let neg = s.dataset(Setting::Flip(Factor::Negated), 2).unwrap();
        let direct = evaluate_dataset(&s.model, &neg).unwrap().aggregate.overall;
        assert_eq!(out.summary[2].mean_logit_diff, direct.mean_logit_diff);
        assert_eq!(out.summary[2].group_key.as_deref(), Some("is_negated"));
    }

    #[test]
    fn verify_artifacts_are_byte_stable_across_workers() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut s1 = session(a.path());
        s1.config.workers = Some(1);
        let mut s2 = session(b.path());
        s2.config.workers = Some(3);
        let (_, m1) = s1.install(|| cmd_verify(&s1)).unwrap().unwrap();
        let (_, m2) = s2.install(|| cmd_verify(&s2)).unwrap().unwrap();
        assert_eq!(m1.artifacts, m2.artifacts);
        let read = |d: &Path| std::fs::read(d.join("manifest.json")).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
    }

    #[test]
    fn search_then_knockout_agree() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = session(dir.path());
        s.config.setting = Setting::Flip(Factor::Pronoun);
        let (out, _) = cmd_search(&s).unwrap();
        let reloaded = load_circuit(dir.path().join("circuit.json").to_str().unwrap()).unwrap();
        assert_eq!(reloaded, out.circuit);
        let ko = knockout(&s, &reloaded).unwrap();
        assert_eq!(
            ko.knockout.report.accuracy,
            out.circuit.search.as_ref().unwrap().final_accuracy
        );
    }

    #[test]
    fn expand_and_attn_and_dla_write_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let s = session(dir.path());
        let base = Circuit::from_head_list("base", "(1, 1)").unwrap();
        let (e, _) = cmd_expand(&s, &base).unwrap();
        assert!(e.vs_base.only_a.is_empty());
        let (p, m) = cmd_attn(&s, &[HeadId::new(0, 0), HeadId::new(1, 2)], &[]).unwrap();
        assert_eq!(p.len(), 8);
        assert_eq!(m.artifacts.len(), 17);
        let (d, _) = cmd_dla(&s).unwrap();
        assert!(d.max_completeness_error < 1e-4);
        assert!(dir.path().join("dla_mean_abs.csv").is_file());
    }

    #[test]
    fn gen_writes_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::desk();
        cfg.setting = Setting::All;
        cfg.n_per_cell = 1;
        cfg.output_dir = dir.path().to_path_buf();
        let (d, m) = gen(&cfg).unwrap();
        assert_eq!(d.len(), 64);
        assert_eq!(m.artifacts[0].path, "prompts.jsonl");
    }

    #[test]
    fn unknown_reference_circuit_is_validation_error() {
        assert_eq!(load_circuit("NoSuchCircuit").unwrap_err().exit_code(), 3);
    }
}
