//! Grow the published base circuit to cover pronoun subjects.

use sva_circuits::circuits::{compare_circuits, expand_circuit, rank_heads, Circuit, SearchConfig};
use sva_circuits::model::{Model, ModelConfig};
use sva_circuits::patching::{effect_matrix, PatchAlignment, PoolBank, PoolSpec};
use sva_circuits::prompts::{setting_dataset, Factor, Lexicon, Setting};

fn load_model() -> sva_circuits::Result<Model> {
    match Model::default_dir() {
        Some(dir) => Model::from_dir(dir),
        None => {
            eprintln!("MODEL_DIR unset: using random weights, numbers are meaningless");
            Ok(Model::synthetic(ModelConfig::gpt2_small(), 1))
        }
    }
}

fn main() -> sva_circuits::Result<()> {
    let model = load_model()?;
    let lex = Lexicon::default();
    let setting = Setting::Flip(Factor::Pronoun);
    let base = Circuit::reference("Base")?;

    let ranking_data = setting_dataset(setting, 2, &lex, 0)?;
    let ranked = rank_heads(&effect_matrix(&model, &ranking_data, Factor::Plural, &lex, PatchAlignment::Auto)?.matrix);
    let cfg = SearchConfig {
        eval_n: 8,
        patience: 4,
        ..SearchConfig::default()
    };
    let data = setting_dataset(setting, cfg.eval_n, &lex, 0)?;
    let bank = PoolBank::for_dataset(&model, &data, setting, &lex, PoolSpec::new(4, 1))?;
    let grown = expand_circuit(&model, &base, &data, &ranked, &bank, &cfg)?;

    let s = grown.search.as_ref().expect("searched circuit");
    println!(
        "{} -> {} heads on {}: acc {:.3} (start {:.3}, full {:.3})",
        base.len(),
        grown.len(),
        setting.label(),
        s.final_accuracy,
        s.initial_accuracy,
        s.full_accuracy
    );
    let published = Circuit::reference("Pronoun")?;
    println!("jaccard with published pronoun circuit: {:.2}", compare_circuits(&grown, &published).jaccard);
    Ok(())
}
