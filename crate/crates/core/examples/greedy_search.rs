//! Greedy circuit search under resample ablation.

use sva_circuits::circuits::{compare_circuits, greedy_search, rank_heads, Circuit, SearchConfig};
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
    let ranking_data = setting_dataset(Setting::Base, 2, &lex, 0)?;
    let ranked = rank_heads(&effect_matrix(&model, &ranking_data, Factor::Plural, &lex, PatchAlignment::Auto)?.matrix);

    let cfg = SearchConfig {
        eval_n: 8,
        patience: 4,
        ..SearchConfig::default()
    };
    let data = setting_dataset(Setting::Base, cfg.eval_n, &lex, 0)?;
    let bank = PoolBank::for_dataset(&model, &data, Setting::Base, &lex, PoolSpec::new(4, 1))?;
    let circuit = greedy_search(&model, &data, &ranked, &bank, &cfg)?;

    let s = circuit.search.as_ref().expect("searched circuit");
    println!("{} heads, acc {:.3} (full {:.3}), stop {:?}", circuit.len(), s.final_accuracy, s.full_accuracy, s.stop_reason);
    for e in &circuit.provenance {
        println!("  + {}  acc {:.3}  diff {:+.3}", e.head, e.accuracy, e.mean_logit_diff);
    }
    let published = Circuit::reference("Base")?;
    let cmp = compare_circuits(&circuit, &published);
    println!("overlap with published base circuit: {} heads, jaccard {:.2}", cmp.shared.len(), cmp.jaccard);
    Ok(())
}
