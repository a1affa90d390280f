//! Full-model accuracy per setting and per cell.
//!
//! Uses the checkpoint in $MODEL_DIR; falls back to random weights.

use sva_circuits::eval::{evaluate_dataset, per_cell_csv};
use sva_circuits::model::{Model, ModelConfig};
use sva_circuits::prompts::{setting_dataset, Lexicon, Setting};

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
    for setting in Setting::ALL_SETTINGS {
        let n = if setting == Setting::All { 64 } else { 8 };
        let data = setting_dataset(setting, n, &lex, 0)?;
        let eval = evaluate_dataset(&model, &data)?;
        let r = &eval.aggregate.overall;
        println!(
            "{:<14} n={:<3} acc {:.3}  f1 {:.3}  diff {:+.3} ± {:.3}",
            setting.label(),
            r.count,
            r.accuracy,
            r.f1,
            r.mean_logit_diff,
            r.std_logit_diff
        );
        if setting == Setting::All {
            println!("{}", per_cell_csv(&eval.aggregate.per_cell).lines().take(5).collect::<Vec<_>>().join("\n"));
        }
    }
    Ok(())
}
