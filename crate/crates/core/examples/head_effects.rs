//! Per-head activation patching from plural counterfactuals.

use sva_circuits::circuits::rank_heads;
use sva_circuits::model::{Model, ModelConfig};
use sva_circuits::patching::{effect_matrix, PatchAlignment};
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
    let data = setting_dataset(Setting::Base, 4, &lex, 0)?;
    let sweep = effect_matrix(&model, &data, Factor::Plural, &lex, PatchAlignment::Auto)?;
    println!(
        "{} pairs ({} position-wise, {} final-position)",
        sweep.skips.pairs, sweep.skips.positionwise, sweep.skips.final_position
    );
    for h in rank_heads(&sweep.matrix).iter().take(8) {
        println!(
            "  {h}  mean {:+.4}  mean |.| {:.4}",
            sweep.matrix.mean(*h),
            sweep.matrix.mean_abs(*h)
        );
    }
    print!("{}", sweep.matrix.grid_csv(true));
    Ok(())
}
