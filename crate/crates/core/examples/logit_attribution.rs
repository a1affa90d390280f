//! Direct logit attribution of the answer logit difference.

use sva_circuits::analysis::{direct_logit_attribution, dla_sweep, mean_abs_head_dla};
use sva_circuits::model::{HeadId, Model, ModelConfig};
use sva_circuits::prompts::{build_prompt, setting_dataset, Lexicon, PromptFactors, Setting};

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
    let p = build_prompt(PromptFactors::BASE, &lex, 3)?;
    let r = direct_logit_attribution(&model, &p)?;
    println!("{:?} {:?}/{:?}: total {:+.4}", r.text, r.correct, r.incorrect, r.total);
    println!(
        "  embedding {:+.4}  heads {:+.4}  residual {:+.4}  completeness error {:.1e}",
        r.embedding,
        r.head_sum(),
        r.residual,
        r.completeness_error()
    );

    let data = setting_dataset(Setting::All, 64, &lex, 0)?;
    let reports = dla_sweep(&model, &data.instances)?;
    let grid = mean_abs_head_dla(&reports)?;
    let mut heads: Vec<(HeadId, f64)> = HeadId::all(model.config())
        .map(|h| (h, grid[h.layer][h.head]))
        .collect();
    heads.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("largest mean |DLA| over {} prompts:", reports.len());
    for (h, v) in heads.iter().take(6) {
        println!("  {h}  {v:.4}");
    }
    Ok(())
}
