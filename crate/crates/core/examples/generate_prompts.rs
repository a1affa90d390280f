//! The 64-cell factor grid and per-setting datasets with counterfactuals.

use sva_circuits::prompts::{counterfactual, generate_grid, setting_dataset, Factor, Lexicon, Setting};

fn main() -> sva_circuits::Result<()> {
    let lex = Lexicon::default();
    let grid = generate_grid(1, &lex, 7)?;
    println!("grid: {} prompts, one per cell", grid.len());
    for p in grid.instances.iter().step_by(9) {
        println!("  {:<55} {:?} / {:?}", p.factors.label(), p.text, (&p.correct, &p.incorrect));
    }

    for setting in Setting::ALL_SETTINGS {
        let d = setting_dataset(setting, 3, &lex, 7)?;
        println!("{:<14} {:?}", setting.label(), d.instances[0].text);
    }

    let p = &grid.instances[0];
    for flip in Factor::ALL {
        let cf = counterfactual(p, flip, &lex)?;
        println!("flip {:<13} {:?} -> {:?}", flip.name(), cf.text, (&cf.correct, &cf.incorrect));
    }

    let mut jsonl = Vec::new();
    grid.write_jsonl(&mut jsonl)?;
    println!("jsonl: {} bytes", jsonl.len());
    Ok(())
}
