//! Evaluate published circuits with every other head resample-ablated.

use std::collections::BTreeSet;

use sva_circuits::circuits::Circuit;
use sva_circuits::model::{HeadId, Model, ModelConfig};
use sva_circuits::patching::{knockout_eval, AblationKind, KnockoutConfig, PoolBank, PoolSpec};
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
    let data = setting_dataset(Setting::Base, 8, &lex, 0)?;
    let bank = PoolBank::for_dataset(&model, &data, Setting::Base, &lex, PoolSpec::new(8, 1))?;

    let all: BTreeSet<HeadId> = HeadId::all(model.config()).collect();
    let base = Circuit::reference("Base")?.head_set();
    let empty = BTreeSet::new();
    for kind in [AblationKind::Resample, AblationKind::Mean, AblationKind::Zero] {
        let cfg = KnockoutConfig {
            ablation: kind,
            ..KnockoutConfig::resample(2)
        };
        for (name, circuit) in [("all heads", &all), ("base (12)", &base), ("none", &empty)] {
            let r = knockout_eval(&model, circuit, &data, &bank, &cfg)?.report;
            println!("{kind:<9} {name:<10} acc {:.3}  diff {:+.3}", r.accuracy, r.mean_logit_diff);
        }
    }
    Ok(())
}
