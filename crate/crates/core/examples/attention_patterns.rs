//! Attention of selected heads on the agreement probes, as CSV and PGM.

use sva_circuits::analysis::probe_suite;
use sva_circuits::model::{HeadId, Model, ModelConfig};

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
    let heads = [HeadId::new(0, 8), HeadId::new(11, 7), HeadId::new(11, 6)];
    let out = std::env::temp_dir().join("sva_attention");
    std::fs::create_dir_all(&out).map_err(|e| sva_circuits::Error::io(&out, e))?;
    for p in probe_suite(&model, &heads)? {
        let (diag, off) = p.diagonal_vs_off();
        println!(
            "{} {:<22} final-query max {:.3}  diag {:.3} off {:.3}",
            p.head,
            format!("{:?}", p.text),
            p.final_query_max(),
            diag,
            off
        );
        let stem = out.join(format!("{}_{}_{}", p.text.replace(' ', "_"), p.head.layer, p.head.head));
        let csv = stem.with_extension("csv");
        std::fs::write(&csv, p.to_csv()?).map_err(|e| sva_circuits::Error::io(&csv, e))?;
        let pgm = stem.with_extension("pgm");
        std::fs::write(&pgm, p.to_pgm(24)).map_err(|e| sva_circuits::Error::io(&pgm, e))?;
    }
    println!("wrote heatmaps to {}", out.display());
    Ok(())
}
