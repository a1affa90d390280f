//! Activation patching: ablation strategies, counterfactual head effects
//! and circuit knockout.

mod ablation;
mod effects;
mod knockout;
mod pool;

pub use ablation::{AblationKind, AblationStrategy, ResampleMode};
pub use effects::{
    effect_matrix, head_effect, splice_final_row, EffectSweep, HeadEffectMatrix, PairAlignment, PatchAlignment,
    PatchPair, SkipReport,
};
pub use knockout::{knockout_eval, knockout_patches, knockout_prepared, prepare_all, KnockoutConfig, KnockoutResult};
pub use pool::{ActivationPool, PoolBank, PoolEntry, PoolSpec};
