//! Direct logit attribution and attention-pattern extraction.

mod attention;
mod dla;

pub use attention::{attention_pattern, attention_patterns, probe_suite, AttentionPattern, PROBES};
pub use dla::{dla_sweep, direct_logit_attribution, head_write, mean_abs_head_dla, DlaReport, LogitDirection};
