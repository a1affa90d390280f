//! Reproducible experiment runs: one config, seeded commands, and a run
//! directory whose manifest hashes every artifact.

mod artifacts;
mod commands;
mod config;

pub use artifacts::{ArtifactRecord, ArtifactWriter, Envelope, Manifest, MANIFEST_FILE};
pub use commands::{
    attn, cmd_attn, cmd_dla, cmd_effects, cmd_expand, cmd_knockout, cmd_search, cmd_verify, dla, expand, gen,
    knockout, load_circuit, search, verify, DlaOutcome, ExpandOutcome, KnockoutOutcome, SearchOutcome, Session,
    VerifyOutcome,
};
pub use config::{RunConfig, SearchSection, Seeds};
