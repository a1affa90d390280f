//! Circuits: greedy search, expansion to new settings, and comparison.

mod circuit;
mod search;

pub use circuit::{compare_circuits, compare_sets, Circuit, CircuitComparison, ProvenanceEntry};
pub use search::{expand_circuit, greedy_search, rank_heads, SearchConfig, SearchSummary, StopReason};
