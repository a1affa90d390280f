//! Hook-point types: head coordinates, captured activations and patch sets.
//!
//! The hook point is the per-head attention result `z` (softmax-weighted sum of
//! value vectors), shape `(seq, d_head)`, taken before the head's slice of the
//! output projection. Patching a head replaces its `z` and leaves the rest of
//! the forward pass untouched.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelConfig;
use crate::error::{Error, Result};

/// `(layer, head)` coordinate of an attention head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HeadId {
    pub layer: usize,
    pub head: usize,
}

impl HeadId {
    pub const fn new(layer: usize, head: usize) -> Self {
        Self { layer, head }
    }

    pub fn check(self, cfg: &ModelConfig) -> Result<Self> {
        if self.layer < cfg.n_layers && self.head < cfg.n_heads {
            Ok(self)
        } else {
            Err(Error::InvalidHead(self))
        }
    }

    /// Row-major index into a `n_layers x n_heads` grid.
    pub fn flat_index(self, n_heads: usize) -> usize {
        self.layer * n_heads + self.head
    }

    pub fn from_flat_index(index: usize, n_heads: usize) -> Self {
        Self::new(index / n_heads, index % n_heads)
    }

    /// All heads of a model in `(layer, head)` ascending order.
    pub fn all(cfg: &ModelConfig) -> impl Iterator<Item = HeadId> {
        let n_heads = cfg.n_heads;
        (0..cfg.total_heads()).map(move |i| HeadId::from_flat_index(i, n_heads))
    }
}

impl fmt::Display for HeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.layer, self.head)
    }
}

impl Serialize for HeadId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.layer, self.head).serialize(s)
    }
}

impl<'de> Deserialize<'de> for HeadId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (layer, head) = <(usize, usize)>::deserialize(d)?;
        Ok(HeadId::new(layer, head))
    }
}

/// Token ids of one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    ids: Vec<u32>,
}

impl TokenSequence {
    pub fn new(ids: Vec<u32>) -> Self {
        Self { ids }
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Position of the last token, `None` for an empty sequence.
    pub fn final_index(&self) -> Option<usize> {
        self.ids.len().checked_sub(1)
    }
}

impl From<Vec<u32>> for TokenSequence {
    fn from(ids: Vec<u32>) -> Self {
        Self::new(ids)
    }
}

/// Per-head attention result `z`, shape `(seq, d_head)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadActivation {
    values: Array2<f32>,
}

impl HeadActivation {
    pub fn new(values: Array2<f32>) -> Self {
        Self { values }
    }

    pub fn zeros(seq_len: usize, d_head: usize) -> Self {
        Self::new(Array2::zeros((seq_len, d_head)))
    }

    pub fn values(&self) -> ArrayView2<'_, f32> {
        self.values.view()
    }

    pub fn values_mut(&mut self) -> &mut Array2<f32> {
        &mut self.values
    }

    pub fn into_inner(self) -> Array2<f32> {
        self.values
    }

    pub fn seq_len(&self) -> usize {
        self.values.nrows()
    }

    pub fn d_head(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Everything captured during one forward pass.
#[derive(Debug, Clone)]
pub struct ActivationCache {
    pub(crate) n_heads: usize,
    /// `z` for every head, indexed by [`HeadId::flat_index`].
    pub(crate) head_outputs: Vec<HeadActivation>,
    /// Post-softmax attention pattern `(seq, seq)` for every head.
    pub(crate) attention_patterns: Vec<Array2<f32>>,
    /// Token + position embedding, `(seq, d_model)`.
    pub(crate) embedding: Array2<f32>,
    /// Output of each MLP block, `(seq, d_model)` per layer.
    pub(crate) mlp_outputs: Vec<Array2<f32>>,
    /// Residual stream before the final layernorm, `(seq, d_model)`.
    pub(crate) final_residual: Array2<f32>,
}

impl ActivationCache {
    pub fn seq_len(&self) -> usize {
        self.final_residual.nrows()
    }

    pub fn head_output(&self, head: HeadId) -> &HeadActivation {
        &self.head_outputs[head.flat_index(self.n_heads)]
    }

    pub fn head_outputs(&self) -> &[HeadActivation] {
        &self.head_outputs
    }

    pub fn attention_pattern(&self, head: HeadId) -> ArrayView2<'_, f32> {
        self.attention_patterns[head.flat_index(self.n_heads)].view()
    }

    pub fn embedding(&self) -> ArrayView2<'_, f32> {
        self.embedding.view()
    }

    pub fn mlp_output(&self, layer: usize) -> ArrayView2<'_, f32> {
        self.mlp_outputs[layer].view()
    }

    pub fn final_residual(&self) -> ArrayView2<'_, f32> {
        self.final_residual.view()
    }

    /// Move the per-head activations out, dropping the rest of the cache.
    pub fn into_head_outputs(self) -> Vec<HeadActivation> {
        self.head_outputs
    }
}

/// Replacement activations keyed by head. A head appears at most once.
#[derive(Debug, Clone, Default)]
pub struct PatchSet {
    entries: BTreeMap<HeadId, HeadActivation>,
}

impl PatchSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a replacement, returning the one it displaced.
    pub fn insert(&mut self, head: HeadId, value: HeadActivation) -> Option<HeadActivation> {
        self.entries.insert(head, value)
    }

    pub fn get(&self, head: HeadId) -> Option<&HeadActivation> {
        self.entries.get(&head)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn heads(&self) -> impl Iterator<Item = HeadId> + '_ {
        self.entries.keys().copied()
    }

    /// Check every entry against a run of `seq_len` tokens.
    pub fn validate(&self, cfg: &ModelConfig, seq_len: usize) -> Result<()> {
        for (&head, act) in &self.entries {
            head.check(cfg)?;
            let expected = (seq_len, cfg.d_head);
            if act.shape() != expected {
                return Err(Error::PatchShape {
                    head,
                    expected,
                    found: act.shape(),
                });
            }
        }
        Ok(())
    }
}

impl FromIterator<(HeadId, HeadActivation)> for PatchSet {
    fn from_iter<I: IntoIterator<Item = (HeadId, HeadActivation)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_index_round_trips() {
        let cfg = ModelConfig::gpt2_small();
        for (i, h) in HeadId::all(&cfg).enumerate() {
            assert_eq!(h.flat_index(cfg.n_heads), i);
            assert_eq!(HeadId::from_flat_index(i, cfg.n_heads), h);
        }
        assert_eq!(HeadId::all(&cfg).count(), 144);
    }

    #[test]
    fn head_bounds() {
        let cfg = ModelConfig::gpt2_small();
        assert!(HeadId::new(11, 11).check(&cfg).is_ok());
        assert!(HeadId::new(12, 0).check(&cfg).is_err());
        assert!(HeadId::new(0, 12).check(&cfg).is_err());
    }

    #[test]
    fn head_id_serializes_as_pair() {
        let json = serde_json::to_string(&HeadId::new(11, 7)).unwrap();
        assert_eq!(json, "[11,7]");
        let back: HeadId = serde_json::from_str(&json).unwrap();
        assert_eq!(back, HeadId::new(11, 7));
    }

    #[test]
    fn patch_set_shape_validation() {
        let cfg = ModelConfig::gpt2_small();
        let mut patches = PatchSet::new();
        patches.insert(HeadId::new(3, 4), HeadActivation::zeros(5, 64));
        assert!(patches.validate(&cfg, 5).is_ok());
        assert!(matches!(
            patches.validate(&cfg, 4),
            Err(Error::PatchShape { expected: (4, 64), found: (5, 64), .. })
        ));
        let displaced = patches.insert(HeadId::new(3, 4), HeadActivation::zeros(4, 64));
        assert!(displaced.is_some());
        assert_eq!(patches.len(), 1);
    }

    #[test]
    fn final_index() {
        assert_eq!(TokenSequence::new(vec![]).final_index(), None);
        assert_eq!(TokenSequence::new(vec![1, 2, 3]).final_index(), Some(2));
    }
}
