//! Deterministic f32 forward pass with capture and per-head patch hooks.
//!
//! All reductions (layernorm moments, softmax normaliser) are sequential left
//! to right over the feature/key axis, and matrix products go through
//! `ndarray`'s single-threaded kernels, so a fixed input gives bit-identical
//! output on every call.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::hooks::{ActivationCache, HeadActivation, PatchSet, TokenSequence};
use super::{HeadId, Model};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOptions {
    /// Record an [`ActivationCache`].
    pub capture: bool,
    /// Also return logits for every position, not just the last.
    pub all_logits: bool,
}

impl ForwardOptions {
    pub fn capture() -> Self {
        Self {
            capture: true,
            all_logits: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Next-token logits at the final position, length `vocab_size`.
    pub logits: Array1<f32>,
    pub all_logits: Option<Array2<f32>>,
    pub cache: Option<ActivationCache>,
}

/// Mean and `sqrt(var + eps)` of one residual vector.
pub(crate) fn ln_moments(x: ArrayView1<'_, f32>, eps: f32) -> (f32, f32) {
    let n = x.len() as f32;
    let mut sum = 0.0f32;
    for &v in x.iter() {
        sum += v;
    }
    let mean = sum / n;
    let mut sq = 0.0f32;
    for &v in x.iter() {
        let c = v - mean;
        sq += c * c;
    }
    (mean, (sq / n + eps).sqrt())
}

pub(crate) fn layer_norm(
    x: ArrayView2<'_, f32>,
    weight: &Array1<f32>,
    bias: &Array1<f32>,
    eps: f32,
) -> Array2<f32> {
    let mut out = Array2::zeros(x.raw_dim());
    for (row, mut dst) in x.outer_iter().zip(out.outer_iter_mut()) {
        let (mean, scale) = ln_moments(row, eps);
        for (((d, &v), &w), &b) in dst.iter_mut().zip(row.iter()).zip(weight.iter()).zip(bias.iter()) {
            *d = (v - mean) / scale * w + b;
        }
    }
    out
}

/// GPT-2's tanh approximation of GELU.
fn gelu_new(x: f32) -> f32 {
    const C: f32 = 0.797_884_6; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

fn add_bias(m: &mut Array2<f32>, bias: &Array1<f32>) {
    for mut row in m.outer_iter_mut() {
        row += bias;
    }
}

/// Causal softmax of `scores` in place; entries above the diagonal become exactly 0.
fn causal_softmax(scores: &mut Array2<f32>) {
    for (i, mut row) in scores.outer_iter_mut().enumerate() {
        let mut max = f32::NEG_INFINITY;
        for &v in row.iter().take(i + 1) {
            max = max.max(v);
        }
        let mut sum = 0.0f32;
        for v in row.iter_mut().take(i + 1) {
            *v = (*v - max).exp();
            sum += *v;
        }
        for (j, v) in row.iter_mut().enumerate() {
            if j <= i {
                *v /= sum;
            } else {
                *v = 0.0;
            }
        }
    }
}

impl Model {
    pub fn forward(
        &self,
        tokens: &TokenSequence,
        patches: &PatchSet,
        opts: ForwardOptions,
    ) -> Result<ForwardOutput> {
        let cfg = &self.config;
        let w = &self.weights;
        let n = tokens.len();
        if n == 0 {
            return Err(Error::EmptySequence);
        }
        if n > cfg.context_len {
            return Err(Error::SequenceTooLong {
                len: n,
                max: cfg.context_len,
            });
        }
        if let Some(&id) = tokens.ids().iter().find(|&&id| id as usize >= cfg.vocab_size) {
            return Err(Error::TokenOutOfRange {
                id,
                vocab_size: cfg.vocab_size,
            });
        }
        patches.validate(cfg, n)?;

        let (d, dh) = (cfg.d_model, cfg.d_head);
        let mut x = Array2::<f32>::zeros((n, d));
        for (pos, (&id, mut row)) in tokens.ids().iter().zip(x.outer_iter_mut()).enumerate() {
            row.assign(&w.token_embedding.row(id as usize));
            row += &w.position_embedding.row(pos);
        }

        let total = cfg.total_heads();
        let mut head_outputs = Vec::with_capacity(if opts.capture { total } else { 0 });
        let mut patterns = Vec::with_capacity(if opts.capture { total } else { 0 });
        let mut mlp_outputs = Vec::with_capacity(if opts.capture { cfg.n_layers } else { 0 });
        let embedding = opts.capture.then(|| x.clone());
        let inv_sqrt_dh = 1.0 / (dh as f32).sqrt();

        for (layer, lw) in w.layers.iter().enumerate() {
            let h = layer_norm(x.view(), &lw.ln1_weight, &lw.ln1_bias, cfg.ln_epsilon);
            let mut qkv = h.dot(&lw.attn_weight);
            add_bias(&mut qkv, &lw.attn_bias);

            let mut merged = Array2::<f32>::zeros((n, d));
            for head in 0..cfg.n_heads {
                let id = HeadId::new(layer, head);
                let cols = head * dh..(head + 1) * dh;
                let q = qkv.slice(s![.., cols.clone()]);
                let k = qkv.slice(s![.., d + cols.start..d + cols.end]);
                let v = qkv.slice(s![.., 2 * d + cols.start..2 * d + cols.end]);

                let mut pattern = q.dot(&k.t());
                pattern.mapv_inplace(|s| s * inv_sqrt_dh);
                causal_softmax(&mut pattern);
                let z = pattern.dot(&v);

                let mut dst = merged.slice_mut(s![.., cols]);
                match patches.get(id) {
                    Some(rep) => dst.assign(&rep.values()),
                    None => dst.assign(&z),
                }
                if opts.capture {
                    // Capture the computed activation, not the replacement.
                    head_outputs.push(HeadActivation::new(z));
                    patterns.push(pattern);
                }
            }
            let mut attn_out = merged.dot(&lw.attn_out_weight);
            add_bias(&mut attn_out, &lw.attn_out_bias);
            x += &attn_out;

            let h2 = layer_norm(x.view(), &lw.ln2_weight, &lw.ln2_bias, cfg.ln_epsilon);
            let mut hidden = h2.dot(&lw.mlp_in_weight);
            add_bias(&mut hidden, &lw.mlp_in_bias);
            hidden.mapv_inplace(gelu_new);
            let mut mlp_out = hidden.dot(&lw.mlp_out_weight);
            add_bias(&mut mlp_out, &lw.mlp_out_bias);
            x += &mlp_out;
            if opts.capture {
                mlp_outputs.push(mlp_out);
            }
        }

        let normed = if opts.all_logits {
            layer_norm(x.view(), &w.ln_final_weight, &w.ln_final_bias, cfg.ln_epsilon)
        } else {
            layer_norm(
                x.slice(s![n - 1..n, ..]),
                &w.ln_final_weight,
                &w.ln_final_bias,
                cfg.ln_epsilon,
            )
        };
        let last = normed.index_axis(Axis(0), normed.nrows() - 1);
        let logits = w.token_embedding.dot(&last);
        let all_logits = opts.all_logits.then(|| normed.dot(&w.token_embedding.t()));

        let cache = opts.capture.then(|| ActivationCache {
            n_heads: cfg.n_heads,
            head_outputs,
            attention_patterns: patterns,
            embedding: embedding.expect("captured"),
            mlp_outputs,
            final_residual: x,
        });
        Ok(ForwardOutput {
            logits,
            all_logits,
            cache,
        })
    }

    /// Final-position logits with optional patches.
    pub fn logits(&self, tokens: &TokenSequence, patches: &PatchSet) -> Result<Array1<f32>> {
        Ok(self.forward(tokens, patches, ForwardOptions::default())?.logits)
    }

    /// Unpatched run that records every hook point.
    pub fn run_with_cache(&self, tokens: &TokenSequence) -> Result<(Array1<f32>, ActivationCache)> {
        let out = self.forward(tokens, &PatchSet::new(), ForwardOptions::capture())?;
        Ok((out.logits, out.cache.expect("capture requested")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny_model() -> Model {
        let cfg = ModelConfig {
            n_layers: 2,
            n_heads: 3,
            d_model: 12,
            d_head: 4,
            d_mlp: 24,
            vocab_size: 50257,
            context_len: 32,
            ln_epsilon: 1e-5,
        };
        Model::synthetic(cfg, 11)
    }

    #[test]
    fn softmax_rows_and_mask() {
        let mut m = Array2::from_shape_fn((4, 4), |(i, j)| (i * 3 + j) as f32 * 0.37 - 1.0);
        causal_softmax(&mut m);
        for (i, row) in m.outer_iter().enumerate() {
            let sum: f32 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            for j in i + 1..4 {
                assert_eq!(row[j], 0.0);
            }
        }
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu_new(0.0), 0.0);
        // torch.nn.functional.gelu(x, approximate="tanh")
        assert!((gelu_new(1.0) - 0.841_192).abs() < 1e-5);
        assert!((gelu_new(-2.0) - -0.045_402_3).abs() < 1e-5);
    }

    #[test]
    fn layer_norm_unit_variance() {
        let x = Array2::from_shape_fn((2, 6), |(i, j)| (i + 1) as f32 * j as f32);
        let ones = Array1::ones(6);
        let zeros = Array1::zeros(6);
        let y = layer_norm(x.view(), &ones, &zeros, 0.0);
        for row in y.outer_iter() {
            let mean: f32 = row.sum() / 6.0;
            let var: f32 = row.iter().map(|v| (v - mean).powi(2)).sum::<f32>() / 6.0;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn deterministic_and_identity_patch() {
        let model = tiny_model();
        let toks = TokenSequence::new(vec![464, 3290, 318, 257]);
        let a = model.logits(&toks, &PatchSet::new()).unwrap();
        let (b, cache) = model.run_with_cache(&toks).unwrap();
        assert_eq!(a, b);
        for head in HeadId::all(&model.config) {
            let mut p = PatchSet::new();
            p.insert(head, cache.head_output(head).clone());
            let patched = model.logits(&toks, &p).unwrap();
            assert_eq!(patched, a, "identity patch at {head}");
        }
    }

    #[test]
    fn cache_shapes() {
        let model = tiny_model();
        let toks = TokenSequence::new(vec![1, 2, 3, 4, 5]);
        let (_, cache) = model.run_with_cache(&toks).unwrap();
        assert_eq!(cache.head_outputs().len(), 6);
        assert_eq!(cache.head_output(HeadId::new(1, 2)).shape(), (5, 4));
        assert_eq!(cache.attention_pattern(HeadId::new(0, 0)).dim(), (5, 5));
        assert_eq!(cache.final_residual().dim(), (5, 12));
        assert_eq!(cache.mlp_output(1).dim(), (5, 12));
    }

    #[test]
    fn all_logits_last_row_matches() {
        let model = tiny_model();
        let toks = TokenSequence::new(vec![7, 8, 9]);
        let out = model
            .forward(&toks, &PatchSet::new(), ForwardOptions { capture: false, all_logits: true })
            .unwrap();
        let all = out.all_logits.unwrap();
        assert_eq!(all.dim(), (3, 50257));
        for (a, b) in all.row(2).iter().zip(out.logits.iter()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn input_errors() {
        let model = tiny_model();
        assert!(matches!(
            model.logits(&TokenSequence::new(vec![]), &PatchSet::new()),
            Err(Error::EmptySequence)
        ));
        assert!(matches!(
            model.logits(&TokenSequence::new(vec![1; 33]), &PatchSet::new()),
            Err(Error::SequenceTooLong { len: 33, max: 32 })
        ));
        assert!(matches!(
            model.logits(&TokenSequence::new(vec![60000]), &PatchSet::new()),
            Err(Error::TokenOutOfRange { .. })
        ));
        let mut bad = PatchSet::new();
        bad.insert(HeadId::new(0, 0), HeadActivation::zeros(2, 4));
        assert!(matches!(
            model.logits(&TokenSequence::new(vec![1, 2, 3]), &bad),
            Err(Error::PatchShape { .. })
        ));
    }
}
