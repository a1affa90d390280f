use ndarray::{s, Array1, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{AnswerPair, PreparedPrompt};
use crate::model::{ln_moments, ActivationCache, HeadId, Model};
use crate::prompts::PromptInstance;

/// The correct-minus-incorrect unembedding direction pulled back through the
/// final layernorm with its scale frozen at one position of one run.
///
/// For a residual `r` with mean `mu` and scale `sigma`, the logit difference
/// is `sum_i gamma_i du_i (r_i - mu) / sigma + beta . du`. With
/// `g = gamma * du / sigma` the first term equals `r . (g - mean(g))`, which
/// is linear in `r`, so every residual write `w` contributes `w . (g - mean(g))`.
#[derive(Debug, Clone)]
pub struct LogitDirection {
    centered: Array1<f64>,
    bias_term: f64,
    scale: f32,
}

impl LogitDirection {
    pub fn new(model: &Model, answers: AnswerPair, final_residual: ArrayView1<'_, f32>) -> Self {
        let w = model.weights();
        let (_, scale) = ln_moments(final_residual, model.config().ln_epsilon);
        let du: Array1<f64> = w
            .token_embedding
            .row(answers.correct as usize)
            .iter()
            .zip(w.token_embedding.row(answers.incorrect as usize))
            .map(|(&c, &i)| c as f64 - i as f64)
            .collect();
        let g: Array1<f64> = w
            .ln_final_weight
            .iter()
            .zip(&du)
            .map(|(&gamma, &d)| gamma as f64 * d / scale as f64)
            .collect();
        let mean = g.sum() / g.len() as f64;
        let bias_term = w.ln_final_bias.iter().zip(&du).map(|(&b, &d)| b as f64 * d).sum();
        Self {
            centered: g.mapv(|v| v - mean),
            bias_term,
            scale,
        }
    }

    /// Contribution of one residual-stream write.
    pub fn contribution(&self, write: ArrayView1<'_, f32>) -> f64 {
        write.iter().zip(&self.centered).map(|(&x, &g)| x as f64 * g).sum()
    }

    /// `beta . du`, the constant the final layernorm bias adds.
    pub fn bias_term(&self) -> f64 {
        self.bias_term
    }

    pub fn scale(&self) -> f32 {
        self.scale
    }
}

/// Residual write of one head at one position: `z[pos] W_O[head rows]`.
pub fn head_write(model: &Model, cache: &ActivationCache, head: HeadId, pos: usize) -> Array1<f32> {
    let dh = model.config().d_head;
    let z = cache.head_output(head).values();
    let w_o = model.weights().layers[head.layer]
        .attn_out_weight
        .slice(s![head.head * dh..(head.head + 1) * dh, ..]);
    z.row(pos).dot(&w_o)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlaReport {
    pub text: String,
    pub correct: String,
    pub incorrect: String,
    /// `[layer][head]`
    pub heads: Vec<Vec<f64>>,
    pub embedding: f64,
    /// MLP outputs, attention output biases and the final layernorm bias.
    pub residual: f64,
    /// Logit difference from the model's own logits.
    pub total: f64,
    /// Final-layernorm `sqrt(var + eps)` at every position of the run.
    pub frozen_ln_scale: Vec<f32>,
}

impl DlaReport {
    pub fn head(&self, head: HeadId) -> f64 {
        self.heads[head.layer][head.head]
    }

    pub fn head_sum(&self) -> f64 {
        let mut all: Vec<f64> = self.heads.iter().flatten().copied().collect();
        all.sort_by(f64::total_cmp);
        all.iter().sum()
    }

    /// `|embedding + sum(heads) + residual - total|`.
    pub fn completeness_error(&self) -> f64 {
        (self.embedding + self.head_sum() + self.residual - self.total).abs()
    }
}

/// Decompose the final-position logit difference of `p` into component
/// writes, with the final layernorm frozen.
pub fn direct_logit_attribution(model: &Model, p: &PromptInstance) -> Result<DlaReport> {
    let prepared = PreparedPrompt::new(model, p)?;
    let (logits, cache) = model.run_with_cache(&prepared.tokens)?;
    let cfg = model.config();
    let pos = prepared
        .tokens
        .final_index()
        .ok_or(Error::EmptySequence)?;
    let resid = cache.final_residual();
    let dir = LogitDirection::new(model, prepared.answers, resid.row(pos));

    let mut heads = vec![vec![0.0; cfg.n_heads]; cfg.n_layers];
    for h in HeadId::all(cfg) {
        heads[h.layer][h.head] = dir.contribution(head_write(model, &cache, h, pos).view());
    }
    let embedding = dir.contribution(cache.embedding().row(pos));
    let mut residual = dir.bias_term();
    for (layer, lw) in model.weights().layers.iter().enumerate() {
        residual += dir.contribution(cache.mlp_output(layer).row(pos));
        residual += dir.contribution(lw.attn_out_bias.view());
    }
    let frozen_ln_scale = resid
        .outer_iter()
        .map(|row| ln_moments(row, cfg.ln_epsilon).1)
        .collect();
    Ok(DlaReport {
        text: p.text.clone(),
        correct: p.correct.clone(),
        incorrect: p.incorrect.clone(),
        heads,
        embedding,
        residual,
        total: prepared.answers.diff(logits.view()) as f64,
        frozen_ln_scale,
    })
}

pub fn dla_sweep(model: &Model, prompts: &[PromptInstance]) -> Result<Vec<DlaReport>> {
    prompts
        .par_iter()
        .map(|p| direct_logit_attribution(model, p))
        .collect()
}

/// Mean |contribution| per head, `[layer][head]`.
pub fn mean_abs_head_dla(reports: &[DlaReport]) -> Result<Vec<Vec<f64>>> {
    let first = reports.first().ok_or(Error::EmptyInput("no DLA reports"))?;
    let (nl, nh) = (first.heads.len(), first.heads[0].len());
    let n = reports.len() as f64;
    let mut out = vec![vec![0.0; nh]; nl];
    for (l, row) in out.iter_mut().enumerate() {
        for (h, cell) in row.iter_mut().enumerate() {
            let mut vals: Vec<f64> = reports.iter().map(|r| r.heads[l][h].abs()).collect();
            vals.sort_by(f64::total_cmp);
            *cell = vals.iter().sum::<f64>() / n;
        }
    }
    Ok(out)
}
