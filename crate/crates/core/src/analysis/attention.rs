use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HeadId, Model};

/// The sentences compared side by side for each inspected head.
pub const PROBES: [&str; 4] = ["Alice walks", "Alice walk", "Alice and Bob walk", "Alice and Bob walks"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionPattern {
    pub head: HeadId,
    pub text: String,
    pub tokens: Vec<String>,
    /// `[query][key]`
    pub matrix: Array2<f32>,
}

impl AttentionPattern {
    /// Largest `|row sum - 1|`.
    pub fn row_sum_error(&self) -> f32 {
        self.matrix
            .outer_iter()
            .map(|r| (r.iter().sum::<f32>() - 1.0).abs())
            .fold(0.0, f32::max)
    }

    /// True iff every weight above the diagonal is exactly zero.
    pub fn is_causal(&self) -> bool {
        self.matrix
            .indexed_iter()
            .all(|((q, k), &w)| k <= q || w == 0.0)
    }

    /// Largest weight in the final query row.
    pub fn final_query_max(&self) -> f32 {
        let n = self.matrix.nrows();
        self.matrix.row(n - 1).iter().copied().fold(0.0, f32::max)
    }

    /// Mean diagonal weight and mean weight on earlier keys, over query rows
    /// that have at least one earlier key.
    pub fn diagonal_vs_off(&self) -> (f32, f32) {
        let n = self.matrix.nrows();
        if n < 2 {
            return (self.matrix[[0, 0]], 0.0);
        }
        let (mut diag, mut off, mut n_off) = (0.0, 0.0, 0usize);
        for q in 1..n {
            diag += self.matrix[[q, q]];
            for k in 0..q {
                off += self.matrix[[q, k]];
                n_off += 1;
            }
        }
        (diag / (n - 1) as f32, off / n_off as f32)
    }

    /// Delimited grid, first row and column holding token labels.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::Parse(format!("csv export: {e}"));
        let mut header = vec![format!("query\\key {}", self.head)];
        header.extend(self.tokens.iter().cloned());
        w.write_record(&header).map_err(to_err)?;
        for (tok, row) in self.tokens.iter().zip(self.matrix.outer_iter()) {
            let mut rec = vec![tok.clone()];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    /// Binary PGM, `cell` pixels per matrix entry, white = weight 1.
    pub fn to_pgm(&self, cell: usize) -> Vec<u8> {
        let n = self.matrix.nrows();
        let side = n * cell.max(1);
        let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
        for y in 0..side {
            for x in 0..side {
                let v = self.matrix[[y / cell.max(1), x / cell.max(1)]].clamp(0.0, 1.0);
                out.push((v * 255.0).round() as u8);
            }
        }
        out
    }
}

/// Patterns of several heads on one text from a single forward pass.
pub fn attention_patterns(model: &Model, text: &str, heads: &[HeadId]) -> Result<Vec<AttentionPattern>> {
    for h in heads {
        h.check(model.config())?;
    }
    let tokens = model.encode(text);
    let (_, cache) = model.run_with_cache(&tokens)?;
    let labels: Vec<String> = tokens
        .ids()
        .iter()
        .map(|&id| model.tokenizer().token_label(id))
        .collect();
    Ok(heads
        .iter()
        .map(|&head| AttentionPattern {
            head,
            text: text.to_string(),
            tokens: labels.clone(),
            matrix: cache.attention_pattern(head).to_owned(),
        })
        .collect())
}

pub fn attention_pattern(model: &Model, text: &str, head: HeadId) -> Result<AttentionPattern> {
    Ok(attention_patterns(model, text, &[head])?.remove(0))
}

/// For each probe sentence, the patterns of every head in `heads`.
/// Result is probe-major: `PROBES.len()` groups of `heads.len()`.
pub fn probe_suite(model: &Model, heads: &[HeadId]) -> Result<Vec<AttentionPattern>> {
    let mut out = Vec::with_capacity(PROBES.len() * heads.len());
    for text in PROBES {
        out.extend(attention_patterns(model, text, heads)?);
    }
    Ok(out)
}
