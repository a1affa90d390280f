//! GPT-2 parameter storage and safetensors I/O.
//!
//! Tensor names follow the published GPT-2 checkpoint (`wte.weight`,
//! `h.{i}.attn.c_attn.weight`, ...). Projection matrices keep the published
//! `(in, out)` layout, so a layer computes `x @ W + b`. The unembedding is tied
//! to `wte`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safetensors::tensor::{Dtype, TensorView};
use safetensors::SafeTensors;

use super::ModelConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LayerWeights {
    pub ln1_weight: Array1<f32>,
    pub ln1_bias: Array1<f32>,
    /// `(d_model, 3 * d_model)`: query, key and value projections side by side.
    pub attn_weight: Array2<f32>,
    pub attn_bias: Array1<f32>,
    /// `(d_model, d_model)`; rows `h*d_head..(h+1)*d_head` belong to head `h`.
    pub attn_out_weight: Array2<f32>,
    pub attn_out_bias: Array1<f32>,
    pub ln2_weight: Array1<f32>,
    pub ln2_bias: Array1<f32>,
    pub mlp_in_weight: Array2<f32>,
    pub mlp_in_bias: Array1<f32>,
    pub mlp_out_weight: Array2<f32>,
    pub mlp_out_bias: Array1<f32>,
}

#[derive(Debug, Clone)]
pub struct ModelWeights {
    /// `(vocab, d_model)`; also the unembedding.
    pub token_embedding: Array2<f32>,
    /// `(context_len, d_model)`.
    pub position_embedding: Array2<f32>,
    pub layers: Vec<LayerWeights>,
    pub ln_final_weight: Array1<f32>,
    pub ln_final_bias: Array1<f32>,
}

/// Names and shapes of every tensor a checkpoint must contain.
pub fn expected_tensors(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let d = cfg.d_model;
    let mut out = vec![
        ("wte.weight".to_string(), vec![cfg.vocab_size, d]),
        ("wpe.weight".to_string(), vec![cfg.context_len, d]),
    ];
    for i in 0..cfg.n_layers {
        let p = |s: &str| format!("h.{i}.{s}");
        out.extend([
            (p("ln_1.weight"), vec![d]),
            (p("ln_1.bias"), vec![d]),
            (p("attn.c_attn.weight"), vec![d, 3 * d]),
            (p("attn.c_attn.bias"), vec![3 * d]),
            (p("attn.c_proj.weight"), vec![d, d]),
            (p("attn.c_proj.bias"), vec![d]),
            (p("ln_2.weight"), vec![d]),
            (p("ln_2.bias"), vec![d]),
            (p("mlp.c_fc.weight"), vec![d, cfg.d_mlp]),
            (p("mlp.c_fc.bias"), vec![cfg.d_mlp]),
            (p("mlp.c_proj.weight"), vec![cfg.d_mlp, d]),
            (p("mlp.c_proj.bias"), vec![d]),
        ]);
    }
    out.push(("ln_f.weight".to_string(), vec![d]));
    out.push(("ln_f.bias".to_string(), vec![d]));
    out
}

/// Non-parameter buffers some exports carry (causal mask tables, tied head).
fn is_ignorable(name: &str) -> bool {
    name == "lm_head.weight"
        || (name.starts_with("h.")
            && (name.ends_with(".attn.bias") || name.ends_with(".attn.masked_bias")))
}

fn canonical_name(name: &str) -> &str {
    name.strip_prefix("transformer.").unwrap_or(name)
}

fn to_f32(name: &str, view: &TensorView<'_>) -> Result<Vec<f32>> {
    if view.dtype() != Dtype::F32 {
        return Err(Error::TensorDtype {
            name: name.to_string(),
            dtype: format!("{:?}", view.dtype()),
        });
    }
    Ok(view
        .data()
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

impl ModelWeights {
    /// Parse a safetensors buffer, checking names and shapes against `cfg`.
    pub fn from_safetensors(bytes: &[u8], cfg: &ModelConfig, origin: &Path) -> Result<Self> {
        cfg.validate()?;
        let st = SafeTensors::deserialize(bytes).map_err(|e| Error::Checkpoint {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;

        let mut views: BTreeMap<String, TensorView<'_>> = BTreeMap::new();
        let mut unexpected = Vec::new();
        let expected = expected_tensors(cfg);
        let expected_names: BTreeSet<&str> = expected.iter().map(|(n, _)| n.as_str()).collect();
        for (raw, view) in st.tensors() {
            let name = canonical_name(&raw);
            if expected_names.contains(name) {
                views.insert(name.to_string(), view);
            } else if !is_ignorable(name) {
                unexpected.push(raw.clone());
            }
        }
        let missing: Vec<String> = expected
            .iter()
            .filter(|(n, _)| !views.contains_key(n))
            .map(|(n, _)| n.clone())
            .collect();
        if !missing.is_empty() || !unexpected.is_empty() {
            unexpected.sort();
            return Err(Error::TensorNames { missing, unexpected });
        }

        let mut tensors: BTreeMap<String, Vec<f32>> = BTreeMap::new();
        for (name, shape) in &expected {
            let view = &views[name];
            if view.shape() != shape.as_slice() {
                return Err(Error::TensorShape {
                    name: name.clone(),
                    expected: shape.clone(),
                    found: view.shape().to_vec(),
                });
            }
            tensors.insert(name.clone(), to_f32(name, view)?);
        }
        if let Ok(head) = st.tensor("lm_head.weight") {
            let want = [cfg.vocab_size, cfg.d_model];
            if head.shape() != want {
                return Err(Error::TensorShape {
                    name: "lm_head.weight".into(),
                    expected: want.to_vec(),
                    found: head.shape().to_vec(),
                });
            }
        }

        let mut take = |name: &str| tensors.remove(name).expect("validated above");
        let d = cfg.d_model;
        let mat = |v: Vec<f32>, r: usize, c: usize| {
            Array2::from_shape_vec((r, c), v).expect("shape validated above")
        };
        let token_embedding = mat(take("wte.weight"), cfg.vocab_size, d);
        let position_embedding = mat(take("wpe.weight"), cfg.context_len, d);
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for i in 0..cfg.n_layers {
            let mut t = |s: &str| take(&format!("h.{i}.{s}"));
            layers.push(LayerWeights {
                ln1_weight: Array1::from(t("ln_1.weight")),
                ln1_bias: Array1::from(t("ln_1.bias")),
                attn_weight: mat(t("attn.c_attn.weight"), d, 3 * d),
                attn_bias: Array1::from(t("attn.c_attn.bias")),
                attn_out_weight: mat(t("attn.c_proj.weight"), d, d),
                attn_out_bias: Array1::from(t("attn.c_proj.bias")),
                ln2_weight: Array1::from(t("ln_2.weight")),
                ln2_bias: Array1::from(t("ln_2.bias")),
                mlp_in_weight: mat(t("mlp.c_fc.weight"), d, cfg.d_mlp),
                mlp_in_bias: Array1::from(t("mlp.c_fc.bias")),
                mlp_out_weight: mat(t("mlp.c_proj.weight"), cfg.d_mlp, d),
                mlp_out_bias: Array1::from(t("mlp.c_proj.bias")),
            });
        }
        Ok(Self {
            token_embedding,
            position_embedding,
            layers,
            ln_final_weight: Array1::from(take("ln_f.weight")),
            ln_final_bias: Array1::from(take("ln_f.bias")),
        })
    }

    pub fn load(path: impl AsRef<Path>, cfg: &ModelConfig) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_safetensors(&bytes, cfg, path)
    }

    /// Randomly initialised weights with GPT-2-like scales. Deterministic in `seed`.
    pub fn random(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Uniform on [-a, a] has std a / sqrt(3).
        let mut uniform = |n: usize, std: f32, offset: f32| -> Vec<f32> {
            let a = std * 3f32.sqrt();
            (0..n).map(|_| offset + rng.random_range(-a..a)).collect()
        };
        let d = cfg.d_model;
        let mut mat = |r: usize, c: usize, std: f32| {
            Array2::from_shape_vec((r, c), uniform(r * c, std, 0.0)).unwrap()
        };
        let token_embedding = mat(cfg.vocab_size, d, 0.1);
        let position_embedding = mat(cfg.context_len, d, 0.02);
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for _ in 0..cfg.n_layers {
            layers.push(LayerWeights {
                ln1_weight: Array1::from(uniform(d, 0.05, 1.0)),
                ln1_bias: Array1::from(uniform(d, 0.02, 0.0)),
                attn_weight: Array2::from_shape_vec((d, 3 * d), uniform(d * 3 * d, 0.1, 0.0)).unwrap(),
                attn_bias: Array1::from(uniform(3 * d, 0.02, 0.0)),
                attn_out_weight: Array2::from_shape_vec((d, d), uniform(d * d, 0.02, 0.0)).unwrap(),
                attn_out_bias: Array1::from(uniform(d, 0.02, 0.0)),
                ln2_weight: Array1::from(uniform(d, 0.05, 1.0)),
                ln2_bias: Array1::from(uniform(d, 0.02, 0.0)),
                mlp_in_weight: Array2::from_shape_vec((d, cfg.d_mlp), uniform(d * cfg.d_mlp, 0.02, 0.0))
                    .unwrap(),
                mlp_in_bias: Array1::from(uniform(cfg.d_mlp, 0.02, 0.0)),
                mlp_out_weight: Array2::from_shape_vec((cfg.d_mlp, d), uniform(cfg.d_mlp * d, 0.02, 0.0))
                    .unwrap(),
                mlp_out_bias: Array1::from(uniform(d, 0.02, 0.0)),
            });
        }
        Self {
            token_embedding,
            position_embedding,
            layers,
            ln_final_weight: Array1::from(uniform(d, 0.05, 1.0)),
            ln_final_bias: Array1::from(uniform(d, 0.02, 0.0)),
        }
    }

    /// Named `(shape, data)` pairs in published checkpoint order.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, Vec<f32>)> {
        let m = |a: &Array2<f32>| (a.shape().to_vec(), a.iter().copied().collect::<Vec<_>>());
        let v = |a: &Array1<f32>| (vec![a.len()], a.to_vec());
        let mut out = Vec::new();
        let mut push = |name: String, (shape, data): (Vec<usize>, Vec<f32>)| out.push((name, shape, data));
        push("wte.weight".into(), m(&self.token_embedding));
        push("wpe.weight".into(), m(&self.position_embedding));
        for (i, l) in self.layers.iter().enumerate() {
            push(format!("h.{i}.ln_1.weight"), v(&l.ln1_weight));
            push(format!("h.{i}.ln_1.bias"), v(&l.ln1_bias));
            push(format!("h.{i}.attn.c_attn.weight"), m(&l.attn_weight));
            push(format!("h.{i}.attn.c_attn.bias"), v(&l.attn_bias));
            push(format!("h.{i}.attn.c_proj.weight"), m(&l.attn_out_weight));
            push(format!("h.{i}.attn.c_proj.bias"), v(&l.attn_out_bias));
            push(format!("h.{i}.ln_2.weight"), v(&l.ln2_weight));
            push(format!("h.{i}.ln_2.bias"), v(&l.ln2_bias));
            push(format!("h.{i}.mlp.c_fc.weight"), m(&l.mlp_in_weight));
            push(format!("h.{i}.mlp.c_fc.bias"), v(&l.mlp_in_bias));
            push(format!("h.{i}.mlp.c_proj.weight"), m(&l.mlp_out_weight));
            push(format!("h.{i}.mlp.c_proj.bias"), v(&l.mlp_out_bias));
        }
        push("ln_f.weight".into(), v(&self.ln_final_weight));
        push("ln_f.bias".into(), v(&self.ln_final_bias));
        out
    }

    /// Serialize to safetensors bytes; `rename` can rewrite tensor names.
    pub fn to_safetensors_with<F: Fn(&str) -> String>(&self, rename: F) -> Result<Vec<u8>> {
        let tensors = self.named_tensors();
        let bytes: Vec<(String, Vec<usize>, Vec<u8>)> = tensors
            .into_iter()
            .map(|(n, s, d)| (rename(&n), s, d.iter().flat_map(|x| x.to_le_bytes()).collect()))
            .collect();
        let views = bytes
            .iter()
            .map(|(n, s, b)| {
                TensorView::new(Dtype::F32, s.clone(), b)
                    .map(|v| (n.clone(), v))
                    .map_err(|e| Error::Parse(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        safetensors::serialize(views, None).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_safetensors(&self) -> Result<Vec<u8>> {
        self.to_safetensors_with(str::to_string)
    }

    pub fn config_matches(&self, cfg: &ModelConfig) -> bool {
        self.token_embedding.dim() == (cfg.vocab_size, cfg.d_model)
            && self.position_embedding.dim() == (cfg.context_len, cfg.d_model)
            && self.layers.len() == cfg.n_layers
            && self.layers.iter().all(|l| {
                l.attn_weight.dim() == (cfg.d_model, 3 * cfg.d_model)
                    && l.mlp_in_weight.dim() == (cfg.d_model, cfg.d_mlp)
            })
    }
}
