use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{HeadActivation, HeadId, Model};
use crate::prompts::{setting_instance, ContrastRule, Dataset, Lexicon, PromptInstance, Setting};
use crate::seed;

/// Stream id separating pool prompts from evaluation prompts.
const POOL_PROMPT_STREAM: u64 = 0x9001;
const POOL_ORDER_STREAM: u64 = 0x9002;

/// Head activations of one pool prompt, indexed by `HeadId::flat_index`.
#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub source: PromptInstance,
    pub heads: Vec<HeadActivation>,
}

/// Captured head activations from prompts of one shared token length.
#[derive(Debug)]
pub struct ActivationPool {
    seq_len: usize,
    n_heads: usize,
    pool_seed: u64,
    entries: Vec<PoolEntry>,
    means: OnceLock<Vec<HeadActivation>>,
}

impl Clone for ActivationPool {
    fn clone(&self) -> Self {
        Self {
            seq_len: self.seq_len,
            n_heads: self.n_heads,
            pool_seed: self.pool_seed,
            entries: self.entries.clone(),
            means: OnceLock::new(),
        }
    }
}

impl ActivationPool {
    /// One capture pass per prompt. Entry order is a seeded shuffle of
    /// `prompts`; every prompt must encode to the same number of tokens.
    pub fn collect(model: &Model, prompts: &[PromptInstance], pool_seed: u64) -> Result<Self> {
        let first = prompts.first().ok_or(Error::EmptyPool("collect_pool"))?;
        let seq_len = model.encode(&first.text).len();
        for p in prompts {
            let len = model.encode(&p.text).len();
            if len != seq_len {
                return Err(Error::LengthMismatch {
                    expected: seq_len,
                    found: len,
                });
            }
        }
        let mut order: Vec<usize> = (0..prompts.len()).collect();
        order.shuffle(&mut seed::rng(pool_seed, &[POOL_ORDER_STREAM]));
        let entries = order
            .par_iter()
            .map(|&i| {
                let p = &prompts[i];
                let (_, cache) = model.run_with_cache(&model.encode(&p.text))?;
                Ok(PoolEntry {
                    source: p.clone(),
                    heads: cache.into_head_outputs(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            seq_len,
            n_heads: model.config().n_heads,
            pool_seed,
            entries,
            means: OnceLock::new(),
        })
    }

    /// Build from already captured entries.
    pub fn from_entries(entries: Vec<PoolEntry>, n_heads: usize, pool_seed: u64) -> Result<Self> {
        let first = entries.first().ok_or(Error::EmptyPool("activation pool"))?;
        let seq_len = first.heads.first().map_or(0, |h| h.seq_len());
        for e in &entries {
            if let Some(h) = e.heads.iter().find(|h| h.seq_len() != seq_len) {
                return Err(Error::LengthMismatch {
                    expected: seq_len,
                    found: h.seq_len(),
                });
            }
        }
        Ok(Self {
            seq_len,
            n_heads,
            pool_seed,
            entries,
            means: OnceLock::new(),
        })
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pool_seed(&self) -> u64 {
        self.pool_seed
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    /// Append an entry; cached means are dropped.
    pub fn push(&mut self, entry: PoolEntry) -> Result<()> {
        if let Some(h) = entry.heads.iter().find(|h| h.seq_len() != self.seq_len) {
            return Err(Error::LengthMismatch {
                expected: self.seq_len,
                found: h.seq_len(),
            });
        }
        self.entries.push(entry);
        self.means = OnceLock::new();
        Ok(())
    }

    pub fn activation(&self, entry: usize, head: HeadId) -> &HeadActivation {
        &self.entries[entry].heads[head.flat_index(self.n_heads)]
    }

    /// Positionwise mean of `head` over all entries. Accumulated in f64 in
    /// entry order, then rounded once to f32.
    pub fn mean(&self, head: HeadId) -> &HeadActivation {
        let means = self.means.get_or_init(|| {
            let n_total = self.entries[0].heads.len();
            (0..n_total)
                .map(|flat| {
                    let shape = self.entries[0].heads[flat].shape();
                    let mut acc = Array2::<f64>::zeros(shape);
                    for e in &self.entries {
                        acc.zip_mut_with(&e.heads[flat].values(), |a, &v| *a += v as f64);
                    }
                    let n = self.entries.len() as f64;
                    HeadActivation::new(acc.mapv(|a| (a / n) as f32))
                })
                .collect()
        });
        &means[head.flat_index(self.n_heads)]
    }
}

/// Pools keyed by token length, so every prompt can be ablated with
/// positionwise-aligned activations.
#[derive(Debug, Clone, Default)]
pub struct PoolBank {
    pools: BTreeMap<usize, ActivationPool>,
}

/// How to source pool prompts for a dataset.
#[derive(Debug, Clone, Copy)]
pub struct PoolSpec {
    /// Entries per token length.
    pub size: usize,
    pub seed: u64,
    /// Candidate prompts tried per needed entry before giving up on a length.
    pub max_tries_per_entry: usize,
}

impl PoolSpec {
    pub fn new(size: usize, seed: u64) -> Self {
        Self {
            size,
            seed,
            max_tries_per_entry: 200,
        }
    }
}

impl PoolBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, pool: ActivationPool) -> Option<ActivationPool> {
        self.pools.insert(pool.seq_len(), pool)
    }

    pub fn get(&self, seq_len: usize) -> Result<&ActivationPool> {
        self.pools.get(&seq_len).ok_or(Error::NoPoolForLength(seq_len))
    }

    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.pools.keys().copied()
    }

    pub fn pools(&self) -> impl Iterator<Item = &ActivationPool> {
        self.pools.values()
    }

    /// A pool for every token length occurring in `dataset`, filled with fresh
    /// prompts from `setting` drawn under a seed stream disjoint from any
    /// dataset seed. Candidates are visited in generation order and kept while
    /// their length bucket still has room.
    pub fn for_dataset(
        model: &Model,
        dataset: &Dataset,
        setting: Setting,
        lexicon: &Lexicon,
        spec: PoolSpec,
    ) -> Result<Self> {
        if spec.size == 0 {
            return Err(Error::EmptyPool("pool size 0"));
        }
        let needed: BTreeSet<usize> = dataset
            .instances
            .iter()
            .map(|p| model.encode(&p.text).len())
            .collect();
        let prompt_seed = seed::derive(spec.seed, &[POOL_PROMPT_STREAM]);
        let mut buckets: BTreeMap<usize, Vec<PromptInstance>> =
            needed.iter().map(|&l| (l, Vec::new())).collect();
        let budget = spec.max_tries_per_entry * spec.size * needed.len();
        let mut i = 0;
        while buckets.values().any(|b| b.len() < spec.size) && i < budget {
            let p = setting_instance(setting, i, lexicon, prompt_seed, ContrastRule::default())?;
            i += 1;
            let len = model.encode(&p.text).len();
            if let Some(b) = buckets.get_mut(&len) {
                if b.len() < spec.size {
                    b.push(p);
                }
            }
        }
        if let Some((&len, _)) = buckets.iter().find(|(_, b)| b.len() < spec.size) {
            return Err(Error::NoPoolForLength(len));
        }
        let mut bank = Self::new();
        for (len, prompts) in buckets {
            let pool = ActivationPool::collect(model, &prompts, seed::derive(spec.seed, &[len as u64]))?;
            bank.insert(pool);
        }
        Ok(bank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::prompts::{build_prompt, setting_dataset, PromptFactors};

    pub(crate) fn tiny() -> Model {
        let cfg = ModelConfig {
            n_layers: 2,
            n_heads: 3,
            d_model: 12,
            d_head: 4,
            d_mlp: 16,
            vocab_size: 50257,
            context_len: 32,
            ln_epsilon: 1e-5,
        };
        Model::synthetic(cfg, 3)
    }

    fn base_prompts(n: usize) -> Vec<PromptInstance> {
        let lex = Lexicon::default();
        (0..n as u64)
            .map(|s| build_prompt(PromptFactors::BASE, &lex, s).unwrap())
            .collect()
    }

    #[test]
    fn collect_counts_and_determinism() {
        let m = tiny();
        let prompts = base_prompts(8);
        let a = ActivationPool::collect(&m, &prompts, 4).unwrap();
        let b = ActivationPool::collect(&m, &prompts, 4).unwrap();
        assert_eq!(a.len(), 8);
        assert_eq!(a.seq_len(), 1);
        let texts = |p: &ActivationPool| p.entries().iter().map(|e| e.source.text.clone()).collect::<Vec<_>>();
        assert_eq!(texts(&a), texts(&b));
        assert!(matches!(ActivationPool::collect(&m, &[], 0), Err(Error::EmptyPool(_))));
    }

    #[test]
    fn mixed_lengths_rejected() {
        let m = tiny();
        let lex = Lexicon::default();
        let mut prompts = base_prompts(2);
        prompts.push(build_prompt(PromptFactors::BASE.flip(crate::prompts::Factor::Plural), &lex, 0).unwrap());
        assert!(matches!(
            ActivationPool::collect(&m, &prompts, 0),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn mean_matches_entry_average() {
        let m = tiny();
        let pool = ActivationPool::collect(&m, &base_prompts(5), 1).unwrap();
        for head in HeadId::all(m.config()) {
            let mean = pool.mean(head).values().to_owned();
            let mut manual = Array2::<f32>::zeros(mean.dim());
            for e in 0..pool.len() {
                manual += &pool.activation(e, head).values();
            }
            manual /= pool.len() as f32;
            for (a, b) in mean.iter().zip(manual.iter()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mean_of_identical_entries_is_that_entry() {
        let m = tiny();
        let p = base_prompts(1).remove(0);
        let pool = ActivationPool::collect(&m, &[p.clone(), p.clone(), p], 0).unwrap();
        let h = HeadId::new(1, 2);
        assert_eq!(pool.mean(h), pool.activation(0, h));
    }

    #[test]
    fn push_invalidates_means() {
        let m = tiny();
        let prompts = base_prompts(2);
        let mut pool = ActivationPool::collect(&m, &prompts[..1], 0).unwrap();
        let h = HeadId::new(0, 0);
        let before = pool.mean(h).clone();
        let other = ActivationPool::collect(&m, &prompts[1..], 0).unwrap();
        pool.push(other.entries()[0].clone()).unwrap();
        assert_ne!(*pool.mean(h), before);
    }

    #[test]
    fn bank_covers_dataset_lengths() {
        let m = tiny();
        let lex = Lexicon::default();
        let d = setting_dataset(Setting::All, 64, &lex, 0).unwrap();
        let bank = PoolBank::for_dataset(&m, &d, Setting::All, &lex, PoolSpec::new(2, 9)).unwrap();
        for p in &d.instances {
            let pool = bank.get(m.encode(&p.text).len()).unwrap();
            assert_eq!(pool.len(), 2);
        }
        assert!(matches!(bank.get(99), Err(Error::NoPoolForLength(99))));
    }
}
