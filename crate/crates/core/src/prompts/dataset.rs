use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::build::{build_prompt_with, ContrastRule, PromptInstance};
use super::factors::{PromptFactors, Setting};
use super::lexicon::Lexicon;
use crate::error::{Error, Result};
use crate::seed;

/// Stream id for the per-block cell shuffle of the `ALL` setting.
const ALL_SHUFFLE_STREAM: u64 = 0xA11;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub setting: Setting,
    pub seed: u64,
    pub instances: Vec<PromptInstance>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// The first `n` instances (all of them if `n` exceeds the length).
    pub fn truncated(&self, n: usize) -> Dataset {
        Dataset {
            setting: self.setting,
            seed: self.seed,
            instances: self.instances.iter().take(n).cloned().collect(),
        }
    }

    /// One JSON record per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for inst in &self.instances {
            serde_json::to_writer(&mut out, inst)?;
            out.write_all(b"\n").map_err(|e| Error::io("<jsonl output>", e))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R, setting: Setting, seed: u64) -> Result<Dataset> {
        let mut instances = Vec::new();
        for line in input.lines() {
            let line = line.map_err(|e| Error::io("<jsonl input>", e))?;
            if !line.trim().is_empty() {
                instances.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Dataset {
            setting,
            seed,
            instances,
        })
    }
}

/// Seed of the `i`-th instance of cell `cell`. Shared by every generator so
/// that a single-cell setting is a prefix of that cell's grid slice.
pub fn instance_seed(seed: u64, cell: usize, i: usize) -> u64 {
    seed::derive(seed, &[cell as u64, i as u64])
}

/// `n_per_cell` prompts for each of the 64 cells, cell-major.
pub fn generate_grid(n_per_cell: usize, lexicon: &Lexicon, seed: u64) -> Result<Dataset> {
    generate_grid_with(n_per_cell, lexicon, seed, ContrastRule::default())
}

pub fn generate_grid_with(
    n_per_cell: usize,
    lexicon: &Lexicon,
    seed: u64,
    contrast: ContrastRule,
) -> Result<Dataset> {
    if n_per_cell == 0 {
        return Err(Error::EmptyInput("n_per_cell must be at least 1"));
    }
    let instances = PromptFactors::all()
        .flat_map(|factors| (0..n_per_cell).map(move |i| (factors, i)))
        .map(|(factors, i)| {
            build_prompt_with(factors, lexicon, instance_seed(seed, factors.index(), i), contrast)
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        setting: Setting::All,
        seed,
        instances,
    })
}

pub fn setting_dataset(setting: Setting, n: usize, lexicon: &Lexicon, seed: u64) -> Result<Dataset> {
    setting_dataset_with(setting, n, lexicon, seed, ContrastRule::default())
}

/// `n` prompts for `setting`. `ALL` walks the grid in blocks of 64, each block
/// visiting every cell once in a seeded order, so `n = 64 k` yields exactly
/// `k` prompts per cell and the same prompts as `generate_grid(k, ..)`.
pub fn setting_dataset_with(
    setting: Setting,
    n: usize,
    lexicon: &Lexicon,
    seed: u64,
    contrast: ContrastRule,
) -> Result<Dataset> {
    let instances = (0..n)
        .map(|i| setting_instance(setting, i, lexicon, seed, contrast))
        .collect::<Result<_>>()?;
    Ok(Dataset {
        setting,
        seed,
        instances,
    })
}

/// The `i`-th instance of `setting_dataset_with(setting, n, ..)` for any `n > i`.
pub fn setting_instance(
    setting: Setting,
    i: usize,
    lexicon: &Lexicon,
    seed: u64,
    contrast: ContrastRule,
) -> Result<PromptInstance> {
    let (cell, k) = match setting.cell() {
        Some(factors) => (factors.index(), i),
        None => {
            let block = i / PromptFactors::N_CELLS;
            let mut order: Vec<usize> = (0..PromptFactors::N_CELLS).collect();
            order.shuffle(&mut seed::rng(seed, &[ALL_SHUFFLE_STREAM, block as u64]));
            (order[i % PromptFactors::N_CELLS], block)
        }
    };
    build_prompt_with(
        PromptFactors::from_index(cell),
        lexicon,
        instance_seed(seed, cell, k),
        contrast,
    )
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::prompts::Factor;

    #[test]
    fn grid_counts() {
        let lex = Lexicon::default();
        let d = generate_grid(25, &lex, 1).unwrap();
        assert_eq!(d.len(), 1600);
        let mut per_cell: HashMap<_, usize> = HashMap::new();
        for p in &d.instances {
            *per_cell.entry(p.factors).or_default() += 1;
        }
        assert_eq!(per_cell.len(), 64);
        assert!(per_cell.values().all(|&c| c == 25));
        assert!(matches!(generate_grid(0, &lex, 1), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn grid_is_deterministic() {
        let lex = Lexicon::default();
        assert_eq!(generate_grid(1, &lex, 5).unwrap(), generate_grid(1, &lex, 5).unwrap());
        assert_ne!(generate_grid(1, &lex, 5).unwrap(), generate_grid(1, &lex, 6).unwrap());
    }

    #[test]
    fn single_cell_settings() {
        let lex = Lexicon::default();
        let base = setting_dataset(Setting::Base, 100, &lex, 3).unwrap();
        assert_eq!(base.len(), 100);
        assert!(base.instances.iter().all(|p| p.factors == PromptFactors::BASE));
        let neg = setting_dataset(Setting::Flip(Factor::Negated), 100, &lex, 3).unwrap();
        assert!(neg
            .instances
            .iter()
            .all(|p| p.factors == PromptFactors::BASE.flip(Factor::Negated)));
    }

    #[test]
    fn all_setting_reproduces_grid() {
        let lex = Lexicon::default();
        let all = setting_dataset(Setting::All, 64 * 3, &lex, 11).unwrap();
        let grid = generate_grid(3, &lex, 11).unwrap();
        let mut a = all.instances.clone();
        let mut g = grid.instances.clone();
        let key = |p: &PromptInstance| (p.factors.index(), p.rng_seed);
        a.sort_by_key(key);
        g.sort_by_key(key);
        assert_eq!(a, g);
    }

    #[test]
    fn base_setting_is_prefix_of_grid_cell() {
        let lex = Lexicon::default();
        let base = setting_dataset(Setting::Base, 4, &lex, 8).unwrap();
        let grid = generate_grid(4, &lex, 8).unwrap();
        assert_eq!(base.instances[..], grid.instances[..4]);
    }

    #[test]
    fn jsonl_round_trip() {
        let lex = Lexicon::default();
        let d = setting_dataset(Setting::All, 70, &lex, 2).unwrap();
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 70);
        assert!(text.lines().next().unwrap().contains("\"seed\":"));
        let back = Dataset::read_jsonl(&buf[..], Setting::All, 2).unwrap();
        assert_eq!(back, d);
    }
}
