use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pool::{ActivationPool, PoolBank};
use crate::error::{Error, Result};
use crate::model::{HeadActivation, HeadId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationKind {
    Zero,
    Mean,
    #[default]
    Resample,
}

impl AblationKind {
    pub fn name(self) -> &'static str {
        match self {
            AblationKind::Zero => "zero",
            AblationKind::Mean => "mean",
            AblationKind::Resample => "resample",
        }
    }
}

impl fmt::Display for AblationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for AblationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(AblationKind::Zero),
            "mean" => Ok(AblationKind::Mean),
            "resample" => Ok(AblationKind::Resample),
            _ => Err(Error::Parse(format!("unknown ablation `{s}` (zero, mean, resample)"))),
        }
    }
}

/// Donor selection for resample ablation of several heads in one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    /// An independent pool entry for every ablated head.
    #[default]
    PerHead,
    /// One pool entry supplies every ablated head of a run.
    SharedDonor,
}

impl FromStr for ResampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_head" | "per-head" => Ok(ResampleMode::PerHead),
            "shared_donor" | "shared-donor" => Ok(ResampleMode::SharedDonor),
            _ => Err(Error::Parse(format!("unknown resample mode `{s}` (per_head, shared_donor)"))),
        }
    }
}

/// An ablation strategy bound to its data source.
#[derive(Debug, Clone, Copy)]
pub enum AblationStrategy<'a> {
    Zero { d_head: usize },
    Mean(&'a PoolBank),
    Resample(&'a PoolBank),
}

impl<'a> AblationStrategy<'a> {
    pub fn new(kind: AblationKind, d_head: usize, bank: &'a PoolBank) -> Self {
        match kind {
            AblationKind::Zero => AblationStrategy::Zero { d_head },
            AblationKind::Mean => AblationStrategy::Mean(bank),
            AblationKind::Resample => AblationStrategy::Resample(bank),
        }
    }

    pub fn kind(&self) -> AblationKind {
        match self {
            AblationStrategy::Zero { .. } => AblationKind::Zero,
            AblationStrategy::Mean(_) => AblationKind::Mean,
            AblationStrategy::Resample(_) => AblationKind::Resample,
        }
    }

    fn pool(bank: &PoolBank, seq_len: usize) -> Result<&ActivationPool> {
        let pool = bank.get(seq_len)?;
        if pool.is_empty() {
            return Err(Error::EmptyPool("mean and resample ablation"));
        }
        Ok(pool)
    }

    /// Replacement activation for `head` in a run of `seq_len` tokens.
    /// Only resample ablation consumes randomness.
    pub fn value<R: Rng + ?Sized>(&self, head: HeadId, seq_len: usize, rng: &mut R) -> Result<HeadActivation> {
        match *self {
            AblationStrategy::Zero { d_head } => Ok(HeadActivation::zeros(seq_len, d_head)),
            AblationStrategy::Mean(bank) => Ok(Self::pool(bank, seq_len)?.mean(head).clone()),
            AblationStrategy::Resample(bank) => {
                let pool = Self::pool(bank, seq_len)?;
                let entry = rng.random_range(0..pool.len());
                Ok(pool.activation(entry, head).clone())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Model, ModelConfig};
    use crate::prompts::{build_prompt, Lexicon, PromptFactors};

    fn tiny() -> Model {
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

    fn bank(m: &Model, n: u64) -> PoolBank {
        let lex = Lexicon::default();
        let prompts: Vec<_> = (0..n)
            .map(|s| build_prompt(PromptFactors::BASE, &lex, s).unwrap())
            .collect();
        let mut bank = PoolBank::new();
        bank.insert(ActivationPool::collect(m, &prompts, 0).unwrap());
        bank
    }

    #[test]
    fn zero_is_zero() {
        let v = AblationStrategy::Zero { d_head: 4 }
            .value(HeadId::new(1, 1), 3, &mut crate::seed::rng(0, &[]))
            .unwrap();
        assert_eq!(v.shape(), (3, 4));
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn resample_from_single_entry_is_forced() {
        let m = tiny();
        let b = bank(&m, 1);
        let h = HeadId::new(0, 2);
        let expected = b.get(1).unwrap().activation(0, h).clone();
        let mut rng = crate::seed::rng(5, &[]);
        for _ in 0..10 {
            assert_eq!(AblationStrategy::Resample(&b).value(h, 1, &mut rng).unwrap(), expected);
        }
    }

    #[test]
    fn resample_draws_come_from_pool() {
        let m = tiny();
        let b = bank(&m, 6);
        let h = HeadId::new(1, 0);
        let pool = b.get(1).unwrap();
        let mut rng = crate::seed::rng(5, &[]);
        for _ in 0..20 {
            let v = AblationStrategy::Resample(&b).value(h, 1, &mut rng).unwrap();
            assert!((0..pool.len()).any(|e| *pool.activation(e, h) == v));
        }
    }

    #[test]
    fn pool_strategies_need_a_matching_length() {
        let m = tiny();
        let b = bank(&m, 2);
        let mut rng = crate::seed::rng(0, &[]);
        let err = AblationStrategy::Mean(&b).value(HeadId::new(0, 0), 4, &mut rng).unwrap_err();
        assert!(matches!(err, Error::NoPoolForLength(4)));
        let empty = PoolBank::new();
        let err = AblationStrategy::Resample(&empty).value(HeadId::new(0, 0), 1, &mut rng).unwrap_err();
        assert!(matches!(err, Error::NoPoolForLength(1)));
    }

    #[test]
    fn kind_parses() {
        for k in [AblationKind::Zero, AblationKind::Mean, AblationKind::Resample] {
            assert_eq!(k.name().parse::<AblationKind>().unwrap(), k);
        }
        assert!("random".parse::<AblationKind>().is_err());
    }
}
