use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::search::SearchSummary;
use crate::error::{Error, Result};
use crate::model::HeadId;
use crate::reference;

/// One accepted head and the knockout metrics after adding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub head: HeadId,
    pub accuracy: f64,
    pub mean_logit_diff: f64,
}

/// A set of heads in discovery order. `heads` is always `base` followed by
/// the provenance heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub setting: String,
    pub heads: Vec<HeadId>,
    #[serde(default)]
    pub base: Vec<HeadId>,
    #[serde(default)]
    pub provenance: Vec<ProvenanceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSummary>,
}

impl Circuit {
    /// A circuit with no search history.
    pub fn new(setting: impl Into<String>, heads: Vec<HeadId>) -> Result<Self> {
        let c = Self {
            setting: setting.into(),
            base: heads.clone(),
            heads,
            provenance: Vec::new(),
            search: None,
        };
        c.validate()?;
        Ok(c)
    }

    /// Parse a head list such as `(11, 6), (0, 4), (11,4)`.
    pub fn parse_heads(text: &str) -> Result<Vec<HeadId>> {
        let mut heads = Vec::new();
        let mut rest = text.trim();
        while !rest.is_empty() {
            let open = rest
                .strip_prefix('(')
                .ok_or_else(|| Error::Parse(format!("expected `(` at `{}`", preview(rest))))?;
            let close = open
                .find(')')
                .ok_or_else(|| Error::Parse(format!("unclosed `(` at `{}`", preview(rest))))?;
            let (inner, after) = (&open[..close], &open[close + 1..]);
            let mut nums = inner.split(',').map(|s| s.trim().parse::<usize>());
            match (nums.next(), nums.next(), nums.next()) {
                (Some(Ok(layer)), Some(Ok(head)), None) => heads.push(HeadId::new(layer, head)),
                _ => return Err(Error::Parse(format!("bad head `({inner})`"))),
            }
            rest = after.trim_start();
            rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
        }
        Ok(heads)
    }

    pub fn from_head_list(setting: impl Into<String>, text: &str) -> Result<Self> {
        Self::new(setting, Self::parse_heads(text)?)
    }

    /// A published circuit by name (`Base`, `Plural`, ..., `Complex`).
    pub fn reference(name: &str) -> Result<Self> {
        let heads = reference::circuit_heads(name)
            .ok_or_else(|| Error::Parse(format!("no reference circuit named `{name}`")))?;
        Self::from_head_list(name, heads)
    }

    /// Check uniqueness and that `base` plus provenance replays to `heads`.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        if let Some(dup) = self.heads.iter().find(|h| !seen.insert(**h)) {
            return Err(Error::Parse(format!("duplicate head {dup}")));
        }
        let replay: Vec<HeadId> = self
            .base
            .iter()
            .copied()
            .chain(self.provenance.iter().map(|p| p.head))
            .collect();
        if replay != self.heads {
            return Err(Error::Parse("provenance does not replay to the head list".into()));
        }
        Ok(())
    }

    pub fn head_set(&self) -> BTreeSet<HeadId> {
        self.heads.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn contains(&self, head: HeadId) -> bool {
        self.heads.contains(&head)
    }

    /// `(l, h), (l, h), ...`
    pub fn head_list(&self) -> String {
        self.heads.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(", ")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a circuit JSON file, or a bare head list.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if text.trim_start().starts_with('{') {
            Self::from_json(&text)
        } else {
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("imported");
            Self::from_head_list(name, &text)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

fn preview(s: &str) -> String {
    s.chars().take(12).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitComparison {
    pub shared: BTreeSet<HeadId>,
    pub only_a: BTreeSet<HeadId>,
    pub only_b: BTreeSet<HeadId>,
    /// `|a ∩ b| / |a ∪ b|`; two empty circuits score 1.
    pub jaccard: f64,
}

pub fn compare_circuits(a: &Circuit, b: &Circuit) -> CircuitComparison {
    compare_sets(&a.head_set(), &b.head_set())
}

pub fn compare_sets(a: &BTreeSet<HeadId>, b: &BTreeSet<HeadId>) -> CircuitComparison {
    let shared: BTreeSet<_> = a.intersection(b).copied().collect();
    let union = a.union(b).count();
    CircuitComparison {
        jaccard: if union == 0 {
            1.0
        } else {
            shared.len() as f64 / union as f64
        },
        shared,
        only_a: a.difference(b).copied().collect(),
        only_b: b.difference(a).copied().collect(),
    }
}
