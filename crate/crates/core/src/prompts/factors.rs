use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tense {
    Present,
    Past,
}

/// One cell of the six-factor prompt grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PromptFactors {
    pub is_plural: bool,
    pub is_negated: bool,
    pub has_prefix: bool,
    pub is_pronoun: bool,
    pub tense: Tense,
    pub use_irregular: bool,
}

/// One of the six controlled factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Factor {
    #[serde(rename = "is_plural")]
    Plural,
    #[serde(rename = "is_negated")]
    Negated,
    #[serde(rename = "has_prefix")]
    Prefix,
    #[serde(rename = "is_pronoun")]
    Pronoun,
    #[serde(rename = "tense")]
    Tense,
    #[serde(rename = "use_irregular")]
    Irregular,
}

impl Factor {
    pub const ALL: [Factor; 6] = [
        Factor::Plural,
        Factor::Negated,
        Factor::Prefix,
        Factor::Pronoun,
        Factor::Tense,
        Factor::Irregular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Factor::Plural => "is_plural",
            Factor::Negated => "is_negated",
            Factor::Prefix => "has_prefix",
            Factor::Pronoun => "is_pronoun",
            Factor::Tense => "tense",
            Factor::Irregular => "use_irregular",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Factor::ALL
            .into_iter()
            .find(|f| f.name() == s || (s == "tense_past" && *f == Factor::Tense))
            .ok_or_else(|| Error::UnknownFactor(s.to_string()))
    }
}

impl PromptFactors {
    pub const N_CELLS: usize = 64;

    /// Singular, affirmative, no prefix, named subject, present, regular verb.
    pub const BASE: PromptFactors = PromptFactors {
        is_plural: false,
        is_negated: false,
        has_prefix: false,
        is_pronoun: false,
        tense: Tense::Present,
        use_irregular: false,
    };

    pub fn get(&self, factor: Factor) -> bool {
        match factor {
            Factor::Plural => self.is_plural,
            Factor::Negated => self.is_negated,
            Factor::Prefix => self.has_prefix,
            Factor::Pronoun => self.is_pronoun,
            Factor::Tense => self.tense == Tense::Past,
            Factor::Irregular => self.use_irregular,
        }
    }

    pub fn flip(self, factor: Factor) -> Self {
        let mut out = self;
        match factor {
            Factor::Plural => out.is_plural = !out.is_plural,
            Factor::Negated => out.is_negated = !out.is_negated,
            Factor::Prefix => out.has_prefix = !out.has_prefix,
            Factor::Pronoun => out.is_pronoun = !out.is_pronoun,
            Factor::Tense => {
                out.tense = match out.tense {
                    Tense::Present => Tense::Past,
                    Tense::Past => Tense::Present,
                }
            }
            Factor::Irregular => out.use_irregular = !out.use_irregular,
        }
        out
    }

    /// Bit `i` of the index holds factor `Factor::ALL[i]`.
    pub fn index(&self) -> usize {
        Factor::ALL
            .iter()
            .enumerate()
            .map(|(i, &f)| (self.get(f) as usize) << i)
            .sum()
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < Self::N_CELLS, "cell index {index} out of range");
        Factor::ALL
            .iter()
            .enumerate()
            .fold(Self::BASE, |acc, (i, &f)| if index >> i & 1 == 1 { acc.flip(f) } else { acc })
    }

    pub fn all() -> impl Iterator<Item = PromptFactors> {
        (0..Self::N_CELLS).map(Self::from_index)
    }

    /// Label in the per-cell report style, e.g.
    /// `Singular Affirmative Without Name Present Regular`.
    pub fn label(&self) -> String {
        format!(
            "{} {} {} {} {} {}",
            if self.is_plural { "Plural" } else { "Singular" },
            if self.is_negated { "Negated" } else { "Affirmative" },
            if self.has_prefix { "With" } else { "Without" },
            if self.is_pronoun { "Pronoun" } else { "Name" },
            match self.tense {
                Tense::Present => "Present",
                Tense::Past => "Past",
            },
            if self.use_irregular { "Irregular" } else { "Regular" },
        )
    }
}

/// Evaluation setting: the base cell, the base cell with one factor flipped,
/// or the whole grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setting {
    Base,
    Flip(Factor),
    All,
}

impl Setting {
    /// The eight settings in summary-table order.
    pub const ALL_SETTINGS: [Setting; 8] = [
        Setting::Base,
        Setting::Flip(Factor::Plural),
        Setting::Flip(Factor::Negated),
        Setting::Flip(Factor::Prefix),
        Setting::Flip(Factor::Pronoun),
        Setting::Flip(Factor::Tense),
        Setting::Flip(Factor::Irregular),
        Setting::All,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Setting::Base => "BASE",
            Setting::All => "ALL",
            Setting::Flip(Factor::Tense) => "tense_past",
            Setting::Flip(f) => f.name(),
        }
    }

    /// The single cell of a non-`All` setting.
    pub fn cell(&self) -> Option<PromptFactors> {
        match self {
            Setting::Base => Some(PromptFactors::BASE),
            Setting::Flip(f) => Some(PromptFactors::BASE.flip(*f)),
            Setting::All => None,
        }
    }

    pub fn admits(&self, factors: &PromptFactors) -> bool {
        self.cell().is_none_or(|c| c == *factors)
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL_SETTINGS
            .into_iter()
            .find(|st| st.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownSetting(s.to_string()))
    }
}

impl Serialize for Setting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Setting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn exactly_64_distinct_cells() {
        let cells: HashSet<_> = PromptFactors::all().collect();
        assert_eq!(cells.len(), 64);
        for (i, c) in PromptFactors::all().enumerate() {
            assert_eq!(c.index(), i);
        }
        assert_eq!(PromptFactors::BASE.index(), 0);
    }

    #[test]
    fn flip_is_an_involution() {
        for cell in PromptFactors::all() {
            for f in Factor::ALL {
                let flipped = cell.flip(f);
                assert_ne!(flipped, cell);
                assert_eq!(flipped.flip(f), cell);
                assert_eq!(flipped.get(f), !cell.get(f));
            }
        }
    }

    #[test]
    fn setting_labels_parse() {
        for s in Setting::ALL_SETTINGS {
            assert_eq!(s.label().parse::<Setting>().unwrap(), s);
        }
        assert!(matches!("plural".parse::<Setting>(), Err(Error::UnknownSetting(_))));
        assert_eq!(Setting::Flip(Factor::Tense).cell().unwrap().tense, Tense::Past);
    }

    #[test]
    fn single_factor_settings_differ_from_base_in_one_factor() {
        for s in &Setting::ALL_SETTINGS[1..7] {
            let cell = s.cell().unwrap();
            let diffs = Factor::ALL
                .iter()
                .filter(|&&f| cell.get(f) != PromptFactors::BASE.get(f))
                .count();
            assert_eq!(diffs, 1, "{s}");
        }
    }

    #[test]
    fn base_label() {
        assert_eq!(
            PromptFactors::BASE.label(),
            "Singular Affirmative Without Name Present Regular"
        );
    }
}
