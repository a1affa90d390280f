use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Tokenizer;

const DEFAULT_LEXICON: &str = include_str!("../../assets/default_lexicon.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbForms {
    pub base: String,
    pub third: String,
    pub past: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pronouns {
    pub singular: String,
    pub plural: String,
}

/// Word lists the prompt templates draw from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub version: u32,
    pub names: Vec<String>,
    pub neutral_prefixes: Vec<String>,
    pub past_prefixes: Vec<String>,
    pub pronouns: Pronouns,
    pub regular_verbs: Vec<VerbForms>,
    pub irregular_verbs: Vec<VerbForms>,
}

impl Default for Lexicon {
    fn default() -> Self {
        toml::from_str(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }
}

impl Lexicon {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Structural checks plus the single-token constraints every template
    /// relies on.
    pub fn validate(&self, tokenizer: &Tokenizer) -> Result<()> {
        let nonempty = [
            ("names", self.names.len()),
            ("neutral_prefixes", self.neutral_prefixes.len()),
            ("past_prefixes", self.past_prefixes.len()),
            ("regular_verbs", self.regular_verbs.len()),
            ("irregular_verbs", self.irregular_verbs.len()),
        ];
        if let Some((list, _)) = nonempty.iter().find(|(_, n)| *n == 0) {
            return Err(Error::Lexicon(format!("`{list}` is empty")));
        }
        if self.names.len() < 2 {
            return Err(Error::Lexicon("plural subjects need at least two names".into()));
        }
        let single = |text: String, what: &str| -> Result<()> {
            tokenizer
                .single_token(&text)
                .map(|_| ())
                .map_err(|_| Error::Lexicon(format!("{what} `{}` is not a single token", text.trim_start())))
        };
        for name in &self.names {
            single(name.clone(), "name")?;
            single(format!(" {name}"), "name")?;
        }
        for p in [&self.pronouns.singular, &self.pronouns.plural] {
            single(p.clone(), "pronoun")?;
            single(format!(" {}", lowercase_first(p)), "pronoun")?;
        }
        for v in self.regular_verbs.iter().chain(&self.irregular_verbs) {
            for form in [&v.base, &v.third, &v.past] {
                single(format!(" {form}"), "verb form")?;
            }
            if v.base == v.third || v.base == v.past || v.third == v.past {
                return Err(Error::Lexicon(format!("verb `{}` has coinciding forms", v.base)));
            }
        }
        for p in self.neutral_prefixes.iter().chain(&self.past_prefixes) {
            if p.trim().is_empty() || p.ends_with(' ') {
                return Err(Error::Lexicon(format!("bad prefix `{p}`")));
            }
        }
        Ok(())
    }
}

pub(crate) fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lexicon_shape() {
        let lex = Lexicon::default();
        assert_eq!(lex.names.len(), 20);
        assert_eq!(lex.regular_verbs.len(), 15);
        assert_eq!(lex.irregular_verbs.len(), 10);
        assert_eq!(lex.neutral_prefixes.len(), 5);
        assert_eq!(lex.past_prefixes.len(), 3);
        assert_eq!(lex.pronouns.singular, "She");
        assert_eq!(lex.pronouns.plural, "They");
    }

    #[test]
    fn default_lexicon_is_valid() {
        Lexicon::default().validate(&Tokenizer::gpt2()).unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let lex = Lexicon::default();
        assert_eq!(Lexicon::from_toml(&lex.to_toml().unwrap()).unwrap(), lex);
    }

    #[test]
    fn multi_token_verb_rejected() {
        let mut lex = Lexicon::default();
        lex.regular_verbs[0].third = "photosynthesizes".into();
        let err = lex.validate(&Tokenizer::gpt2()).unwrap_err();
        assert!(err.to_string().contains("photosynthesizes"), "{err}");
    }

    #[test]
    fn empty_list_rejected() {
        let mut lex = Lexicon::default();
        lex.past_prefixes.clear();
        assert!(matches!(lex.validate(&Tokenizer::gpt2()), Err(Error::Lexicon(_))));
    }

    #[test]
    fn lowercase_first_char() {
        assert_eq!(lowercase_first("She"), "she");
        assert_eq!(lowercase_first(""), "");
    }
}
