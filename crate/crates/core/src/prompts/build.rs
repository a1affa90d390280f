use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::factors::{Factor, PromptFactors, Tense};
use super::lexicon::{lowercase_first, Lexicon, VerbForms};
use crate::error::{Error, Result};

/// How the correct/incorrect verb pair is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastRule {
    /// Negated: base vs third person. Past: past vs base. Otherwise the
    /// number-agreeing present form vs the other present form.
    #[default]
    Agreement,
    /// As `Agreement`, except affirmative present prompts with a prefix
    /// contrast the agreeing present form against the past form
    /// ("Surprisingly, Alice" walks / walked).
    PrefixTense,
}

impl std::str::FromStr for ContrastRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "agreement" => Ok(ContrastRule::Agreement),
            "prefix_tense" | "prefix-tense" => Ok(ContrastRule::PrefixTense),
            _ => Err(Error::Parse(format!("unknown contrast rule `{s}` (agreement, prefix_tense)"))),
        }
    }
}

/// Indices into the lexicon lists. Every slot is sampled for every prompt,
/// so flipping a factor re-renders with the same words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LexiconChoices {
    pub name_a: usize,
    pub name_b: usize,
    pub regular_verb: usize,
    pub irregular_verb: usize,
    pub neutral_prefix: usize,
    pub past_prefix: usize,
}

impl LexiconChoices {
    pub fn sample<R: Rng + ?Sized>(lexicon: &Lexicon, rng: &mut R) -> Result<Self> {
        if lexicon.names.len() < 2 {
            return Err(Error::Lexicon("plural subjects need at least two names".into()));
        }
        let pick = |rng: &mut R, n: usize, what: &str| -> Result<usize> {
            if n == 0 {
                return Err(Error::Lexicon(format!("`{what}` is empty")));
            }
            Ok(rng.random_range(0..n))
        };
        let names = sample(rng, lexicon.names.len(), 2);
        Ok(Self {
            name_a: names.index(0),
            name_b: names.index(1),
            regular_verb: pick(rng, lexicon.regular_verbs.len(), "regular_verbs")?,
            irregular_verb: pick(rng, lexicon.irregular_verbs.len(), "irregular_verbs")?,
            neutral_prefix: pick(rng, lexicon.neutral_prefixes.len(), "neutral_prefixes")?,
            past_prefix: pick(rng, lexicon.past_prefixes.len(), "past_prefixes")?,
        })
    }

    fn check(&self, lexicon: &Lexicon) -> Result<()> {
        let slots = [
            ("names", self.name_a, lexicon.names.len()),
            ("names", self.name_b, lexicon.names.len()),
            ("regular_verbs", self.regular_verb, lexicon.regular_verbs.len()),
            ("irregular_verbs", self.irregular_verb, lexicon.irregular_verbs.len()),
            ("neutral_prefixes", self.neutral_prefix, lexicon.neutral_prefixes.len()),
            ("past_prefixes", self.past_prefix, lexicon.past_prefixes.len()),
        ];
        for (list, i, n) in slots {
            if i >= n {
                return Err(Error::Lexicon(format!("choice {i} out of range for `{list}` ({n} entries)")));
            }
        }
        if self.name_a == self.name_b {
            return Err(Error::Lexicon("plural subject needs two distinct names".into()));
        }
        Ok(())
    }
}

/// A rendered prompt with its answer pair. Answers carry their leading space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub factors: PromptFactors,
    pub text: String,
    pub correct: String,
    pub incorrect: String,
    #[serde(rename = "seed")]
    pub rng_seed: u64,
    pub lexicon_choices: LexiconChoices,
    #[serde(default)]
    pub contrast: ContrastRule,
}

impl PromptInstance {
    /// The same prompt with the answer pair exchanged.
    pub fn swapped(&self) -> Self {
        let mut out = self.clone();
        std::mem::swap(&mut out.correct, &mut out.incorrect);
        out
    }
}

/// Sample lexicon choices from `seed` and render `factors`.
pub fn build_prompt(factors: PromptFactors, lexicon: &Lexicon, seed: u64) -> Result<PromptInstance> {
    build_prompt_with(factors, lexicon, seed, ContrastRule::default())
}

pub fn build_prompt_with(
    factors: PromptFactors,
    lexicon: &Lexicon,
    seed: u64,
    contrast: ContrastRule,
) -> Result<PromptInstance> {
    let mut rng = crate::seed::rng(seed, &[]);
    let choices = LexiconChoices::sample(lexicon, &mut rng)?;
    render(factors, lexicon, choices, seed, contrast)
}

/// Deterministic template expansion: `[prefix ][subject][ negation]`.
pub fn render(
    factors: PromptFactors,
    lexicon: &Lexicon,
    choices: LexiconChoices,
    rng_seed: u64,
    contrast: ContrastRule,
) -> Result<PromptInstance> {
    choices.check(lexicon)?;
    let past = factors.tense == Tense::Past;

    let subject = match (factors.is_pronoun, factors.is_plural) {
        (true, false) => lexicon.pronouns.singular.clone(),
        (true, true) => lexicon.pronouns.plural.clone(),
        (false, false) => lexicon.names[choices.name_a].clone(),
        (false, true) => format!(
            "{} and {}",
            lexicon.names[choices.name_a], lexicon.names[choices.name_b]
        ),
    };

    let mut text = String::new();
    if factors.has_prefix {
        let prefix = if past {
            &lexicon.past_prefixes[choices.past_prefix]
        } else {
            &lexicon.neutral_prefixes[choices.neutral_prefix]
        };
        text.push_str(prefix);
        text.push(' ');
        text.push_str(&if factors.is_pronoun {
            lowercase_first(&subject)
        } else {
            subject
        });
    } else {
        text.push_str(&subject);
    }
    if factors.is_negated {
        text.push_str(match (past, factors.is_plural) {
            (true, _) => " did not",
            (false, false) => " does not",
            (false, true) => " do not",
        });
    }

    let verb: &VerbForms = if factors.use_irregular {
        &lexicon.irregular_verbs[choices.irregular_verb]
    } else {
        &lexicon.regular_verbs[choices.regular_verb]
    };
    let agreeing = if factors.is_plural { &verb.base } else { &verb.third };
    let other = if factors.is_plural { &verb.third } else { &verb.base };
    let (correct, incorrect) = if factors.is_negated {
        (&verb.base, &verb.third)
    } else if past {
        (&verb.past, &verb.base)
    } else if factors.has_prefix && contrast == ContrastRule::PrefixTense {
        (agreeing, &verb.past)
    } else {
        (agreeing, other)
    };

    Ok(PromptInstance {
        factors,
        text,
        correct: format!(" {correct}"),
        incorrect: format!(" {incorrect}"),
        rng_seed,
        lexicon_choices: choices,
        contrast,
    })
}

/// Re-render `p` with one factor flipped, reusing its lexicon choices.
pub fn counterfactual(p: &PromptInstance, flip: Factor, lexicon: &Lexicon) -> Result<PromptInstance> {
    render(p.factors.flip(flip), lexicon, p.lexicon_choices, p.rng_seed, p.contrast)
}
