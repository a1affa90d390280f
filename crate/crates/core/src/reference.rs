//! Published measurements of GPT-2 Small on this task, used as targets and
//! as oracles for the metric algebra.
//!
//! Precision is 1.00 and recall equals accuracy in every published row, and
//! every cell was measured on 100 prompts.

use crate::prompts::{PromptFactors, Setting, Tense};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellReference {
    pub factors: PromptFactors,
    pub accuracy: f64,
    pub f1: f64,
    pub mean_logit_diff: f64,
    pub std_logit_diff: f64,
}

#[allow(clippy::too_many_arguments)]
const fn cell(
    is_plural: bool,
    is_negated: bool,
    has_prefix: bool,
    is_pronoun: bool,
    past: bool,
    use_irregular: bool,
    accuracy: f64,
    f1: f64,
    mean_logit_diff: f64,
    std_logit_diff: f64,
) -> CellReference {
    CellReference {
        factors: PromptFactors {
            is_plural,
            is_negated,
            has_prefix,
            is_pronoun,
            tense: if past { Tense::Past } else { Tense::Present },
            use_irregular,
        },
        accuracy,
        f1,
        mean_logit_diff,
        std_logit_diff,
    }
}

/// Per-cell full-model results, printed to two decimals.
pub const CELLS: [CellReference; 64] = [
    cell(false, false, false, false, true, false, 0.62, 0.77, 0.44, 1.47),
    cell(false, false, false, false, true, true, 0.70, 0.82, 0.79, 1.12),
    cell(false, false, false, false, false, false, 0.63, 0.77, 0.46, 1.73),
    cell(false, false, false, false, false, true, 0.62, 0.77, 0.11, 0.38),
    cell(false, false, false, true, true, false, 0.81, 0.90, 1.40, 1.66),
    cell(false, false, false, true, true, true, 0.67, 0.80, 1.51, 1.51),
    cell(false, false, false, true, false, false, 0.62, 0.77, 0.75, 1.94),
    cell(false, false, false, true, false, true, 1.00, 1.00, 0.74, 0.45),
    cell(false, false, true, false, true, false, 0.94, 0.97, 3.44, 2.11),
    cell(false, false, true, false, true, true, 1.00, 1.00, 4.12, 2.00),
    cell(false, false, true, false, false, false, 0.69, 0.82, 1.31, 2.09),
    cell(false, false, true, false, false, true, 1.00, 1.00, 1.67, 0.76),
    cell(false, false, true, true, true, false, 0.95, 0.97, 3.26, 2.05),
    cell(false, false, true, true, true, true, 1.00, 1.00, 4.60, 1.99),
    cell(false, false, true, true, false, false, 0.85, 0.92, 2.05, 2.17),
    cell(false, false, true, true, false, true, 1.00, 1.00, 2.39, 0.60),
    cell(false, true, false, false, true, false, 0.85, 0.92, 2.52, 2.15),
    cell(false, true, false, false, true, true, 0.92, 0.96, 1.68, 1.30),
    cell(false, true, false, false, false, false, 0.90, 0.95, 2.94, 2.14),
    cell(false, true, false, false, false, true, 1.00, 1.00, 3.52, 0.29),
    cell(false, true, false, true, true, false, 0.90, 0.95, 2.53, 2.10),
    cell(false, true, false, true, true, true, 1.00, 1.00, 2.18, 1.22),
    cell(false, true, false, true, false, false, 0.83, 0.91, 2.90, 2.77),
    cell(false, true, false, true, false, true, 1.00, 1.00, 4.01, 0.19),
    cell(false, true, true, false, true, false, 0.79, 0.88, 1.83, 2.17),
    cell(false, true, true, false, true, true, 0.86, 0.92, 1.80, 1.38),
    cell(false, true, true, false, false, false, 0.94, 0.97, 3.63, 2.11),
    cell(false, true, true, false, false, true, 1.00, 1.00, 4.02, 0.22),
    cell(false, true, true, true, true, false, 0.84, 0.91, 2.17, 2.16),
    cell(false, true, true, true, true, true, 0.85, 0.92, 1.57, 1.37),
    cell(false, true, true, true, false, false, 0.89, 0.94, 3.06, 2.30),
    cell(false, true, true, true, false, true, 1.00, 1.00, 3.82, 0.24),
    cell(true, false, false, false, true, false, 0.73, 0.84, 1.19, 1.67),
    cell(true, false, false, false, true, true, 0.64, 0.78, 1.25, 1.56),
    cell(true, false, false, false, false, false, 0.73, 0.84, 1.13, 2.18),
    cell(true, false, false, false, false, true, 0.92, 0.96, 0.89, 0.58),
    cell(true, false, false, true, true, false, 0.63, 0.77, 0.10, 1.92),
    cell(true, false, false, true, true, true, 0.68, 0.81, 0.57, 1.64),
    cell(true, false, false, true, false, false, 0.65, 0.79, 1.20, 2.90),
    cell(true, false, false, true, false, true, 1.00, 1.00, 1.54, 0.45),
    cell(true, false, true, false, true, false, 0.88, 0.94, 2.94, 2.44),
    cell(true, false, true, false, true, true, 1.00, 1.00, 3.23, 2.18),
    cell(true, false, true, false, false, false, 0.60, 0.75, 1.00, 2.48),
    cell(true, false, true, false, false, true, 0.98, 0.99, 1.37, 0.66),
    cell(true, false, true, true, true, false, 0.91, 0.95, 3.02, 2.20),
    cell(true, false, true, true, true, true, 0.82, 0.90, 3.26, 2.40),
    cell(true, false, true, true, false, false, 0.67, 0.80, 1.42, 2.58),
    cell(true, false, true, true, false, true, 1.00, 1.00, 2.49, 0.70),
    cell(true, true, false, false, true, false, 0.82, 0.90, 1.95, 1.84),
    cell(true, true, false, false, true, true, 0.91, 0.95, 1.79, 1.26),
    cell(true, true, false, false, false, false, 0.91, 0.95, 3.09, 1.94),
    cell(true, true, false, false, false, true, 1.00, 1.00, 4.02, 0.32),
    cell(true, true, false, true, true, false, 0.92, 0.96, 3.06, 2.16),
    cell(true, true, false, true, true, true, 1.00, 1.00, 2.31, 1.04),
    cell(true, true, false, true, false, false, 0.89, 0.94, 3.12, 2.48),
    cell(true, true, false, true, false, true, 1.00, 1.00, 4.42, 0.24),
    cell(true, true, true, false, true, false, 0.90, 0.95, 2.61, 1.91),
    cell(true, true, true, false, true, true, 0.91, 0.95, 1.84, 1.29),
    cell(true, true, true, false, false, false, 0.93, 0.96, 3.47, 2.26),
    cell(true, true, true, false, false, true, 1.00, 1.00, 4.21, 0.31),
    cell(true, true, true, true, true, false, 0.85, 0.92, 2.54, 2.22),
    cell(true, true, true, true, true, true, 1.00, 1.00, 1.92, 1.29),
    cell(true, true, true, true, false, false, 0.96, 0.98, 3.59, 1.90),
    cell(true, true, true, true, false, true, 1.00, 1.00, 4.14, 0.36),
];

/// Full-model accuracy and F1 per setting.
pub const SETTINGS: [(Setting, f64, f64); 8] = [
    (Setting::Base, 0.63, 0.77),
    (Setting::Flip(crate::prompts::Factor::Plural), 0.73, 0.77),
    (Setting::Flip(crate::prompts::Factor::Negated), 0.90, 0.95),
    (Setting::Flip(crate::prompts::Factor::Prefix), 0.74, 0.85),
    (Setting::Flip(crate::prompts::Factor::Pronoun), 0.69, 0.82),
    (Setting::Flip(crate::prompts::Factor::Tense), 0.62, 0.77),
    (Setting::Flip(crate::prompts::Factor::Irregular), 0.62, 0.77),
    (Setting::All, 1.00, 1.00),
];

/// Circuit knockout results: (circuit name, heads, circuit accuracy, full-model accuracy).
pub const KNOCKOUT: [(&str, usize, f64, f64); 8] = [
    ("Base", 12, 0.65, 0.70),
    ("Plural", 23, 0.53, 0.88),
    ("Negation", 29, 0.53, 0.91),
    ("Prefix", 82, 0.78, 0.91),
    ("Pronoun", 22, 0.57, 0.88),
    ("Past Tense", 55, 0.63, 0.86),
    ("Irregular", 97, 0.82, 0.93),
    ("Complex", 125, 0.80, 1.00),
];

/// Published circuits as `(layer, head)` lists in discovery order.
pub const CIRCUITS: [(&str, &str); 8] = [
    (
        "Base",
        concat!(
            "(11,6), (0,4), (11,4), (0,8), (11,7), (2,6), (1,0), (2,1), (1,1), (6,0), (10,0), ",
            "(9,4)"
        ),
    ),
    (
        "Plural",
        concat!(
            "(11, 6), (0, 4), (11, 4), (0, 8), (11, 7), (2, 6), (1, 0), (2, 1), (1, 1), (6, 0), ",
            "(10, 0), (9, 4), (11, 11), (11, 1), (10, 7), (0, 6), (0, 10), (1, 8), (9, 6), ",
            "(11, 3), (4, 4), (6, 5), (11, 5)"
        ),
    ),
    (
        "Negation",
        concat!(
            "(11, 6), (0, 4), (11, 4), (0, 8), (11, 7), (2, 6), (1, 0), (2, 1), (1, 1), (6, 0), ",
            "(10, 0), (9, 4), (11, 1), (0, 10), (11, 11), (9, 6), (6, 8), (10, 7), (0, 6), ",
            "(1, 8), (5, 11), (1, 9), (9, 5), (11, 3), (4, 4), (6, 5), (11, 5), (7, 8), (4, 9)"
        ),
    ),
    (
        "Prefix",
        concat!(
            "(11, 6), (0, 4), (11, 4), (0, 8), (11, 7), (2, 6), (1, 0), (2, 1), (1, 1), (6, 0), ",
            "(10, 0), (9, 4), (11, 11), (11, 1), (11, 5), (10, 7), (1, 8), (9, 6), (0, 10), ",
            "(0, 6), (11, 3), (4, 4), (6, 5), (1, 9), (4, 9), (6, 11), (9, 5), (7, 8), (10, 2), ",
            "(2, 4), (1, 3), (10, 5), (5, 10), (0, 7), (0, 2), (6, 8), (8, 0), (1, 10), (8, 8), ",
            "(7, 9), (5, 11), (2, 10), (11, 10), (7, 2), (7, 6), (8, 4), (7, 7), (7, 3), ",
            "(9, 11), (4, 10), (0, 9), (10, 6), (1, 11), (2, 11), (5, 5), (7, 5), (9, 1), ",
            "(5, 9), (5, 0), (3, 7), (4, 0), (5, 3), (7, 11), (7, 0), (8, 10), (10, 11), (0, 3), ",
            "(1, 5), (4, 3), (3, 2), (8, 2), (9, 10), (3, 6), (5, 4), (6, 3), (6, 4), (10, 9), ",
            "(9, 8), (8, 1), (6, 7), (8, 3), (11, 2)"
        ),
    ),
    (
        "Pronoun",
        concat!(
            "(11, 6), (0, 4), (11, 4), (0, 8), (11, 7), (2, 6), (1, 0), (2, 1), (1, 1), (6, 0), ",
            "(10, 0), (9, 4), (11, 1), (11, 11), (10, 7), (0, 10), (7, 5), (9, 6), (11, 3), ",
            "(1, 8), (0, 6), (4, 4)"
        ),
    ),
    (
        "Past Tense",
        concat!(
            "(11, 6), (0, 4), (11, 4), (0, 8), (11, 7), (2, 6), (1, 0), (2, 1), (1, 1), (6, 0), ",
            "(10, 0), (9, 4), (11, 11), (10, 7), (0, 10), (11, 1), (1, 8), (8, 8), (0, 6), ",
            "(11, 3), (6, 5), (4, 4), (4, 9), (11, 5), (7, 8), (9, 6), (1, 9), (6, 11), (5, 10), ",
            "(10, 5), (10, 2), (0, 2), (9, 5), (1, 3), (6, 8), (0, 7), (2, 4), (5, 11), (7, 9), ",
            "(1, 10), (5, 5), (2, 10), (9, 11), (11, 10), (7, 2), (7, 6), (8, 0), (8, 4), ",
            "(4, 10), (3, 7), (7, 11), (7, 7), (2, 11), (0, 9), (7, 5)"
        ),
    ),
    (
        "Irregular",
        concat!(
            "(11, 6), (0, 4), (11, 4), (0, 8), (11, 7), (2, 6), (1, 0), (2, 1), (1, 1), (6, 0), ",
            "(10, 0), (9, 4), (11, 1), (11, 11), (1, 8), (0, 10), (9, 6), (10, 7), (0, 6), ",
            "(11, 3), (4, 4), (6, 5), (11, 5), (7, 8), (6, 11), (1, 9), (9, 5), (4, 9), (1, 3), ",
            "(10, 5), (0, 2), (10, 2), (5, 10), (7, 9), (7, 3), (8, 0), (0, 9), (6, 8), (0, 7), ",
            "(2, 4), (5, 11), (8, 8), (1, 10), (1, 11), (9, 1), (2, 10), (7, 6), (10, 6), ",
            "(11, 10), (8, 4), (7, 2), (9, 11), (5, 5), (7, 5), (7, 11), (4, 10), (7, 7), ",
            "(5, 9), (3, 7), (5, 3), (0, 3), (1, 5), (2, 11), (8, 2), (5, 0), (4, 0), (7, 0), ",
            "(6, 3), (4, 3), (8, 10), (9, 10), (6, 4), (9, 8), (10, 9), (8, 1), (7, 1), (8, 3), ",
            "(10, 8), (11, 2), (3, 2), (6, 7), (8, 9), (0, 5), (11, 9), (6, 9), (2, 8), (9, 2), ",
            "(0, 0), (1, 7), (2, 7), (2, 5), (10, 11), (4, 5), (7, 4), (5, 4), (5, 1), (2, 3)"
        ),
    ),
    (
        "Complex",
        concat!(
            "(11, 6), (0, 4), (11, 4), (0, 8), (11, 7), (2, 6), (1, 0), (2, 1), (1, 1), (6, 0), ",
            "(10, 0), (9, 4), (11, 11), (11, 1), (0, 10), (10, 7), (1, 8), (0, 6), (4, 4), ",
            "(9, 6), (11, 5), (6, 11), (6, 5), (11, 3), (4, 9), (1, 9), (0, 2), (9, 5), (10, 5), ",
            "(8, 10), (7, 8), (1, 3), (10, 2), (5, 10), (8, 8), (2, 4), (6, 8), (5, 11), (7, 9), ",
            "(1, 10), (0, 7), (2, 10), (11, 10), (8, 4), (9, 10), (7, 2), (7, 7), (9, 11), ",
            "(10, 8), (7, 6), (8, 0), (0, 9), (3, 10), (7, 11), (4, 10), (1, 11), (5, 5), ",
            "(7, 5), (5, 9), (2, 11), (9, 1), (7, 3), (3, 7), (8, 2), (5, 0), (4, 0), (5, 3), ",
            "(10, 6), (2, 8), (7, 0), (2, 5), (0, 3), (6, 3), (1, 5), (10, 9), (6, 4), (9, 8), ",
            "(8, 1), (6, 7), (11, 2), (3, 2), (0, 5), (8, 3), (6, 9), (11, 9), (8, 9), (0, 0), ",
            "(5, 4), (2, 7), (9, 2), (10, 11), (4, 5), (7, 4), (5, 1), (4, 3), (8, 6), (8, 7), ",
            "(1, 7), (8, 11), (3, 6), (7, 10), (10, 3), (6, 2), (9, 9), (1, 2), (5, 6), (9, 3), ",
            "(3, 1), (3, 4), (10, 4), (5, 7), (4, 11), (11, 0), (4, 7), (4, 2), (3, 3), (9, 7), ",
            "(6, 6), (1, 6), (3, 0), (6, 1), (4, 6), (10, 10), (8, 5), (3, 8)"
        ),
    ),
];

/// Head list of a published circuit by name (case-insensitive).
pub fn circuit_heads(name: &str) -> Option<&'static str> {
    CIRCUITS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|&(_, heads)| heads)
}

pub fn cell_reference(factors: &PromptFactors) -> &'static CellReference {
    CELLS
        .iter()
        .find(|c| c.factors == *factors)
        .expect("every cell has a reference row")
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn cells_cover_the_grid_once() {
        let seen: HashSet<_> = CELLS.iter().map(|c| c.factors).collect();
        assert_eq!(seen.len(), 64);
    }

    #[test]
    fn circuit_names_resolve() {
        for (name, _, _, _) in KNOCKOUT {
            assert!(circuit_heads(name).is_some(), "{name}");
        }
        assert!(circuit_heads("past tense").is_some());
        assert!(circuit_heads("Unknown").is_none());
    }
}
