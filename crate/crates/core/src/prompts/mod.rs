//! Controlled subject-verb agreement prompts over six binary factors.

mod build;
mod dataset;
mod factors;
mod lexicon;

pub use build::{
    build_prompt, build_prompt_with, counterfactual, render, ContrastRule, LexiconChoices, PromptInstance,
};
pub use dataset::{
    generate_grid, generate_grid_with, instance_seed, setting_dataset, setting_dataset_with, setting_instance, Dataset,
};
pub use factors::{Factor, PromptFactors, Setting, Tense};
pub use lexicon::{Lexicon, Pronouns, VerbForms};
