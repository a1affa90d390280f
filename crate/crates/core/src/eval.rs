//! Logit-difference metric and aggregate classification metrics.
//!
//! Every prompt's true label is its correct form, so a prediction is either a
//! true positive or a false negative: precision is 1, recall equals accuracy
//! and F1 is `2a / (1 + a)`.

use std::collections::BTreeMap;

use ndarray::ArrayView1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, PatchSet, TokenSequence, Tokenizer};
use crate::prompts::{Dataset, PromptFactors, PromptInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnswerPair {
    pub correct: u32,
    pub incorrect: u32,
}

impl AnswerPair {
    pub fn for_prompt(tokenizer: &Tokenizer, p: &PromptInstance) -> Result<Self> {
        let correct = tokenizer.single_token(&p.correct)?;
        let incorrect = tokenizer.single_token(&p.incorrect)?;
        if correct == incorrect {
            return Err(Error::IdenticalAnswers(p.correct.clone()));
        }
        Ok(Self { correct, incorrect })
    }

    pub fn diff(&self, logits: ArrayView1<'_, f32>) -> f32 {
        logits[self.correct as usize] - logits[self.incorrect as usize]
    }
}

/// A prompt encoded once for repeated forward passes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedPrompt {
    pub tokens: TokenSequence,
    pub answers: AnswerPair,
}

impl PreparedPrompt {
    pub fn new(model: &Model, p: &PromptInstance) -> Result<Self> {
        let answers = AnswerPair::for_prompt(model.tokenizer(), p)?;
        let tokens = model.encode(&p.text);
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(Self { tokens, answers })
    }

    pub fn logit_diff(&self, model: &Model, patches: &PatchSet) -> Result<f32> {
        Ok(self.answers.diff(model.logits(&self.tokens, patches)?.view()))
    }
}

/// `logit[correct] - logit[incorrect]` at the final position.
pub fn logit_diff(model: &Model, p: &PromptInstance, patches: &PatchSet) -> Result<f32> {
    PreparedPrompt::new(model, p)?.logit_diff(model, patches)
}

/// Ties count as incorrect.
pub fn is_correct(diff: f32) -> bool {
    diff > 0.0
}

pub fn classify(model: &Model, p: &PromptInstance, patches: &PatchSet) -> Result<bool> {
    Ok(is_correct(logit_diff(model, p, patches)?))
}

pub fn f1_from_accuracy(accuracy: f64) -> f64 {
    if accuracy <= 0.0 {
        0.0
    } else {
        2.0 * accuracy / (1.0 + accuracy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub group_key: Option<String>,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mean_logit_diff: f64,
    pub std_logit_diff: f64,
    pub count: usize,
}

impl EvalReport {
    /// Metrics over a set of logit differences. Values are sorted before
    /// summing in f64, so the result does not depend on input order.
    pub fn from_diffs(diffs: &[f32], group_key: Option<String>) -> Result<Self> {
        if diffs.is_empty() {
            return Err(Error::EmptyInput("cannot aggregate zero results"));
        }
        let mut sorted: Vec<f64> = diffs.iter().map(|&d| d as f64).collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let mut sq: Vec<f64> = sorted.iter().map(|d| (d - mean) * (d - mean)).collect();
        sq.sort_by(f64::total_cmp);
        let std = (sq.iter().sum::<f64>() / n).sqrt();
        let accuracy = diffs.iter().filter(|&&d| is_correct(d)).count() as f64 / n;
        Ok(Self {
            group_key,
            accuracy,
            precision: 1.0,
            recall: accuracy,
            f1: f1_from_accuracy(accuracy),
            mean_logit_diff: mean,
            std_logit_diff: std,
            count: diffs.len(),
        })
    }
}

/// Pooled report plus one report per grid cell, in cell-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub overall: EvalReport,
    pub per_cell: Vec<(PromptFactors, EvalReport)>,
}

pub fn aggregate(results: &[(PromptInstance, f32)]) -> Result<Aggregate> {
    let diffs: Vec<f32> = results.iter().map(|(_, d)| *d).collect();
    let overall = EvalReport::from_diffs(&diffs, None)?;
    let mut cells: BTreeMap<usize, (PromptFactors, Vec<f32>)> = BTreeMap::new();
    for (p, d) in results {
        cells
            .entry(p.factors.index())
            .or_insert_with(|| (p.factors, Vec::new()))
            .1
            .push(*d);
    }
    let per_cell = cells
        .into_values()
        .map(|(f, ds)| Ok((f, EvalReport::from_diffs(&ds, Some(f.label()))?)))
        .collect::<Result<_>>()?;
    Ok(Aggregate { overall, per_cell })
}

/// Full-model results on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEval {
    pub diffs: Vec<f32>,
    pub aggregate: Aggregate,
}

/// Unpatched logit differences for every instance, in dataset order.
/// Parallel over instances; each result depends only on its own prompt.
pub fn dataset_diffs(model: &Model, dataset: &Dataset) -> Result<Vec<f32>> {
    dataset
        .instances
        .par_iter()
        .map(|p| logit_diff(model, p, &PatchSet::new()))
        .collect()
}

pub fn evaluate_dataset(model: &Model, dataset: &Dataset) -> Result<DatasetEval> {
    let diffs = dataset_diffs(model, dataset)?;
    let pairs: Vec<_> = dataset.instances.iter().cloned().zip(diffs.iter().copied()).collect();
    let mut aggregate = aggregate(&pairs)?;
    aggregate.overall.group_key = Some(dataset.setting.label().to_string());
    Ok(DatasetEval { diffs, aggregate })
}

/// Rows with the per-cell report columns.
pub fn per_cell_csv(per_cell: &[(PromptFactors, EvalReport)]) -> String {
    let mut out = String::from(
        "number,negation,prefix,subject,tense,verb_type,accuracy,precision,recall,f1,mean_logit_diff,std_logit_diff,count\n",
    );
    for (f, r) in per_cell {
        let label = f.label();
        let cols: Vec<&str> = label.split(' ').collect();
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{}\n",
            cols.join(","),
            r.accuracy,
            r.precision,
            r.recall,
            r.f1,
            r.mean_logit_diff,
            r.std_logit_diff,
            r.count
        ));
    }
    out
}

/// One row per report: `group,accuracy,f1,mean_logit_diff,std_logit_diff,count`.
pub fn summary_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("setting,accuracy,precision,recall,f1,mean_logit_diff,std_logit_diff,count\n");
    for r in reports {
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{}\n",
            r.group_key.as_deref().unwrap_or(""),
            r.accuracy,
            r.precision,
            r.recall,
            r.f1,
            r.mean_logit_diff,
            r.std_logit_diff,
            r.count
        ));
    }
    out
}
