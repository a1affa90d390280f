//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria that depend on trained GPT-2 Small behaviour need a checkpoint in
//! `$MODEL_DIR`. Without one they report `FAIL (BLOCKED)` and the run exits
//! non-zero; weight-independent criteria run on a full-size random model.

use std::collections::BTreeSet;
use std::time::Instant;

use sva_circuits::analysis::{dla_sweep, probe_suite};
use sva_circuits::circuits::{compare_circuits, Circuit};
use sva_circuits::eval::{evaluate_dataset, f1_from_accuracy};
use sva_circuits::model::{HeadId, Model, ModelConfig, PatchSet, MODEL_DIR_ENV};
use sva_circuits::patching::knockout_eval;
use sva_circuits::prompts::{Factor, Setting, Tense};
use sva_circuits::reference;
use sva_circuits::run::{self, Manifest, RunConfig, Session};

enum Status {
    Pass,
    Fail,
    Blocked,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn check(ok: bool, detail: String) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn blocked(what: &str) -> Outcome {
    Outcome {
        status: Status::Blocked,
        detail: format!("needs GPT-2 Small weights in ${MODEL_DIR_ENV} ({what})"),
    }
}

type Criterion = fn(&mut Ctx) -> Outcome;

struct Ctx {
    session: Session,
    trained: bool,
}

impl Ctx {
    fn model(&self) -> &Model {
        &self.session.model
    }

    fn with<T>(&mut self, edit: impl FnOnce(&mut RunConfig), f: impl FnOnce(&Session) -> T) -> T {
        let saved = self.session.config.clone();
        edit(&mut self.session.config);
        let out = f(&self.session);
        self.session.config = saved;
        out
    }
}

fn c1_metric_algebra(_: &mut Ctx) -> Outcome {
    let worst = reference::CELLS
        .iter()
        .map(|c| (f1_from_accuracy(c.accuracy) - c.f1).abs())
        .fold(0.0, f64::max);
    let examples = [(0.63, 0.77), (0.90, 0.95), (0.73, 0.84)]
        .iter()
        .all(|&(a, f)| (f1_from_accuracy(a) - f).abs() <= 0.005);
    check(
        worst <= 0.005 && examples,
        format!("64 per-cell rows, max |F1 - 2a/(1+a)| = {worst:.4}"),
    )
}

fn c2_full_model(ctx: &mut Ctx) -> Outcome {
    if !ctx.trained {
        return blocked("full-model accuracies");
    }
    let out = ctx
        .with(|c| c.n_per_cell = 25, run::verify)
        .expect("verify");
    let base = &out.summary[0];
    let neg = &out.summary[2];
    let irregular_neg: Vec<f64> = out
        .per_cell
        .iter()
        .filter(|(f, _)| f.is_negated && f.tense == Tense::Present && f.use_irregular)
        .map(|(_, r)| r.accuracy)
        .collect();
    let min_irr = irregular_neg.iter().copied().fold(1.0, f64::min);
    check(
        (0.50..=0.80).contains(&base.accuracy)
            && base.mean_logit_diff > 0.0
            && neg.accuracy >= 0.75
            && irregular_neg.len() == 8
            && min_irr >= 0.9,
        format!(
            "BASE acc {:.3} diff {:+.3}; is_negated acc {:.3}; min negated-present-irregular cell acc {:.3}",
            base.accuracy, base.mean_logit_diff, neg.accuracy, min_irr
        ),
    )
}

fn c3_effect_ranking(ctx: &mut Ctx) -> Outcome {
    if !ctx.trained {
        return blocked("head-effect ranking");
    }
    let sweep = ctx
        .with(
            |c| {
                c.n_per_cell = 50;
                c.flip = Factor::Plural;
            },
            |s| s.effects(Setting::Base),
        )
        .expect("effects");
    let ranking = sva_circuits::circuits::rank_heads(&sweep.matrix);
    let top3 = &ranking[..3];
    let l11 = top3.iter().filter(|h| h.layer == 11).count();
    check(
        top3.contains(&HeadId::new(11, 7)) && l11 >= 2,
        format!("top-3 by mean |effect|: {top3:?}"),
    )
}

fn c4_identity_patch(ctx: &mut Ctx) -> Outcome {
    use rayon::prelude::*;
    let model = ctx.model();
    let data = ctx.session.dataset(Setting::All, 64).expect("dataset");
    let mut rng = sva_circuits::seed::rng(4, &[]);
    let picks = rand::seq::index::sample(&mut rng, data.len(), 10);
    let heads: Vec<HeadId> = HeadId::all(model.config()).collect();
    let mut worst = 0.0f32;
    for i in picks {
        let tokens = model.encode(&data.instances[i].text);
        let (logits, cache) = model.run_with_cache(&tokens).expect("forward");
        let w = heads
            .par_iter()
            .map(|&h| {
                let mut patches = PatchSet::new();
                patches.insert(h, cache.head_output(h).clone());
                let patched = model.logits(&tokens, &patches).expect("patched forward");
                (&patched - &logits).iter().fold(0.0f32, |m, d| m.max(d.abs()))
            })
            .reduce(|| 0.0, f32::max);
        worst = worst.max(w);
    }
    check(
        worst < 1e-5,
        format!("10 prompts x {} heads, max |delta logit| = {worst:.2e}", heads.len()),
    )
}

fn c5_knockout_anchors(ctx: &mut Ctx) -> Outcome {
    let all: BTreeSet<HeadId> = HeadId::all(ctx.model().config()).collect();
    let s = &ctx.session;
    let data = s.eval_dataset(Setting::Base).expect("dataset");
    let bank = s.pools_for(&data).expect("pools");
    let ko = knockout_eval(&s.model, &all, &data, &bank, &s.config.knockout_config()).expect("knockout");
    let full = evaluate_dataset(&s.model, &data).expect("evaluate");
    let exact = ko.diffs.iter().zip(&full.diffs).all(|(a, b)| a.to_bits() == b.to_bits())
        && ko.report.accuracy == full.aggregate.overall.accuracy
        && ko.report.mean_logit_diff == full.aggregate.overall.mean_logit_diff
        && ko.report.std_logit_diff == full.aggregate.overall.std_logit_diff;
    let part_a = format!("all-{} knockout bit-exact: {exact}", all.len());
    if !ctx.trained {
        let mut o = blocked("12-head base circuit accuracy");
        o.detail = format!("{part_a}; {}", o.detail);
        if !exact {
            o.status = Status::Fail;
        }
        return o;
    }
    let base = Circuit::reference("Base").expect("reference circuit");
    let out = ctx
        .with(|c| c.search.eval_n = 100, |s| run::knockout(s, &base))
        .expect("knockout");
    let acc = out.knockout.report.accuracy;
    check(
        exact && (acc - out.full.accuracy).abs() <= 0.15 && (acc - 0.65).abs() <= 0.15,
        format!("{part_a}; base circuit acc {acc:.3}, full model {:.3}", out.full.accuracy),
    )
}

fn c6_greedy_search(ctx: &mut Ctx) -> Outcome {
    if !ctx.trained {
        return blocked("greedy search on trained heads");
    }
    let out = ctx
        .with(|c| c.setting = Setting::Base, run::search)
        .expect("search");
    let c = &out.circuit;
    let summary = c.search.as_ref().expect("summary");
    let min_gain = ctx.session.config.search.min_gain;
    let mut prev = summary.initial_accuracy;
    let mut monotone = true;
    for e in &c.provenance {
        monotone &= e.accuracy >= prev + min_gain - 1e-9;
        prev = e.accuracy;
    }
    let overlap = compare_circuits(c, &Circuit::reference("Base").expect("reference")).shared.len();
    check(
        c.len() <= 24 && summary.final_accuracy >= summary.full_accuracy - 0.10 && overlap >= 4 && monotone,
        format!(
            "{} heads, acc {:.3} vs full {:.3}, overlap with published base {overlap}, monotone log {monotone}",
            c.len(),
            summary.final_accuracy,
            summary.full_accuracy
        ),
    )
}

fn c7_dla_completeness(ctx: &mut Ctx) -> Outcome {
    let data = ctx.session.dataset(Setting::All, 100).expect("dataset");
    let reports = dla_sweep(ctx.model(), &data.instances).expect("dla");
    let worst = reports.iter().map(|r| r.completeness_error()).fold(0.0, f64::max);
    check(
        reports.len() == 100 && worst < 1e-3,
        format!("100 prompts, max completeness error {worst:.2e}"),
    )
}

fn c8_attention_validity(ctx: &mut Ctx) -> Outcome {
    let heads: Vec<HeadId> = HeadId::all(ctx.model().config()).collect();
    let patterns = probe_suite(ctx.model(), &heads).expect("patterns");
    let row_err = patterns.iter().map(|p| p.row_sum_error()).fold(0.0, f32::max);
    let causal = patterns.iter().all(|p| p.is_causal());
    let valid = patterns.len() == 4 * heads.len() && row_err <= 1e-5 && causal;
    let part_a = format!(
        "{} patterns, max row-sum error {row_err:.1e}, causal {causal}",
        patterns.len()
    );
    if !ctx.trained {
        let mut o = blocked("head (0,8) spread on trained weights");
        o.detail = format!("{part_a}; {}", o.detail);
        if !valid {
            o.status = Status::Fail;
        }
        return o;
    }
    let h08: Vec<f32> = patterns
        .iter()
        .filter(|p| p.head == HeadId::new(0, 8))
        .map(|p| p.final_query_max())
        .collect();
    check(
        valid && h08.len() == 4 && h08.iter().all(|&m| m < 0.9),
        format!("{part_a}; head (0,8) final-query max {h08:?}"),
    )
}

fn c9_determinism(ctx: &mut Ctx) -> Outcome {
    // Reduced sizes: the property is about bytes, not the numbers.
    let runs = |ctx: &mut Ctx, workers: usize| -> Vec<(Manifest, Vec<u8>)> {
        let dir = tempfile::tempdir().expect("tempdir");
        let mut out = Vec::new();
        let mut go = |ctx: &mut Ctx, name: &str, edit: &dyn Fn(&mut RunConfig), cmd: &(dyn Fn(&Session) -> Manifest + Sync)| {
            let path = dir.path().join(name);
            let m = ctx.with(
                |c| {
                    edit(c);
                    c.workers = Some(workers);
                    c.output_dir = path.clone();
                },
                |s| s.install(|| cmd(s)).expect("thread pool"),
            );
            let bytes = std::fs::read(path.join(run::MANIFEST_FILE)).expect("manifest");
            out.push((m, bytes));
        };
        go(ctx, "verify", &|c| c.n_per_cell = 1, &|s| run::cmd_verify(s).expect("verify").1);
        go(
            ctx,
            "effects",
            &|c| {
                c.n_per_cell = 2;
                c.setting = Setting::Base;
            },
            &|s| run::cmd_effects(s).expect("effects").1,
        );
        go(
            ctx,
            "knockout",
            &|c| {
                c.search.eval_n = 8;
                c.setting = Setting::Base;
            },
            &|s| {
                let base = Circuit::reference("Base").expect("reference");
                run::cmd_knockout(s, &base).expect("knockout").1
            },
        );
        out
    };
    let a = runs(ctx, 1);
    let b = runs(ctx, 2);
    let same = a.iter().zip(&b).all(|(x, y)| x.1 == y.1 && x.0.artifacts == y.0.artifacts);
    let n: usize = a.iter().map(|(m, _)| m.artifacts.len()).sum();
    check(
        same && n > 0,
        format!("verify/effects/knockout at 1 and 2 workers: {n} artifacts, manifests identical {same}"),
    )
}

fn main() {
    // `cargo test -- --list` and filters: this target takes no arguments.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let (model, trained) = match Model::default_dir() {
        Some(dir) => (Model::from_dir(&dir).expect("load checkpoint"), true),
        None => (Model::synthetic(ModelConfig::gpt2_small(), 0x5EED), false),
    };
    println!(
        "acceptance: {} model",
        if trained { "trained GPT-2 Small" } else { "random full-size (no checkpoint)" }
    );
    let session = Session::with_model(model, RunConfig::desk()).expect("session");
    let mut ctx = Ctx { session, trained };
    let criteria: [(&str, Criterion); 9] = [
        ("metric algebra", c1_metric_algebra),
        ("full-model directional reproduction", c2_full_model),
        ("head-effect ranking", c3_effect_ranking),
        ("identity-patch invariance", c4_identity_patch),
        ("knockout anchors", c5_knockout_anchors),
        ("greedy-search sanity", c6_greedy_search),
        ("DLA completeness", c7_dla_completeness),
        ("attention-pattern validity", c8_attention_validity),
        ("determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f(&mut ctx);
        let tag = match o.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Blocked => "FAIL (BLOCKED)",
        };
        if !matches!(o.status, Status::Pass) {
            failed += 1;
        }
        println!(
            "criterion {}: {tag}: {name}: {} [{:.1}s]",
            i + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
