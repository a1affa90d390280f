use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sva_circuits::circuits::Circuit;
use sva_circuits::patching::{AblationKind, PatchAlignment, ResampleMode};
use sva_circuits::prompts::{ContrastRule, Factor, Setting};
use sva_circuits::run::{self, Manifest, RunConfig, Session};
use sva_circuits::Result;

#[derive(Parser)]
#[command(name = "sva", version, about = "Subject-verb agreement circuits in GPT-2 Small")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Overrides for the config file; every flag wins over the file.
#[derive(Args)]
struct Common {
    /// TOML run config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Published sample sizes (n_per_cell 100, pool 32, eval_n 100).
    #[arg(long, global = true)]
    full: bool,
    #[arg(long, global = true, env = "MODEL_DIR")]
    model_dir: Option<PathBuf>,
    /// Random weights with this seed instead of a checkpoint.
    #[arg(long, global = true)]
    synthetic_model: Option<u64>,
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    setting: Option<Setting>,
    #[arg(long, global = true)]
    n_per_cell: Option<usize>,
    #[arg(long, global = true)]
    dataset_seed: Option<u64>,
    #[arg(long, global = true)]
    pool_seed: Option<u64>,
    #[arg(long, global = true)]
    search_seed: Option<u64>,
    #[arg(long, global = true)]
    flip: Option<Factor>,
    #[arg(long, global = true)]
    alignment: Option<PatchAlignment>,
    #[arg(long, global = true)]
    contrast: Option<ContrastRule>,
    #[arg(long, global = true)]
    ablation: Option<AblationKind>,
    #[arg(long, global = true)]
    resample_mode: Option<ResampleMode>,
    #[arg(long, global = true)]
    pool_size: Option<usize>,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[arg(long, global = true)]
    min_gain: Option<f64>,
    #[arg(long, global = true)]
    patience: Option<usize>,
    #[arg(long, global = true)]
    eval_n: Option<usize>,
    /// Rank expansion candidates on BASE instead of the target setting.
    #[arg(long, global = true)]
    no_rerank: bool,
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (default: all hardware threads).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Full-model accuracy on all eight settings and the 64 cells.
    Verify,
    /// Per-head patching effects for one setting.
    Effects,
    /// Greedy circuit search from scratch.
    Search,
    /// Grow a base circuit on the configured setting.
    Expand {
        /// Circuit file or published circuit name (e.g. Base).
        base: String,
    },
    /// Evaluate a circuit with every other head ablated.
    Knockout {
        /// Circuit file or published circuit name.
        circuit: String,
    },
    /// Attention patterns for heads on texts (default: the agreement probes).
    Attn {
        /// Heads as "(layer, head), ...".
        #[arg(long)]
        heads: String,
        #[arg(long = "text")]
        texts: Vec<String>,
    },
    /// Direct logit attribution over the setting's prompts.
    Dla,
    /// Write the prompt dataset as JSONL.
    Gen,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::desk(),
        };
        if self.full {
            c.apply_full_profile();
        }
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag.clone() {
                    c.$($field).+ = v;
                }
            };
        }
        if self.model_dir.is_some() {
            c.model_dir = self.model_dir.clone();
        }
        if self.synthetic_model.is_some() {
            c.synthetic_model = self.synthetic_model;
        }
        if self.lexicon.is_some() {
            c.lexicon = self.lexicon.clone();
        }
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        set!(setting => setting);
        set!(n_per_cell => n_per_cell);
        set!(dataset_seed => seeds.dataset);
        set!(pool_seed => seeds.pool);
        set!(search_seed => seeds.search);
        set!(flip => flip);
        set!(alignment => alignment);
        set!(contrast => contrast);
        set!(ablation => ablation);
        set!(resample_mode => resample_mode);
        set!(pool_size => pool_size);
        set!(tolerance => search.tolerance);
        set!(min_gain => search.min_gain);
        set!(patience => search.patience);
        set!(eval_n => search.eval_n);
        set!(output => output_dir);
        if self.no_rerank {
            c.search.rerank = false;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<Manifest> {
    let config = cli.common.resolve()?;
    if let Command::Gen = cli.command {
        return run::gen(&config).map(|(_, m)| m);
    }
    // Inputs are checked before the model loads.
    let circuit = match &cli.command {
        Command::Expand { base: c } | Command::Knockout { circuit: c } => Some(run::load_circuit(c)?),
        _ => None,
    };
    let heads = match &cli.command {
        Command::Attn { heads, .. } => Circuit::parse_heads(heads)?,
        _ => Vec::new(),
    };
    let session = Session::new(config)?;
    let s = &session;
    session.install(|| -> Result<Manifest> {
        Ok(match &cli.command {
            Command::Verify => {
                let (out, m) = run::cmd_verify(s)?;
                for r in &out.summary {
                    println!(
                        "{:<12} acc {:.3}  f1 {:.3}  logit diff {:+.3} ± {:.3}",
                        r.group_key.as_deref().unwrap_or(""),
                        r.accuracy,
                        r.f1,
                        r.mean_logit_diff,
                        r.std_logit_diff
                    );
                }
                m
            }
            Command::Effects => {
                let (out, m) = run::cmd_effects(s)?;
                println!(
                    "{} pairs, {} skipped",
                    out.skips.pairs, out.skips.skipped_length_mismatch
                );
                m
            }
            Command::Search => {
                let (out, m) = run::cmd_search(s)?;
                print_circuit(&out.circuit);
                m
            }
            Command::Expand { .. } => {
                let (out, m) = run::cmd_expand(s, circuit.as_ref().expect("parsed above"))?;
                print_circuit(&out.circuit);
                m
            }
            Command::Knockout { .. } => {
                let (out, m) = run::cmd_knockout(s, circuit.as_ref().expect("parsed above"))?;
                println!(
                    "{} heads: acc {:.3}  f1 {:.3}  (full model acc {:.3})",
                    out.knockout.n_circuit, out.knockout.report.accuracy, out.knockout.report.f1, out.full.accuracy
                );
                m
            }
            Command::Attn { texts, .. } => run::cmd_attn(s, &heads, texts)?.1,
            Command::Dla => {
                let (out, m) = run::cmd_dla(s)?;
                println!("max completeness error {:.2e}", out.max_completeness_error);
                m
            }
            Command::Gen => unreachable!(),
        })
    })?
}

fn print_circuit(c: &Circuit) {
    println!("{} heads: {}", c.len(), c.head_list());
    if let Some(s) = &c.search {
        println!(
            "acc {:.3} (full {:.3}), {} candidates, stop {:?}",
            s.final_accuracy, s.full_accuracy, s.candidates_evaluated, s.stop_reason
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(m) => {
            println!("wrote {} artifacts and {}", m.artifacts.len(), run::MANIFEST_FILE);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
