//! `sgcanon` command line: synthetic data generation, canonicalization,
//! graph transforms, training, evaluation, experiments and SVG rendering.
//!
//! Exit codes: 0 success, 1 validation error (bad arguments or inputs),
//! 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sgcanon::canon::{sgc, wsgc_e, wsgc_s, CanonParams, FormulaSet, DEFAULT_PRUNE_EPSILON};
use sgcanon::data::{
    noise_transform, semantic_equivalent_transform, synth_generate, SynthConfig,
};
use sgcanon::error::{Error, Result};
use sgcanon::eval::evaluate;
use sgcanon::experiment::{run_experiment, ExperimentSpec};
use sgcanon::graph::{Layout, SceneGraph, WeightedSceneGraph};
use sgcanon::jsonl;
use sgcanon::neural::{save_checkpoint, Checkpoint};
use sgcanon::render::rasterize;
use sgcanon::seed;
use sgcanon::train::{train, write_report_csv, TrainConfig};
use sgcanon::vocab::RelationVocab;

#[derive(Parser)]
#[command(name = "sgcanon", version, about = "Scene-graph canonicalization and layout prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CanonMode {
    Sgc,
    WsgcE,
    WsgcS,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TransformKind {
    Equivalent,
    Noise,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of scene graphs with layouts
    GenData {
        /// Synthetic generator configuration (JSON)
        #[arg(long)]
        synth_config: PathBuf,
        #[arg(long)]
        count: usize,
        /// Output JSON-lines dataset
        #[arg(long)]
        out: PathBuf,
        /// Override the seed in the config
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the generator's vocabulary here
        #[arg(long)]
        vocab_out: Option<PathBuf>,
        /// Also write the generator's ground-truth formula set here
        #[arg(long)]
        formulas_out: Option<PathBuf>,
    },
    /// Canonicalize scene graphs (exact, exact-weighted or sampled)
    Canonicalize {
        #[arg(long, value_enum)]
        mode: CanonMode,
        #[arg(long)]
        vocab: PathBuf,
        /// Formula set (JSON); required for mode sgc
        #[arg(long)]
        formulas: Option<PathBuf>,
        /// Canonicalization parameters (JSON); required for wsgc modes
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pruning threshold for wsgc-e completions
        #[arg(long, default_value_t = DEFAULT_PRUNE_EPSILON)]
        epsilon: f64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rewrite graphs: semantically equivalent variants or label noise
    Transform {
        #[arg(long, value_enum)]
        kind: TransformKind,
        /// Synthetic config; required for kind equivalent (provides the
        /// geometry predicates, vocabulary and formula set)
        #[arg(long)]
        synth_config: Option<PathBuf>,
        /// Vocabulary; required for kind noise
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Fraction of edges to relabel under kind noise
        #[arg(long, default_value_t = 0.10)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the canonicalization + layout pipeline
    Train {
        /// Training configuration (JSON), including dataset paths
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Score predicted layouts against ground truth
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
    },
    /// Run a full experiment specification
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Rasterize layouts to one SVG per scene
    Render {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { synth_config, count, out, seed, vocab_out, formulas_out } => {
            let text = std::fs::read_to_string(&synth_config)?;
            let mut config: SynthConfig = serde_json::from_str(&text)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            config.validate()?;
            let vocab = config.vocab();
            let data = synth_generate(&config, count)?;
            let items: Vec<(SceneGraph, Option<Layout>)> =
                data.into_iter().map(|(g, l)| (g, Some(l))).collect();
            jsonl::write_graphs(&out, &items, &vocab)?;
            if let Some(path) = vocab_out {
                vocab.save(&path)?;
            }
            if let Some(path) = formulas_out {
                let file = config.formula_set().to_names(&vocab)?;
                std::fs::write(&path, serde_json::to_string_pretty(&file)?)?;
            }
            println!("wrote {count} scenes to {}", out.display());
            Ok(())
        }

        Command::Canonicalize { mode, vocab, formulas, params, seed: seed_val, epsilon, input, out } => {
            let vocab = RelationVocab::load(&vocab)?;
            let items = jsonl::read_graphs(&input, &vocab)?;
            let weighted: Vec<(WeightedSceneGraph, Option<Layout>)> = match mode {
                CanonMode::Sgc => {
                    let path = formulas.ok_or_else(|| {
                        Error::Input("mode sgc requires --formulas".into())
                    })?;
                    let f = FormulaSet::load(&path, &vocab)?;
                    items
                        .into_iter()
                        .map(|(g, l)| {
                            Ok((WeightedSceneGraph::from_unweighted(&sgc(&g, &f)?), l))
                        })
                        .collect::<Result<_>>()?
                }
                CanonMode::WsgcE => {
                    let p = load_params(params, &vocab)?;
                    items
                        .into_iter()
                        .map(|(g, l)| Ok((wsgc_e(&g, &p, epsilon)?.0, l)))
                        .collect::<Result<_>>()?
                }
                CanonMode::WsgcS => {
                    let p = load_params(params, &vocab)?;
                    items
                        .into_iter()
                        .enumerate()
                        .map(|(idx, (g, l))| {
                            let mut rng =
                                seed::rng(seed::derive(seed_val, "canonicalize", idx as u64));
                            Ok((wsgc_s(&g, &p, &mut rng)?.0, l))
                        })
                        .collect::<Result<_>>()?
                }
            };
            jsonl::write_weighted_graphs(&out, &weighted, &vocab)?;
            println!("canonicalized {} scenes to {}", weighted.len(), out.display());
            Ok(())
        }

        Command::Transform { kind, synth_config, vocab, fraction, seed: seed_val, input, out } => {
            match kind {
                TransformKind::Equivalent => {
                    let path = synth_config.ok_or_else(|| {
                        Error::Input("kind equivalent requires --synth-config".into())
                    })?;
                    let config: SynthConfig =
                        serde_json::from_str(&std::fs::read_to_string(&path)?)?;
                    config.validate()?;
                    let vocab = config.vocab();
                    let f = config.formula_set();
                    let items = jsonl::read_graphs(&input, &vocab)?;
                    let transformed: Vec<(SceneGraph, Option<Layout>)> = items
                        .into_iter()
                        .enumerate()
                        .map(|(idx, (g, l))| {
                            let layout = l.ok_or_else(|| {
                                Error::Input(format!(
                                    "record {idx} has no layout; the equivalent transform \
                                     recomputes relations from boxes"
                                ))
                            })?;
                            let mut rng =
                                seed::rng(seed::derive(seed_val, "equivalent", idx as u64));
                            let g2 = semantic_equivalent_transform(
                                &g, &layout, &config, &f, &mut rng,
                            )?;
                            Ok((g2, Some(layout)))
                        })
                        .collect::<Result<_>>()?;
                    jsonl::write_graphs(&out, &transformed, &vocab)?;
                    println!("transformed {} scenes to {}", transformed.len(), out.display());
                }
                TransformKind::Noise => {
                    let path = vocab
                        .ok_or_else(|| Error::Input("kind noise requires --vocab".into()))?;
                    let vocab = RelationVocab::load(&path)?;
                    let items = jsonl::read_graphs(&input, &vocab)?;
                    let transformed: Vec<(SceneGraph, Option<Layout>)> = items
                        .into_iter()
                        .enumerate()
                        .map(|(idx, (g, l))| {
                            let mut rng = seed::rng(seed::derive(seed_val, "noise", idx as u64));
                            Ok((noise_transform(&g, fraction, &mut rng)?, l))
                        })
                        .collect::<Result<_>>()?;
                    jsonl::write_graphs(&out, &transformed, &vocab)?;
                    println!("transformed {} scenes to {}", transformed.len(), out.display());
                }
            }
            Ok(())
        }

        Command::Train { config, out_dir } => {
            let mut cfg: TrainConfig = serde_json::from_str(&std::fs::read_to_string(&config)?)?;
            if let Some(dir) = out_dir {
                cfg.out_dir = Some(dir);
            }
            let vocab_path = cfg
                .vocab_path
                .clone()
                .ok_or_else(|| Error::Input("config must set vocab_path".into()))?;
            let train_path = cfg
                .train_path
                .clone()
                .ok_or_else(|| Error::Input("config must set train_path".into()))?;
            let val_path = cfg
                .val_path
                .clone()
                .ok_or_else(|| Error::Input("config must set val_path".into()))?;
            let vocab = RelationVocab::load(&vocab_path)?;
            let train_set = load_labeled(&train_path, &vocab)?;
            let val_set = load_labeled(&val_path, &vocab)?;

            let out = train(&cfg, &vocab, &train_set, &val_set)?;
            let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("train-out"));
            std::fs::create_dir_all(&dir)?;
            write_report_csv(&dir.join("report.csv"), &out.report, &vocab)?;
            std::fs::write(
                dir.join("summary.json"),
                serde_json::to_string_pretty(&out.report)?,
            )?;
            save_checkpoint(
                &dir.join("checkpoint.json"),
                &Checkpoint::new(out.model, Some(out.canon_params)),
            )?;
            println!(
                "trained {} epochs; best val mIOU {:.4} at epoch {}; reports in {}",
                out.report.epochs_run,
                out.report.best_val_miou,
                out.report.best_epoch,
                dir.display()
            );
            if let Some(msg) = &out.report.nan_abort {
                eprintln!("warning: {msg}; checkpoint is the last good state");
            }
            Ok(())
        }

        Command::Eval { pred, gt, vocab } => {
            let vocab = RelationVocab::load(&vocab)?;
            let pred_layouts: Vec<Layout> =
                load_labeled(&pred, &vocab)?.into_iter().map(|(_, l)| l).collect();
            let gt_layouts: Vec<Layout> =
                load_labeled(&gt, &vocab)?.into_iter().map(|(_, l)| l).collect();
            let result = evaluate(&pred_layouts, &gt_layouts)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "miou": result.miou,
                    "r03": result.r03,
                    "r05": result.r05,
                    "n_objects": result.n_objects,
                }))?
            );
            Ok(())
        }

        Command::Experiment { spec, out_dir } => {
            let spec = ExperimentSpec::load(&spec)?;
            let dir = out_dir.unwrap_or_else(|| PathBuf::from(format!("{}-report", spec.name)));
            let report = run_experiment(&spec, &dir)?;
            println!(
                "experiment {}: {} grid cells, {} generalization rows, {} robustness rows, \
                 {} failures; reports in {}",
                report.name,
                report.grid.len(),
                report.generalization.len(),
                report.robustness.len(),
                report.failures.len(),
                dir.display()
            );
            for f in &report.failures {
                eprintln!("cell {} failed: {}", f.cell, f.error);
            }
            Ok(())
        }

        Command::Render { input, vocab, out_dir } => {
            let vocab = RelationVocab::load(&vocab)?;
            let items = jsonl::read_graphs(&input, &vocab)?;
            std::fs::create_dir_all(&out_dir)?;
            let mut written = 0usize;
            for (idx, (g, layout)) in items.iter().enumerate() {
                let Some(layout) = layout else { continue };
                let svg = rasterize(layout, g, &vocab)?;
                std::fs::write(out_dir.join(format!("scene_{idx:04}.svg")), svg)?;
                written += 1;
            }
            println!("rendered {written} scenes to {}", out_dir.display());
            Ok(())
        }
    }
}

fn load_params(path: Option<PathBuf>, vocab: &RelationVocab) -> Result<CanonParams> {
    let path = path.ok_or_else(|| Error::Input("wsgc modes require --params".into()))?;
    let params = CanonParams::load(&path)?;
    if params.n_relations() != vocab.n_relations() {
        return Err(Error::Shape(format!(
            "params cover {} relations, vocabulary has {}",
            params.n_relations(),
            vocab.n_relations()
        )));
    }
    Ok(params)
}

fn load_labeled(path: &std::path::Path, vocab: &RelationVocab) -> Result<Vec<(SceneGraph, Layout)>> {
    jsonl::read_graphs(path, vocab)?
        .into_iter()
        .enumerate()
        .map(|(idx, (g, l))| {
            let l = l.ok_or_else(|| {
                Error::Input(format!("record {idx} in {} has no boxes", path.display()))
            })?;
            Ok((g, l))
        })
        .collect()
}
