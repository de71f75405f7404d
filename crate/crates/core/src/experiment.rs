//! Experiment harness: grids over (mode x layer count x object count),
//! generalization sweeps to larger scenes, and robustness protocols
//! (semantically equivalent and noisy graphs), with CSV/SVG reporting.

use std::path::Path;
#[cfg(test)]
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{line_chart, Series};
use crate::data::{
    noise_transform, semantic_equivalent_transform, synth_generate, ObjectCount, SynthConfig,
};
use crate::error::{Error, Result};
use crate::eval::EvalResult;
use crate::graph::{Layout, SceneGraph};
use crate::neural::{save_checkpoint, Checkpoint, GcnDims};
use crate::seed;
use crate::train::{evaluate_pipeline, train, write_report_csv, Mode, TrainConfig, TrainOutput};

fn default_epochs() -> usize {
    60
}
fn default_batch() -> usize {
    16
}
fn default_lr_canon() -> f64 {
    1e-2
}
fn default_lr_gcn() -> f64 {
    1e-4
}
fn default_patience() -> usize {
    10
}
fn default_counts() -> DatasetCounts {
    DatasetCounts { train: 200, val: 50, test: 50 }
}
fn default_noise() -> f64 {
    0.10
}

/// Training hyperparameters shared by every cell; the GCN layer count
/// comes from the grid axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellTrain {
    pub embed_dim: usize,
    pub mlp_hidden: usize,
    pub box_hidden: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr_canon")]
    pub lr_canon: f64,
    #[serde(default = "default_lr_gcn")]
    pub lr_gcn: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub reinforce_baseline: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub modes: Vec<Mode>,
    pub layers: Vec<usize>,
    pub objects: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneralizationSpec {
    pub modes: Vec<Mode>,
    pub layers: usize,
    pub train_objects: usize,
    pub eval_objects: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessSpec {
    pub modes: Vec<Mode>,
    pub layers: usize,
    pub objects: usize,
    #[serde(default = "default_noise")]
    pub noise_fraction: f64,
}

/// A committed, reproducible experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub synth: SynthConfig,
    pub train: CellTrain,
    #[serde(default = "default_counts")]
    pub counts: DatasetCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generalization: Option<GeneralizationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessSpec>,
    /// Concurrent grid cells; 0 = rayon default.
    #[serde(default)]
    pub workers: usize,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: ExperimentSpec = serde_json::from_str(&text)?;
        spec.synth.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub cell: String,
    pub mode: Mode,
    pub layers: usize,
    pub objects: usize,
    pub miou: f64,
    pub r03: f64,
    pub r05: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneralizationRow {
    pub mode: Mode,
    pub layers: usize,
    pub train_objects: usize,
    pub eval_objects: usize,
    pub miou: f64,
    pub r03: f64,
    pub r05: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessRow {
    pub mode: Mode,
    pub layers: usize,
    pub objects: usize,
    pub protocol: String,
    pub miou: f64,
    pub r03: f64,
    pub r05: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellFailure {
    pub cell: String,
    pub error: String,
}

/// Aggregated outputs of [`run_experiment`]; also written to disk.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub grid: Vec<CellResult>,
    pub generalization: Vec<GeneralizationRow>,
    pub robustness: Vec<RobustnessRow>,
    pub failures: Vec<CellFailure>,
}

fn cell_config(spec: &ExperimentSpec, mode: Mode, layers: usize, cell_seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::new(mode);
    cfg.dims = GcnDims {
        embed_dim: spec.train.embed_dim,
        n_layers: layers,
        mlp_hidden: spec.train.mlp_hidden,
        box_hidden: spec.train.box_hidden,
    };
    cfg.epochs = spec.train.epochs;
    cfg.batch_size = spec.train.batch_size;
    cfg.lr_canon = spec.train.lr_canon;
    cfg.lr_gcn = spec.train.lr_gcn;
    cfg.patience = spec.train.patience;
    cfg.reinforce_baseline = spec.train.reinforce_baseline;
    cfg.seed = cell_seed;
    if mode == Mode::SgcKnown {
        let vocab = spec.synth.vocab();
        cfg.formulas =
            Some(spec.synth.formula_set().to_names(&vocab).expect("static names"));
    }
    cfg
}

fn gen_split(
    spec: &ExperimentSpec,
    objects: usize,
    count: usize,
    tag: &str,
) -> Result<Vec<(SceneGraph, Layout)>> {
    let mut synth = spec.synth.clone();
    synth.n_objects = ObjectCount::Fixed(objects);
    synth.seed = seed::derive(spec.seed, tag, objects as u64);
    synth_generate(&synth, count)
}

/// Train one cell and evaluate it on a fresh test split.
fn run_cell(
    spec: &ExperimentSpec,
    mode: Mode,
    layers: usize,
    objects: usize,
    out_dir: &Path,
) -> Result<(CellResult, TrainOutput)> {
    let cell = format!("{}_L{layers}_n{objects}", mode_name(mode));
    let vocab = spec.synth.vocab();
    let train_set = gen_split(spec, objects, spec.counts.train, "train")?;
    let val_set = gen_split(spec, objects, spec.counts.val, "val")?;
    let test_set = gen_split(spec, objects, spec.counts.test, "test")?;

    let cfg = cell_config(spec, mode, layers, seed::derive(spec.seed, &cell, 0));
    let out = train(&cfg, &vocab, &train_set, &val_set)?;

    let formulas = spec.synth.formula_set();
    let test_eval = evaluate_pipeline(
        mode,
        &out.model,
        &out.canon_params,
        Some(&formulas),
        cfg.prune_epsilon,
        &test_set,
        seed::derive(spec.seed, "test-eval", 0),
    )?;

    let cell_dir = out_dir.join("cells").join(&cell);
    std::fs::create_dir_all(&cell_dir)?;
    write_report_csv(&cell_dir.join("trajectory.csv"), &out.report, &vocab)?;
    save_checkpoint(
        &cell_dir.join("checkpoint.json"),
        &Checkpoint::new(out.model.clone(), Some(out.canon_params.clone())),
    )?;
    std::fs::write(
        cell_dir.join("metrics.json"),
        serde_json::to_string_pretty(&test_eval_summary(&test_eval))?,
    )?;

    let result = CellResult {
        cell,
        mode,
        layers,
        objects,
        miou: test_eval.miou,
        r03: test_eval.r03,
        r05: test_eval.r05,
        final_loss: out.report.train_loss.last().copied().unwrap_or(f64::NAN),
    };
    Ok((result, out))
}

fn test_eval_summary(e: &EvalResult) -> serde_json::Value {
    serde_json::json!({
        "miou": e.miou,
        "r03": e.r03,
        "r05": e.r05,
        "n_objects": e.n_objects,
    })
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Baseline => "baseline",
        Mode::SgcKnown => "sgc-known",
        Mode::WsgcS => "wsgc-s",
        Mode::WsgcE => "wsgc-e",
    }
}

/// Execute an experiment spec, writing all reports under `out_dir`.
/// Individual cell failures are recorded and do not stop other cells.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<ExperimentReport> {
    std::fs::create_dir_all(out_dir)?;
    let run = || run_experiment_inner(spec, out_dir);
    if spec.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::Input(format!("worker pool: {e}")))?;
        pool.install(run)
    } else {
        run()
    }
}

fn run_experiment_inner(spec: &ExperimentSpec, out_dir: &Path) -> Result<ExperimentReport> {
    let mut report = ExperimentReport {
        name: spec.name.clone(),
        grid: Vec::new(),
        generalization: Vec::new(),
        robustness: Vec::new(),
        failures: Vec::new(),
    };

    // ------------------------------------------------------------ grid
    if let Some(grid) = &spec.grid {
        let cells: Vec<(Mode, usize, usize)> = grid
            .modes
            .iter()
            .flat_map(|&m| {
                grid.layers
                    .iter()
                    .flat_map(move |&l| grid.objects.iter().map(move |&n| (m, l, n)))
            })
            .collect();
        let outcomes: Vec<_> = cells
            .par_iter()
            .map(|&(m, l, n)| ((m, l, n), run_cell(spec, m, l, n, out_dir)))
            .collect();
        for ((m, l, n), outcome) in outcomes {
            match outcome {
                Ok((cell, _)) => report.grid.push(cell),
                Err(e) => report.failures.push(CellFailure {
                    cell: format!("{}_L{l}_n{n}", mode_name(m)),
                    error: e.to_string(),
                }),
            }
        }
        write_grid_csv(&out_dir.join("grid.csv"), &report.grid)?;
        write_grid_chart(out_dir, &report.grid)?;
    }

    // ------------------------------------------------- generalization
    if let Some(gen) = &spec.generalization {
        let formulas = spec.synth.formula_set();
        let outcomes: Vec<_> = gen
            .modes
            .par_iter()
            .map(|&mode| {
                let trained = run_cell(spec, mode, gen.layers, gen.train_objects, out_dir)?;
                let mut rows = Vec::new();
                for &n_eval in &gen.eval_objects {
                    let test_set = gen_split(spec, n_eval, spec.counts.test, "gen-test")?;
                    let eval = evaluate_pipeline(
                        mode,
                        &trained.1.model,
                        &trained.1.canon_params,
                        Some(&formulas),
                        DEFAULT_PRUNE,
                        &test_set,
                        seed::derive(spec.seed, "gen-eval", n_eval as u64),
                    )?;
                    rows.push(GeneralizationRow {
                        mode,
                        layers: gen.layers,
                        train_objects: gen.train_objects,
                        eval_objects: n_eval,
                        miou: eval.miou,
                        r03: eval.r03,
                        r05: eval.r05,
                    });
                }
                Ok::<_, Error>(rows)
            })
            .collect();
        for (mode, outcome) in gen.modes.iter().zip(outcomes) {
            match outcome {
                Ok(rows) => report.generalization.extend(rows),
                Err(e) => report.failures.push(CellFailure {
                    cell: format!("generalization_{}", mode_name(*mode)),
                    error: e.to_string(),
                }),
            }
        }
        write_generalization_csv(&out_dir.join("generalization.csv"), &report.generalization)?;
        write_generalization_chart(out_dir, &report.generalization)?;
    }

    // ----------------------------------------------------- robustness
    if let Some(rob) = &spec.robustness {
        let formulas = spec.synth.formula_set();
        let outcomes: Vec<_> = rob
            .modes
            .par_iter()
            .map(|&mode| {
                let trained = run_cell(spec, mode, rob.layers, rob.objects, out_dir)?;
                let test_set = gen_split(spec, rob.objects, spec.counts.test, "rob-test")?;

                let equivalent: Vec<(SceneGraph, Layout)> = test_set
                    .iter()
                    .enumerate()
                    .map(|(i, (g, l))| {
                        let mut rng =
                            seed::rng(seed::derive(spec.seed, "rob-equivalent", i as u64));
                        Ok((
                            semantic_equivalent_transform(g, l, &spec.synth, &formulas, &mut rng)?,
                            l.clone(),
                        ))
                    })
                    .collect::<Result<_>>()?;
                let noisy: Vec<(SceneGraph, Layout)> = test_set
                    .iter()
                    .enumerate()
                    .map(|(i, (g, l))| {
                        let mut rng = seed::rng(seed::derive(spec.seed, "rob-noise", i as u64));
                        Ok((noise_transform(g, rob.noise_fraction, &mut rng)?, l.clone()))
                    })
                    .collect::<Result<_>>()?;

                let mut rows = Vec::new();
                for (protocol, data) in
                    [("clean", &test_set), ("equivalent", &equivalent), ("noisy", &noisy)]
                {
                    let eval = evaluate_pipeline(
                        mode,
                        &trained.1.model,
                        &trained.1.canon_params,
                        Some(&formulas),
                        DEFAULT_PRUNE,
                        data,
                        seed::derive(spec.seed, "rob-eval", 0),
                    )?;
                    rows.push(RobustnessRow {
                        mode,
                        layers: rob.layers,
                        objects: rob.objects,
                        protocol: protocol.to_string(),
                        miou: eval.miou,
                        r03: eval.r03,
                        r05: eval.r05,
                    });
                }
                Ok::<_, Error>(rows)
            })
            .collect();
        for (mode, outcome) in rob.modes.iter().zip(outcomes) {
            match outcome {
                Ok(rows) => report.robustness.extend(rows),
                Err(e) => report.failures.push(CellFailure {
                    cell: format!("robustness_{}", mode_name(*mode)),
                    error: e.to_string(),
                }),
            }
        }
        write_robustness_csv(&out_dir.join("robustness.csv"), &report.robustness)?;
    }

    std::fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

const DEFAULT_PRUNE: f64 = crate::canon::DEFAULT_PRUNE_EPSILON;

fn write_grid_csv(path: &Path, rows: &[CellResult]) -> Result<()> {
    let mut out = String::from("mode,layers,objects,miou,r03,r05,final_loss\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            mode_name(r.mode),
            r.layers,
            r.objects,
            r.miou,
            r.r03,
            r.r05,
            r.final_loss
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_generalization_csv(path: &Path, rows: &[GeneralizationRow]) -> Result<()> {
    let mut out = String::from("mode,layers,train_objects,eval_objects,miou,r03,r05\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            mode_name(r.mode),
            r.layers,
            r.train_objects,
            r.eval_objects,
            r.miou,
            r.r03,
            r.r05
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_robustness_csv(path: &Path, rows: &[RobustnessRow]) -> Result<()> {
    let mut out = String::from("mode,layers,objects,protocol,miou,r03,r05\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            mode_name(r.mode),
            r.layers,
            r.objects,
            r.protocol,
            r.miou,
            r.r03,
            r.r05
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_grid_chart(out_dir: &Path, rows: &[CellResult]) -> Result<()> {
    let mut keys: Vec<(Mode, usize)> = rows.iter().map(|r| (r.mode, r.layers)).collect();
    keys.sort_by_key(|&(m, l)| (mode_name(m), l));
    keys.dedup();
    let series: Vec<Series> = keys
        .iter()
        .map(|&(m, l)| {
            let mut pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.mode == m && r.layers == l)
                .map(|r| (r.objects as f64, r.miou))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { name: format!("{} L{l}", mode_name(m)), points: pts }
        })
        .collect();
    let svg = line_chart("test mIOU vs object count", "objects", "mIOU", &series);
    std::fs::write(out_dir.join("grid_miou.svg"), svg)?;
    Ok(())
}

fn write_generalization_chart(out_dir: &Path, rows: &[GeneralizationRow]) -> Result<()> {
    let mut modes: Vec<Mode> = rows.iter().map(|r| r.mode).collect();
    modes.sort_by_key(|&m| mode_name(m));
    modes.dedup();
    let series: Vec<Series> = modes
        .iter()
        .map(|&m| {
            let mut pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.mode == m)
                .map(|r| (r.eval_objects as f64, r.miou))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { name: mode_name(m).to_string(), points: pts }
        })
        .collect();
    let svg = line_chart("generalization: mIOU vs eval objects", "objects", "mIOU", &series);
    std::fs::write(out_dir.join("generalization_miou.svg"), svg)?;
    Ok(())
}
