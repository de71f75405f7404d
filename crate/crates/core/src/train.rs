//! End-to-end training of the canonicalization + layout pipeline.
//!
//! Per step: canonicalize (mode-dependent), run the weighted GCN, take the
//! L1 layout loss, backpropagate. The GCN stack and the canonicalization
//! parameters use separate Adam optimizers; converse logits receive the
//! score-function (REINFORCE) gradient under the sampling mode and the
//! max-path subgradient under the exact mode, while transitivity logits
//! always flow pathwise through completed-edge weights.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canon::{
    sgc, sigmoid_prime, subgrad_wsgc_e, wsgc_e, wsgc_s, CanonGrads, CanonParams, FormulaSet,
    FormulaSetFile, SampleRecord, DEFAULT_PRUNE_EPSILON,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalResult};
use crate::graph::{Layout, SceneGraph, WeightedSceneGraph};
use crate::neural::{
    adam_step, gcn_backward, gcn_forward, AdamConfig, AdamState, GcnDims, GcnModel,
};
use crate::seed;
use crate::vocab::RelationVocab;

/// Canonicalization mode of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// No completion: the input graph goes straight to the GCN.
    #[serde(rename = "baseline")]
    Baseline,
    /// Exact canonicalization with a fixed, known formula set.
    #[serde(rename = "sgc-known")]
    SgcKnown,
    /// Sampling-based weighted canonicalization with learned parameters.
    #[serde(rename = "wsgc-s")]
    WsgcS,
    /// Exact weighted canonicalization with learned parameters.
    #[serde(rename = "wsgc-e")]
    WsgcE,
}

impl Mode {
    pub fn learns_canon_params(self) -> bool {
        matches!(self, Mode::WsgcS | Mode::WsgcE)
    }
}

fn default_epochs() -> usize {
    200
}
fn default_batch() -> usize {
    32
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
fn default_prune() -> f64 {
    DEFAULT_PRUNE_EPSILON
}

/// Full training configuration; serialized as the `train --config` file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    /// Required for `sgc-known`; ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formulas: Option<FormulaSetFile>,
    #[serde(default)]
    pub dims: GcnDims,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr_canon")]
    pub lr_canon: f64,
    #[serde(default = "default_lr_gcn")]
    pub lr_gcn: f64,
    #[serde(default)]
    pub seed: u64,
    /// Optional variance-reduction baseline (running mean of the reward).
    #[serde(default)]
    pub reinforce_baseline: bool,
    /// Early stopping on validation mIOU; 0 disables.
    #[serde(default = "default_patience")]
    pub patience: usize,
    /// Completion pruning threshold for the exact weighted mode.
    #[serde(default = "default_prune")]
    pub prune_epsilon: f64,
    /// Dataset paths, used by the CLI entry point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl TrainConfig {
    pub fn new(mode: Mode) -> Self {
        TrainConfig {
            mode,
            formulas: None,
            dims: GcnDims::default(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            lr_canon: default_lr_canon(),
            lr_gcn: default_lr_gcn(),
            seed: 0,
            reinforce_baseline: false,
            patience: default_patience(),
            prune_epsilon: default_prune(),
            vocab_path: None,
            train_path: None,
            val_path: None,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr_canon <= 0.0 || self.lr_gcn <= 0.0 {
            return Err(Error::Input("learning rates must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Input("epochs and batch size must be positive".into()));
        }
        if self.mode == Mode::SgcKnown && self.formulas.is_none() {
            return Err(Error::Input("mode sgc-known requires a formula set".into()));
        }
        Ok(())
    }
}

/// Per-epoch training trajectory, including the canonicalization
/// probability curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    pub val_miou: Vec<f64>,
    pub val_r03: Vec<f64>,
    pub val_r05: Vec<f64>,
    /// Per epoch: `p_trans` per relation.
    pub p_trans_traj: Vec<Vec<f64>>,
    /// Per epoch: full `p_conv` matrix, |R| rows of |R| + 1 entries.
    pub p_conv_traj: Vec<Vec<Vec<f64>>>,
    pub best_epoch: usize,
    pub best_val_miou: f64,
    /// Set when training stopped on a non-finite loss; the returned model
    /// is the last good checkpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nan_abort: Option<String>,
}

/// Trained pipeline state.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: GcnModel,
    pub canon_params: CanonParams,
    pub report: TrainReport,
}

/// Mean absolute difference over all `4 n` box coordinates.
pub fn l1_loss(pred: &Layout, gt: &Layout) -> Result<f64> {
    if pred.n_boxes() != gt.n_boxes() {
        return Err(Error::Shape(format!(
            "{} predicted boxes vs {} ground-truth boxes",
            pred.n_boxes(),
            gt.n_boxes()
        )));
    }
    let n = pred.n_boxes() * 4;
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = pred
        .boxes()
        .iter()
        .zip(gt.boxes())
        .map(|(p, g)| p.iter().zip(g).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .sum();
    Ok(sum / n as f64)
}

/// Gradient of [`l1_loss`] with respect to the predicted boxes.
fn l1_grad(pred: &Layout, gt: &Layout) -> Vec<[f64; 4]> {
    let n = (pred.n_boxes() * 4).max(1) as f64;
    pred.boxes()
        .iter()
        .zip(gt.boxes())
        .map(|(p, g)| {
            std::array::from_fn(|k| {
                let d = p[k] - g[k];
                if d > 0.0 {
                    1.0 / n
                } else if d < 0.0 {
                    -1.0 / n
                } else {
                    0.0
                }
            })
        })
        .collect()
}

/// Score-function gradient on the converse logits for one sampled graph:
/// `reward * sum_e grad log p(Z_e | r(e))`, with symmetry tying applied.
/// An empty sample yields a zero gradient.
pub fn reinforce_grad(sample: &SampleRecord, reward: f64) -> CanonGrads {
    let n_rel = sample.conv_probs.len();
    let mut grads = CanonGrads::zeros(n_rel);
    for draw in &sample.draws {
        let row = &sample.conv_probs[draw.edge.relation];
        let g = &mut grads.theta_conv[draw.edge.relation];
        for (m, &p) in row.iter().enumerate() {
            let delta = if m == draw.z { 1.0 } else { 0.0 };
            g[m] += reward * (delta - p);
        }
    }
    grads.tie_symmetric();
    grads
}

/// One graph's contribution to a step.
struct GraphStep {
    loss: f64,
    gcn_grads: GcnModel,
    canon_grads: CanonGrads,
}

#[allow(clippy::too_many_arguments)]
fn step_graph(
    mode: Mode,
    g: &SceneGraph,
    prepared: Option<&WeightedSceneGraph>,
    gt: &Layout,
    model: &GcnModel,
    params: &CanonParams,
    prune_epsilon: f64,
    sample_seed: u64,
    reward_baseline: f64,
) -> Result<GraphStep> {
    let n_rel = params.n_relations();
    match mode {
        Mode::Baseline | Mode::SgcKnown => {
            let wg = prepared.expect("prepared graphs for deterministic modes");
            let (layout, tape) = gcn_forward(wg, model)?;
            let loss = l1_loss(&layout, gt)?;
            let (gcn_grads, _) = gcn_backward(model, &tape, &l1_grad(&layout, gt))?;
            Ok(GraphStep { loss, gcn_grads, canon_grads: CanonGrads::zeros(n_rel) })
        }
        Mode::WsgcS => {
            let mut rng = seed::rng(sample_seed);
            let (wg, record) = wsgc_s(g, params, &mut rng)?;
            let (layout, tape) = gcn_forward(&wg, model)?;
            let loss = l1_loss(&layout, gt)?;
            let (gcn_grads, d_weights) = gcn_backward(model, &tape, &l1_grad(&layout, gt))?;
            // REINFORCE on the converse logits
            let mut canon_grads = reinforce_grad(&record, loss - reward_baseline);
            // pathwise on the transitivity logits through completed weights
            for key in &record.transitive_added {
                let idx = tape
                    .edges
                    .binary_search_by(|(e, _)| e.cmp(key))
                    .map_err(|_| Error::Consistency("completed edge missing from tape".into()))?;
                canon_grads.theta_trans[key.relation] +=
                    d_weights[idx] * sigmoid_prime(params.theta_trans[key.relation]);
            }
            Ok(GraphStep { loss, gcn_grads, canon_grads })
        }
        Mode::WsgcE => {
            let (wg, trace) = wsgc_e(g, params, prune_epsilon)?;
            let (layout, tape) = gcn_forward(&wg, model)?;
            let loss = l1_loss(&layout, gt)?;
            let (gcn_grads, d_weights) = gcn_backward(model, &tape, &l1_grad(&layout, gt))?;
            let canon_grads = subgrad_wsgc_e(&trace, params, &d_weights)?;
            Ok(GraphStep { loss, gcn_grads, canon_grads })
        }
    }
}

/// Canonicalize one graph for evaluation under the given mode.
pub fn canonicalize_for_eval(
    mode: Mode,
    g: &SceneGraph,
    params: &CanonParams,
    formulas: Option<&FormulaSet>,
    prune_epsilon: f64,
    sample_seed: u64,
) -> Result<WeightedSceneGraph> {
    match mode {
        Mode::Baseline => Ok(WeightedSceneGraph::from_unweighted(g)),
        Mode::SgcKnown => {
            let f = formulas.ok_or_else(|| Error::Input("sgc-known needs formulas".into()))?;
            Ok(WeightedSceneGraph::from_unweighted(&sgc(g, f)?))
        }
        Mode::WsgcS => {
            let mut rng = seed::rng(sample_seed);
            Ok(wsgc_s(g, params, &mut rng)?.0)
        }
        Mode::WsgcE => Ok(wsgc_e(g, params, prune_epsilon)?.0),
    }
}

/// Predict layouts for a dataset with a trained pipeline and score them
/// against the ground truth.
pub fn evaluate_pipeline(
    mode: Mode,
    model: &GcnModel,
    params: &CanonParams,
    formulas: Option<&FormulaSet>,
    prune_epsilon: f64,
    data: &[(SceneGraph, Layout)],
    eval_seed: u64,
) -> Result<EvalResult> {
    let preds: Vec<Layout> = data
        .par_iter()
        .enumerate()
        .map(|(idx, (g, _))| {
            let wg = canonicalize_for_eval(
                mode,
                g,
                params,
                formulas,
                prune_epsilon,
                seed::derive(eval_seed, "eval-sample", idx as u64),
            )?;
            Ok(gcn_forward(&wg, model)?.0)
        })
        .collect::<Result<_>>()?;
    let gts: Vec<Layout> = data.iter().map(|(_, l)| l.clone()).collect();
    evaluate(&preds, &gts)
}

/// Train the pipeline. Fully deterministic for a fixed config and seed.
///
/// Returns the best-validation checkpoint (falling back to the last state
/// when validation never improves). A non-finite loss aborts cleanly: the
/// report carries the diagnostic and the last good checkpoint is returned.
pub fn train(
    config: &TrainConfig,
    vocab: &RelationVocab,
    train_set: &[(SceneGraph, Layout)],
    val_set: &[(SceneGraph, Layout)],
) -> Result<TrainOutput> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Input("train and validation sets must be non-empty".into()));
    }
    for (idx, (g, l)) in train_set.iter().chain(val_set).enumerate() {
        l.check_matches(g.n_nodes())
            .map_err(|e| Error::Input(format!("dataset record {idx}: {e}")))?;
    }

    let n_rel = vocab.n_relations();
    let formulas = match &config.formulas {
        Some(file) => Some(FormulaSet::from_names(file, vocab)?),
        None => None,
    };

    let mut model = GcnModel::new(
        vocab.n_categories(),
        n_rel,
        config.dims,
        seed::derive(config.seed, "model-init", 0),
    );
    let mut params = CanonParams::init(n_rel);

    // Deterministic modes canonicalize once up front.
    let prepared: Option<Vec<WeightedSceneGraph>> = match config.mode {
        Mode::Baseline => Some(
            train_set.iter().map(|(g, _)| WeightedSceneGraph::from_unweighted(g)).collect(),
        ),
        Mode::SgcKnown => {
            let f = formulas.as_ref().expect("validated above");
            Some(
                train_set
                    .iter()
                    .map(|(g, _)| Ok(WeightedSceneGraph::from_unweighted(&sgc(g, f)?)))
                    .collect::<Result<_>>()?,
            )
        }
        _ => None,
    };

    let mut gcn_state = AdamState::for_tensors(&model.tensors());
    let mut canon_state = AdamState::for_tensors(&params.tensors());
    let gcn_cfg = AdamConfig::with_lr(config.lr_gcn);
    let canon_cfg = AdamConfig::with_lr(config.lr_canon);

    let mut report = TrainReport {
        epochs_run: 0,
        train_loss: Vec::new(),
        val_miou: Vec::new(),
        val_r03: Vec::new(),
        val_r05: Vec::new(),
        p_trans_traj: Vec::new(),
        p_conv_traj: Vec::new(),
        best_epoch: 0,
        best_val_miou: f64::NEG_INFINITY,
        nan_abort: None,
    };
    let mut best: Option<(GcnModel, CanonParams)> = None;
    let mut reward_mean = 0.0;
    let mut reward_count = 0u64;

    'epochs: for epoch in 0..config.epochs {
        // deterministic shuffle
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut shuffle_rng = seed::rng(seed::derive(config.seed, "shuffle", epoch as u64));
        shuffle(&mut order, &mut shuffle_rng);

        let mut epoch_loss = 0.0;
        let mut epoch_batches = 0usize;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let baseline_value = if config.reinforce_baseline && reward_count > 0 {
                reward_mean
            } else {
                0.0
            };
            let steps: Vec<Result<GraphStep>> = batch
                .par_iter()
                .map(|&idx| {
                    let (g, gt) = &train_set[idx];
                    step_graph(
                        config.mode,
                        g,
                        prepared.as_ref().map(|p| &p[idx]),
                        gt,
                        &model,
                        &params,
                        config.prune_epsilon,
                        seed::derive(
                            config.seed,
                            "sample",
                            (epoch as u64) << 32 | idx as u64,
                        ),
                        baseline_value,
                    )
                })
                .collect();

            // fixed-order reduction keeps training bit-deterministic
            let mut batch_loss = 0.0;
            let mut gcn_grads = model.zeros_like();
            let mut canon_grads = CanonGrads::zeros(n_rel);
            for step in steps {
                let step = step?;
                batch_loss += step.loss;
                gcn_grads.add_assign(&step.gcn_grads);
                canon_grads.add(&step.canon_grads);
            }
            let scale = 1.0 / batch.len() as f64;
            batch_loss *= scale;
            gcn_grads.scale(scale);
            canon_grads.scale(scale);

            if !batch_loss.is_finite() {
                report.nan_abort = Some(format!(
                    "non-finite loss {batch_loss} at epoch {epoch}, batch {batch_no}"
                ));
                break 'epochs;
            }
            if config.mode == Mode::WsgcS && config.reinforce_baseline {
                reward_count += 1;
                reward_mean += (batch_loss - reward_mean) / reward_count as f64;
            }

            let step_result = (|| -> Result<()> {
                {
                    let mut tensors = model.tensors_mut();
                    let grad_tensors = gcn_grads.tensors();
                    adam_step(&mut tensors, &grad_tensors, &mut gcn_state, &gcn_cfg)?;
                }
                if config.mode.learns_canon_params() {
                    let mut tensors = params.tensors_mut();
                    let grad_refs: Vec<&[f64]> = std::iter::once(canon_grads.theta_trans.as_slice())
                        .chain(canon_grads.theta_conv.iter().map(|r| r.as_slice()))
                        .collect();
                    adam_step(&mut tensors, &grad_refs, &mut canon_state, &canon_cfg)?;
                }
                Ok(())
            })();
            if let Err(Error::Train(msg)) = step_result {
                report.nan_abort = Some(msg);
                break 'epochs;
            }
            step_result?;
            params.resymmetrize();

            epoch_loss += batch_loss;
            epoch_batches += 1;
        }

        let val = evaluate_pipeline(
            config.mode,
            &model,
            &params,
            formulas.as_ref(),
            config.prune_epsilon,
            val_set,
            seed::derive(config.seed, "val", epoch as u64),
        )?;

        report.epochs_run += 1;
        report.train_loss.push(epoch_loss / epoch_batches.max(1) as f64);
        report.val_miou.push(val.miou);
        report.val_r03.push(val.r03);
        report.val_r05.push(val.r05);
        report
            .p_trans_traj
            .push((0..n_rel).map(|r| params.p_trans(r)).collect::<Result<_>>()?);
        report
            .p_conv_traj
            .push((0..n_rel).map(|r| params.p_conv(r)).collect::<Result<_>>()?);

        if val.miou > report.best_val_miou {
            report.best_val_miou = val.miou;
            report.best_epoch = epoch;
            best = Some((model.clone(), params.clone()));
        } else if config.patience > 0 && epoch - report.best_epoch >= config.patience {
            break;
        }
    }

    let (model, params) = best.unwrap_or((model, params));
    Ok(TrainOutput { model, canon_params: params, report })
}

/// Fisher-Yates with the crate's portable RNG.
fn shuffle(order: &mut [usize], rng: &mut impl rand::Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

/// Write the per-epoch report as CSV: metrics first, then one column per
/// `p_trans` entry and per named `p_conv` entry.
pub fn write_report_csv(
    path: &std::path::Path,
    report: &TrainReport,
    vocab: &RelationVocab,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("epoch,loss,miou,r03,r05");
    for r in &vocab.relations {
        out.push_str(&format!(",p_trans_{r}"));
    }
    for r in &vocab.relations {
        for c in vocab.relations.iter().map(String::as_str).chain(["phi"]) {
            out.push_str(&format!(",p_conv_{r}_{c}"));
        }
    }
    out.push('\n');
    for e in 0..report.epochs_run {
        out.push_str(&format!(
            "{e},{},{},{},{}",
            report.train_loss[e], report.val_miou[e], report.val_r03[e], report.val_r05[e]
        ));
        for v in &report.p_trans_traj[e] {
            out.push_str(&format!(",{v}"));
        }
        for row in &report.p_conv_traj[e] {
            for v in row {
                out.push_str(&format!(",{v}"));
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
