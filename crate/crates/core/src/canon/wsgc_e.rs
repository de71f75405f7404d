//! Exact weighted scene-graph canonicalization.
//!
//! Converse completion adds every reversed edge candidate with its converse
//! probability; transitive completion adds, per relation, the best
//! path-product weight times the transitivity probability. The forward pass
//! retains the maximizing path per completed edge so the subgradient can be
//! taken at that maximizer.

use std::collections::BTreeMap;

use crate::canon::params::{sigmoid_prime, CanonGrads, CanonParams};
use crate::canon::paths::max_product_paths;
use crate::error::{Error, Result};
use crate::graph::{EdgeKey, SceneGraph, WeightedDigraph, WeightedSceneGraph};

/// How one output edge of the exact weighted canonicalization came to be.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeProvenance {
    /// User-provided edge, weight 1, carries no gradient.
    Original,
    /// Reversal of an input edge with relation `source_relation`; weight is
    /// `p_conv(target | source_relation)`.
    Converse { source_relation: usize },
    /// Completed along the stored maximizing path; weight is
    /// `p_trans(relation) * prod(path weights)`.
    Transitive { path: Vec<PathStep> },
}

/// One arc of a stored maximizing path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
    /// `None` for original weight-1 arcs; `Some(r_src)` when the arc was
    /// converse-completed from an input edge with relation `r_src`.
    pub converse_source: Option<usize>,
}

/// Forward record of [`wsgc_e`]: completed edges in output order with their
/// provenance, plus a snapshot of the parameters the pass was taken at.
#[derive(Debug, Clone)]
pub struct WsgcETrace {
    params: CanonParams,
    edges: Vec<(EdgeKey, f64, EdgeProvenance)>,
}

impl WsgcETrace {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(EdgeKey, f64, EdgeProvenance)] {
        &self.edges
    }
}

/// Exact weighted canonicalization of an unweighted input graph.
///
/// Completions with weight at or below `epsilon` are pruned to bound
/// fill-in. When an added edge collides with an existing key the larger
/// weight wins; original edges are never downgraded.
pub fn wsgc_e(
    g: &SceneGraph,
    params: &CanonParams,
    epsilon: f64,
) -> Result<(WeightedSceneGraph, WsgcETrace)> {
    params.validate()?;
    let n_rel = g.n_relations();
    if params.n_relations() != n_rel {
        return Err(Error::Shape(format!(
            "params cover {} relations, graph uses {n_rel}",
            params.n_relations()
        )));
    }

    let conv_rows: Vec<Vec<f64>> =
        (0..n_rel).map(|r| params.p_conv(r)).collect::<Result<_>>()?;
    let trans_probs: Vec<f64> =
        (0..n_rel).map(|r| params.p_trans(r)).collect::<Result<_>>()?;

    let mut edges: BTreeMap<EdgeKey, (f64, EdgeProvenance)> = g
        .edges()
        .map(|&e| (e, (1.0, EdgeProvenance::Original)))
        .collect();

    // Converse completion over the original edges.
    for e in g.edges() {
        let row = &conv_rows[e.relation];
        for (target, &w) in row.iter().enumerate().take(n_rel) {
            if w <= epsilon || w <= 0.0 {
                continue;
            }
            let key = EdgeKey::new(e.object, target, e.subject);
            match edges.get(&key) {
                Some((existing, _)) if *existing >= w => {}
                _ => {
                    edges.insert(
                        key,
                        (w, EdgeProvenance::Converse { source_relation: e.relation }),
                    );
                }
            }
        }
    }

    // Transitive completion per relation over its own weighted subgraph.
    let mut completed: Vec<(EdgeKey, (f64, EdgeProvenance))> = Vec::new();
    for r in 0..n_rel {
        let p_t = trans_probs[r];
        if p_t <= epsilon || p_t <= 0.0 {
            continue;
        }
        let arcs: BTreeMap<(usize, usize), f64> = edges
            .iter()
            .filter(|(e, _)| e.relation == r)
            .map(|(e, (w, _))| ((e.subject, e.object), *w))
            .collect();
        if arcs.is_empty() {
            continue;
        }
        let sub = WeightedDigraph { n: g.n_nodes(), arcs };
        let table = max_product_paths(&sub)?;
        for i in 0..g.n_nodes() {
            for j in 0..g.n_nodes() {
                if i == j || edges.contains_key(&EdgeKey::new(i, r, j)) {
                    continue;
                }
                let Some(path) = table.path(i, j) else { continue };
                let steps: Vec<PathStep> = path
                    .iter()
                    .map(|&(a, b)| {
                        let (w, prov) = &edges[&EdgeKey::new(a, r, b)];
                        PathStep {
                            from: a,
                            to: b,
                            weight: *w,
                            converse_source: match prov {
                                EdgeProvenance::Converse { source_relation } => {
                                    Some(*source_relation)
                                }
                                _ => None,
                            },
                        }
                    })
                    .collect();
                let product: f64 = steps.iter().map(|s| s.weight).product();
                let w = p_t * product;
                if w > epsilon && w > 0.0 {
                    completed.push((
                        EdgeKey::new(i, r, j),
                        (w, EdgeProvenance::Transitive { path: steps }),
                    ));
                }
            }
        }
    }
    edges.extend(completed);

    let trace_edges: Vec<(EdgeKey, f64, EdgeProvenance)> = edges
        .iter()
        .map(|(e, (w, p))| (*e, *w, p.clone()))
        .collect();
    let out = WeightedSceneGraph::new(
        g.objects().to_vec(),
        edges.into_iter().map(|(e, (w, _))| (e, w)),
        (g.n_nodes(), n_rel),
    )?;
    let trace = WsgcETrace { params: params.clone(), edges: trace_edges };
    Ok((out, trace))
}

/// Backpropagate upstream gradients on completed-edge weights into the
/// canonicalization parameters, differentiating through the stored
/// maximizing paths (valid subgradient at any maximizer) and the softmax /
/// sigmoid that produced each weight. Converse symmetry tying is applied.
pub fn subgrad_wsgc_e(
    trace: &WsgcETrace,
    params: &CanonParams,
    upstream: &[f64],
) -> Result<CanonGrads> {
    if trace.params != *params {
        return Err(Error::Consistency(
            "parameters changed since the forward pass that produced this trace".into(),
        ));
    }
    if upstream.len() != trace.edges.len() {
        return Err(Error::Consistency(format!(
            "upstream gradient has {} entries for {} traced edges",
            upstream.len(),
            trace.edges.len()
        )));
    }
    let n_rel = params.n_relations();
    let conv_rows: Vec<Vec<f64>> =
        (0..n_rel).map(|r| params.p_conv(r)).collect::<Result<_>>()?;
    let trans_probs: Vec<f64> =
        (0..n_rel).map(|r| params.p_trans(r)).collect::<Result<_>>()?;

    let mut grads = CanonGrads::zeros(n_rel);
    for ((edge, _w, prov), &g_up) in trace.edges.iter().zip(upstream) {
        if g_up == 0.0 {
            continue;
        }
        match prov {
            EdgeProvenance::Original => {}
            EdgeProvenance::Converse { source_relation } => {
                add_softmax_grad(
                    &mut grads.theta_conv[*source_relation],
                    &conv_rows[*source_relation],
                    edge.relation,
                    g_up,
                );
            }
            EdgeProvenance::Transitive { path } => {
                let r = edge.relation;
                // prefix[k] = prod of weights before step k, suffix[k] = after
                let m = path.len();
                let mut prefix = vec![1.0; m + 1];
                for (k, s) in path.iter().enumerate() {
                    prefix[k + 1] = prefix[k] * s.weight;
                }
                let mut suffix = vec![1.0; m + 1];
                for k in (0..m).rev() {
                    suffix[k] = suffix[k + 1] * path[k].weight;
                }
                let product = prefix[m];
                grads.theta_trans[r] += g_up * product * sigmoid_prime(params.theta_trans[r]);
                for (k, step) in path.iter().enumerate() {
                    let Some(src) = step.converse_source else { continue };
                    let partial = g_up * trans_probs[r] * prefix[k] * suffix[k + 1];
                    add_softmax_grad(&mut grads.theta_conv[src], &conv_rows[src], r, partial);
                }
            }
        }
    }
    grads.tie_symmetric();
    Ok(grads)
}

/// d(probs[target])/d(logits[m]) = probs[target] * (delta - probs[m]).
fn add_softmax_grad(row_grad: &mut [f64], probs: &[f64], target: usize, upstream: f64) {
    let p_t = probs[target];
    for (m, g) in row_grad.iter_mut().enumerate() {
        let delta = if m == target { 1.0 } else { 0.0 };
        *g += upstream * p_t * (delta - probs[m]);
    }
}
