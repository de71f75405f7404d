//! Sampling-based weighted scene-graph canonicalization.
//!
//! For each original edge a converse relation (or the empty relation) is
//! sampled and, when non-empty, the reversed edge is added with weight 1.
//! Each relation's boolean transitive closure is then taken on the sampled
//! graph and every new edge enters with weight `p_trans(r)`. The draws and
//! their log-probabilities are recorded for the score-function gradient.

use std::collections::BTreeMap;

use rand::Rng;

use crate::canon::params::CanonParams;
use crate::error::{Error, Result};
use crate::graph::{EdgeKey, SceneGraph, WeightedSceneGraph};

/// One converse sample: the originating edge, the drawn relation index
/// (`phi` = "no converse" = index |R|) and its log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ConverseDraw {
    pub edge: EdgeKey,
    pub z: usize,
    pub log_prob: f64,
}

/// Record of one sampling pass, sufficient for the REINFORCE gradient and
/// for routing pathwise transitivity gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    /// One draw per original edge, in deterministic edge order.
    pub draws: Vec<ConverseDraw>,
    /// Snapshot of `p_conv` rows at sampling time, |R| x (|R| + 1).
    pub conv_probs: Vec<Vec<f64>>,
    /// Keys of the transitively completed edges (weight `p_trans(r)`).
    pub transitive_added: Vec<EdgeKey>,
    /// Index of the empty relation in converse rows.
    pub phi: usize,
}

/// Sampling-based weighted canonicalization. All randomness comes from the
/// passed source: equal seeds give bit-identical outputs.
pub fn wsgc_s(
    g: &SceneGraph,
    params: &CanonParams,
    rng: &mut impl Rng,
) -> Result<(WeightedSceneGraph, SampleRecord)> {
    params.validate()?;
    let n_rel = g.n_relations();
    if params.n_relations() != n_rel {
        return Err(Error::Shape(format!(
            "params cover {} relations, graph uses {n_rel}",
            params.n_relations()
        )));
    }
    let conv_probs: Vec<Vec<f64>> =
        (0..n_rel).map(|r| params.p_conv(r)).collect::<Result<_>>()?;
    let phi = n_rel;

    let mut edges: BTreeMap<EdgeKey, f64> = g.edges().map(|&e| (e, 1.0)).collect();

    // Converse sampling: one draw per edge of the original graph only;
    // sampled edges do not recursively spawn converses.
    let mut draws = Vec::with_capacity(g.n_edges());
    for e in g.edges() {
        let row = &conv_probs[e.relation];
        let z = sample_index(row, rng);
        draws.push(ConverseDraw { edge: *e, z, log_prob: row[z].ln() });
        if z != phi {
            edges.entry(EdgeKey::new(e.object, z, e.subject)).or_insert(1.0);
        }
    }

    // Transitive completion: boolean closure per relation on the sampled
    // graph; new edges get weight p_trans(r).
    let n = g.n_nodes();
    let mut transitive_added = Vec::new();
    for r in 0..n_rel {
        let p_t = params.p_trans(r)?;
        if p_t <= 0.0 {
            continue;
        }
        let mut reach = vec![vec![false; n]; n];
        for e in edges.keys() {
            if e.relation == r {
                reach[e.subject][e.object] = true;
            }
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        for (i, row) in reach.iter().enumerate() {
            for (j, &hit) in row.iter().enumerate() {
                if hit && i != j {
                    let key = EdgeKey::new(i, r, j);
                    if let std::collections::btree_map::Entry::Vacant(e) = edges.entry(key) {
                        e.insert(p_t);
                        transitive_added.push(key);
                    }
                }
            }
        }
    }

    let out = WeightedSceneGraph::new(
        g.objects().to_vec(),
        edges,
        (g.n_nodes(), n_rel),
    )?;
    let record = SampleRecord { draws, conv_probs, transitive_added, phi };
    Ok((out, record))
}

/// CDF-inversion sampling; deterministic for one-hot rows.
fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return k;
        }
    }
    probs.len() - 1
}
