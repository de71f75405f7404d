//! Exact scene-graph canonicalization: converse completion followed by
//! per-relation transitive closure (Floyd-Warshall), iterated to a fixed
//! point so the result is the logical closure for arbitrary formula sets.

use std::collections::BTreeSet;

use crate::canon::FormulaSet;
use crate::error::Result;
use crate::graph::{EdgeKey, SceneGraph};

/// Canonicalize `g` under the formulas in `f`.
///
/// Each round first adds `(j, r', i)` for every converse pair `(r, r')`
/// and present edge `(i, r, j)`, then closes every transitive relation's
/// subgraph with boolean Floyd-Warshall. For the usual symmetric formula
/// sets one round already reaches the closure; the loop guards the general
/// case (e.g. chained one-directional converses). Idempotent, and never
/// drops an input edge. Self-pairs `(i, i)` are never materialized:
/// relations are irreflexive throughout.
pub fn sgc(g: &SceneGraph, f: &FormulaSet) -> Result<SceneGraph> {
    f.validate(g.n_relations())?;
    let n = g.n_nodes();
    let mut edges: BTreeSet<EdgeKey> = g.edge_set().clone();
    loop {
        let before = edges.len();

        let snapshot: Vec<EdgeKey> = edges.iter().copied().collect();
        for e in &snapshot {
            for &(r, rc) in &f.converse {
                if e.relation == r {
                    edges.insert(EdgeKey::new(e.object, rc, e.subject));
                }
            }
        }

        for &r in &f.transitive {
            let mut reach = vec![vec![false; n]; n];
            for e in &edges {
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
                        edges.insert(EdgeKey::new(i, r, j));
                    }
                }
            }
        }

        if edges.len() == before {
            break;
        }
    }
    g.with_edges(edges)
}
