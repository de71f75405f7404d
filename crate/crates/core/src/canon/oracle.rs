//! Brute-force closure oracle: naive fixed-point iteration of the two
//! formula schemas, one implied edge at a time. Deliberately independent of
//! the production procedure (no Floyd-Warshall, no completion ordering) so
//! it can serve as its test oracle.

use std::collections::BTreeSet;

use crate::canon::FormulaSet;
use crate::error::{Error, Result};
use crate::graph::{EdgeKey, SceneGraph};

/// Node-count guard; the oracle enumerates edge pairs per sweep.
pub const ORACLE_MAX_NODES: usize = 12;

/// Repeatedly apply both schemas — `(i, r, j)` with `(r, r')` converse adds
/// `(j, r', i)`, and `(i, r, j), (j, r, k)` with `r` transitive adds
/// `(i, r, k)` — until no edge is added; returns the fixed point.
pub fn closure_oracle(g: &SceneGraph, f: &FormulaSet) -> Result<SceneGraph> {
    if g.n_nodes() > ORACLE_MAX_NODES {
        return Err(Error::Size(format!(
            "closure oracle accepts at most {ORACLE_MAX_NODES} nodes, got {}",
            g.n_nodes()
        )));
    }
    f.validate(g.n_relations())?;

    let mut edges: BTreeSet<EdgeKey> = g.edge_set().clone();
    loop {
        let mut added: Vec<EdgeKey> = Vec::new();
        for e in &edges {
            for &(r, rc) in &f.converse {
                if e.relation == r {
                    let implied = EdgeKey::new(e.object, rc, e.subject);
                    if !edges.contains(&implied) {
                        added.push(implied);
                    }
                }
            }
        }
        for a in &edges {
            if !f.transitive.contains(&a.relation) {
                continue;
            }
            for b in &edges {
                if b.relation == a.relation && b.subject == a.object && b.object != a.subject {
                    let implied = EdgeKey::new(a.subject, a.relation, b.object);
                    if !edges.contains(&implied) {
                        added.push(implied);
                    }
                }
            }
        }
        if added.is_empty() {
            break;
        }
        edges.extend(added);
    }
    g.with_edges(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SceneObject;
    use crate::vocab::RelationVocab;

    fn graph(n: usize, edges: &[(usize, usize, usize)]) -> SceneGraph {
        let v = RelationVocab::new(vec!["a", "b", "c"], vec!["thing"]).unwrap();
        SceneGraph::new(
            (0..n).map(|_| SceneObject::new(0)).collect(),
            edges.iter().map(|&(i, r, j)| EdgeKey::new(i, r, j)),
            &v,
        )
        .unwrap()
    }

    #[test]
    fn single_converse_rule_application() {
        let g = graph(3, &[(1, 0, 2)]);
        let f = FormulaSet::new([], [(0, 1), (1, 0)], 3).unwrap();
        let c = closure_oracle(&g, &f).unwrap();
        assert!(c.contains(&EdgeKey::new(2, 1, 1)));
        assert_eq!(c.n_edges(), 2);
    }

    #[test]
    fn closed_graph_is_a_fixed_point() {
        let g = graph(3, &[(0, 2, 1), (1, 2, 2), (0, 2, 2)]);
        let f = FormulaSet::new([2], [], 3).unwrap();
        let c = closure_oracle(&g, &f).unwrap();
        assert_eq!(&c, &g);
    }

    #[test]
    fn guard_rejects_large_graphs() {
        let g = graph(13, &[]);
        let f = FormulaSet::default();
        assert!(matches!(closure_oracle(&g, &f), Err(Error::Size(_))));
    }

    #[test]
    fn cycles_never_materialize_self_loops() {
        let g = graph(2, &[(0, 0, 1), (1, 0, 0)]);
        let f = FormulaSet::new([0], [], 3).unwrap();
        let c = closure_oracle(&g, &f).unwrap();
        assert_eq!(c.n_edges(), 2);
    }
}
