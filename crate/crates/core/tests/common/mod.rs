//! Shared generators for the integration suites.
#![allow(dead_code)] // each test binary uses a different subset

use rand::Rng;
use sgcanon::canon::FormulaSet;
use sgcanon::graph::{EdgeKey, SceneGraph, SceneObject};
use sgcanon::vocab::RelationVocab;

pub fn vocab_n(n_rel: usize) -> RelationVocab {
    let relations: Vec<String> = (0..n_rel).map(|r| format!("r{r}")).collect();
    RelationVocab::new(relations, vec!["thing".to_string()]).unwrap()
}

pub fn random_graph(rng: &mut impl Rng, n: usize, n_rel: usize, density: f64) -> SceneGraph {
    let vocab = vocab_n(n_rel);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for r in 0..n_rel {
                if rng.random::<f64>() < density {
                    edges.push(EdgeKey::new(i, r, j));
                }
            }
        }
    }
    SceneGraph::new((0..n).map(|_| SceneObject::new(0)).collect(), edges, &vocab).unwrap()
}

/// Unconstrained random formula set: arbitrary transitive flags and
/// arbitrary (possibly one-directional, possibly chained) converse pairs.
pub fn random_formula_set(rng: &mut impl Rng, n_rel: usize) -> FormulaSet {
    let transitive: Vec<usize> = (0..n_rel).filter(|_| rng.random::<f64>() < 0.5).collect();
    let mut converse = Vec::new();
    for r in 0..n_rel {
        for rc in 0..n_rel {
            if r != rc && rng.random::<f64>() < 0.25 {
                converse.push((r, rc));
            }
        }
    }
    FormulaSet::new(transitive, converse, n_rel).unwrap()
}

/// Well-formed random formula set: converse pairs are symmetric, disjoint
/// (at most one partner per relation) and transitivity-consistent across
/// partners. Exactly the sets representable by saturated parameters.
pub fn random_well_formed_formula_set(rng: &mut impl Rng, n_rel: usize) -> FormulaSet {
    let mut unpaired: Vec<usize> = (0..n_rel).collect();
    let mut converse = Vec::new();
    let mut partner = vec![None; n_rel];
    while unpaired.len() >= 2 {
        if rng.random::<f64>() < 0.5 {
            let a = unpaired.remove(rng.random_range(0..unpaired.len()));
            let b = unpaired.remove(rng.random_range(0..unpaired.len()));
            converse.push((a, b));
            converse.push((b, a));
            partner[a] = Some(b);
            partner[b] = Some(a);
        } else {
            unpaired.remove(rng.random_range(0..unpaired.len()));
        }
    }
    let mut transitive = Vec::new();
    let mut decided = vec![false; n_rel];
    for r in 0..n_rel {
        if decided[r] {
            continue;
        }
        let flag = rng.random::<f64>() < 0.5;
        decided[r] = true;
        let mut members = vec![r];
        if let Some(p) = partner[r] {
            decided[p] = true;
            members.push(p);
        }
        if flag {
            transitive.extend(members);
        }
    }
    FormulaSet::new(transitive, converse, n_rel).unwrap()
}
