//! Synthetic scene generation and graph transforms.
//!
//! Scenes are axis-aligned squares with one of two sizes, centers uniform
//! in the unit square, and relations computed from geometry: `above`
//! (transitive), `opposite_h` and `x_near` (not transitive), plus an
//! optional `below` relation (the exact converse of `above`) to exercise
//! converse learning. y grows downward (image convention), so `above`
//! means a smaller y-center. Emitted `above` edges are reduced to their
//! transitive reduction, mirroring annotators who skip redundant edges.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::canon::{sgc, FormulaSet};
use crate::error::{Error, Result};
use crate::graph::{EdgeKey, Layout, SceneGraph, SceneObject};
use crate::seed;
use crate::vocab::RelationVocab;

/// Number of objects per scene: fixed or uniform in an inclusive range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectCount {
    Fixed(usize),
    Range([usize; 2]),
}

impl ObjectCount {
    fn draw(self, rng: &mut impl Rng) -> usize {
        match self {
            ObjectCount::Fixed(n) => n,
            ObjectCount::Range([lo, hi]) => rng.random_range(lo..=hi),
        }
    }
}

fn default_small() -> f64 {
    0.10
}
fn default_large() -> f64 {
    0.20
}
fn default_threshold() -> f64 {
    0.10
}
fn default_keep() -> f64 {
    1.0
}
fn default_mix() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_objects: ObjectCount,
    /// Side length of a small square, image-normalized.
    #[serde(default = "default_small")]
    pub small_size: f64,
    /// Side length of a large square.
    #[serde(default = "default_large")]
    pub large_size: f64,
    /// `x_near` holds when |x_i - x_j| is at most this fraction of the
    /// image width.
    #[serde(default = "default_threshold")]
    pub x_near_threshold: f64,
    /// Keep probability for non-transitive relation edges (annotator
    /// sparsity surrogate); 1.0 keeps all.
    #[serde(default = "default_keep")]
    pub keep_nontransitive_p: f64,
    /// Enable the extra `below` relation. Each reduced above-pair is then
    /// emitted as either an `above` or a `below` edge, so recovering the
    /// full order requires converse completion. Off in paper-faithful runs.
    #[serde(default)]
    pub include_below: bool,
    /// Probability that a reduced above-pair is emitted as `below`.
    #[serde(default = "default_mix")]
    pub below_mix_p: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n_objects: ObjectCount, seed: u64) -> Self {
        SynthConfig {
            n_objects,
            small_size: default_small(),
            large_size: default_large(),
            x_near_threshold: default_threshold(),
            keep_nontransitive_p: default_keep(),
            include_below: false,
            below_mix_p: default_mix(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("small_size", self.small_size), ("large_size", self.large_size)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Input(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.x_near_threshold > 0.0 && self.x_near_threshold < 1.0) {
            return Err(Error::Input(format!(
                "x_near_threshold must lie in (0, 1), got {}",
                self.x_near_threshold
            )));
        }
        for (name, v) in [
            ("keep_nontransitive_p", self.keep_nontransitive_p),
            ("below_mix_p", self.below_mix_p),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Input(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        let (lo, hi) = match self.n_objects {
            ObjectCount::Fixed(n) => (n, n),
            ObjectCount::Range([lo, hi]) => (lo, hi),
        };
        if lo == 0 || lo > hi {
            return Err(Error::Input(format!("invalid object count range {lo}..={hi}")));
        }
        Ok(())
    }

    /// Relation ids are fixed by this ordering.
    pub fn vocab(&self) -> RelationVocab {
        let mut relations = vec!["above", "opposite_h", "x_near"];
        if self.include_below {
            relations.push("below");
        }
        let mut attributes = std::collections::BTreeMap::new();
        attributes.insert("size".to_string(), vec!["S".to_string(), "L".to_string()]);
        RelationVocab::with_attributes(relations, vec!["small", "large"], attributes)
            .expect("static names are unique")
    }

    /// The ground-truth formula set of the generator.
    pub fn formula_set(&self) -> FormulaSet {
        let vocab = self.vocab();
        let above = vocab.relation_id("above").expect("static");
        let mut transitive = vec![above];
        let mut converse = Vec::new();
        if self.include_below {
            let below = vocab.relation_id("below").expect("static");
            transitive.push(below);
            converse.push((above, below));
            converse.push((below, above));
        }
        FormulaSet::new(transitive, converse, vocab.n_relations()).expect("static ids")
    }

    pub const ABOVE: usize = 0;
    pub const OPPOSITE_H: usize = 1;
    pub const X_NEAR: usize = 2;
    pub const BELOW: usize = 3;
}

fn center(b: &[f64; 4]) -> (f64, f64) {
    ((b[0] + b[2]) / 2.0, (b[1] + b[3]) / 2.0)
}

/// All geometric relations that hold on a layout (the "full" edge set).
/// Ties (equal centers, exact midline) generate no edge.
pub fn recompute_relations(layout: &Layout, config: &SynthConfig) -> BTreeSet<EdgeKey> {
    let centers: Vec<(f64, f64)> = layout.boxes().iter().map(center).collect();
    let n = centers.len();
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (xi, yi) = centers[i];
            let (xj, yj) = centers[j];
            if yi < yj {
                edges.insert(EdgeKey::new(i, SynthConfig::ABOVE, j));
                if config.include_below {
                    edges.insert(EdgeKey::new(j, SynthConfig::BELOW, i));
                }
            }
            if (xi - 0.5) * (xj - 0.5) < 0.0 {
                edges.insert(EdgeKey::new(i, SynthConfig::OPPOSITE_H, j));
            }
            if (xi - xj).abs() <= config.x_near_threshold {
                edges.insert(EdgeKey::new(i, SynthConfig::X_NEAR, j));
            }
        }
    }
    edges
}

/// Transitive reduction of a strict partial order given as arc set.
fn transitive_reduction(arcs: &BTreeSet<(usize, usize)>) -> BTreeSet<(usize, usize)> {
    arcs.iter()
        .filter(|&&(i, j)| {
            !arcs
                .iter()
                .any(|&(a, k)| a == i && k != j && arcs.contains(&(k, j)))
        })
        .copied()
        .collect()
}

/// Generate `count` scene/layout pairs. Deterministic in `config.seed`;
/// scene `i` draws from an independent derived stream.
pub fn synth_generate(config: &SynthConfig, count: usize) -> Result<Vec<(SceneGraph, Layout)>> {
    config.validate()?;
    let vocab = config.vocab();
    (0..count)
        .map(|idx| {
            let mut rng = seed::rng(seed::derive(config.seed, "scene", idx as u64));
            let n = config.n_objects.draw(&mut rng);

            let mut objects = Vec::with_capacity(n);
            let mut boxes = Vec::with_capacity(n);
            for _ in 0..n {
                let large = rng.random::<f64>() < 0.5;
                let side = if large { config.large_size } else { config.small_size };
                let cx = rng.random_range(side / 2.0..=1.0 - side / 2.0);
                let cy = rng.random_range(side / 2.0..=1.0 - side / 2.0);
                let mut obj = SceneObject::new(usize::from(large));
                obj.attributes
                    .insert("size".to_string(), if large { "L" } else { "S" }.to_string());
                objects.push(obj);
                boxes.push([cx - side / 2.0, cy - side / 2.0, cx + side / 2.0, cy + side / 2.0]);
            }
            let layout = Layout::new(boxes)?;

            let full = recompute_relations(&layout, config);
            let above_full: BTreeSet<(usize, usize)> = full
                .iter()
                .filter(|e| e.relation == SynthConfig::ABOVE)
                .map(|e| (e.subject, e.object))
                .collect();
            let above_reduced = transitive_reduction(&above_full);

            let mut edges = Vec::new();
            for &(i, j) in &above_reduced {
                if config.include_below && rng.random::<f64>() < config.below_mix_p {
                    edges.push(EdgeKey::new(j, SynthConfig::BELOW, i));
                } else {
                    edges.push(EdgeKey::new(i, SynthConfig::ABOVE, j));
                }
            }
            for e in &full {
                if matches!(e.relation, SynthConfig::OPPOSITE_H | SynthConfig::X_NEAR)
                    && (config.keep_nontransitive_p >= 1.0
                        || rng.random::<f64>() < config.keep_nontransitive_p)
                {
                    edges.push(*e);
                }
            }
            let graph = SceneGraph::new(objects, edges, &vocab)?;
            Ok((graph, layout))
        })
        .collect()
}

/// Replace a graph with a semantically equivalent one: recompute the full
/// geometric relation set from the layout, drop one side of each converse
/// pair with p = 0.5, then drop transitively implied edges with p = 0.5.
/// The closure under `f` is preserved exactly.
pub fn semantic_equivalent_transform(
    g: &SceneGraph,
    layout: &Layout,
    config: &SynthConfig,
    f: &FormulaSet,
    rng: &mut impl Rng,
) -> Result<SceneGraph> {
    layout.check_matches(g.n_nodes()).map_err(|e| Error::Input(e.to_string()))?;
    let mut edges = recompute_relations(layout, config);

    // converse drops: each unordered instance handled once
    let snapshot: Vec<EdgeKey> = edges.iter().copied().collect();
    for e in &snapshot {
        for &(r, rc) in &f.converse {
            if e.relation != r {
                continue;
            }
            let reverse = EdgeKey::new(e.object, rc, e.subject);
            if *e < reverse && edges.contains(e) && edges.contains(&reverse)
                && rng.random::<f64>() < 0.5 {
                    let drop_forward = rng.random::<f64>() < 0.5;
                    edges.remove(if drop_forward { e } else { &reverse });
                }
        }
    }

    // implied-edge drops: an edge may go only while it stays derivable
    // from what remains, so the closure never changes
    for &r in &f.transitive {
        let snapshot: Vec<EdgeKey> = edges.iter().filter(|e| e.relation == r).copied().collect();
        for e in &snapshot {
            let mut without = edges.clone();
            without.remove(e);
            let candidate = g.with_edges(without.iter().copied())?;
            if sgc(&candidate, f)?.contains(e) && rng.random::<f64>() < 0.5 {
                edges.remove(e);
            }
        }
    }

    g.with_edges(edges)
}

/// Resample the relation label of a uniformly chosen
/// `ceil(fraction * |E|)` subset of edges; endpoints unchanged.
pub fn noise_transform(g: &SceneGraph, fraction: f64, rng: &mut impl Rng) -> Result<SceneGraph> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Input(format!("fraction must lie in [0, 1], got {fraction}")));
    }
    let n_rel = g.n_relations();
    if n_rel < 2 {
        return Err(Error::Input("relabeling needs at least two relations".into()));
    }
    let edges: Vec<EdgeKey> = g.edges().copied().collect();
    let k = ((fraction * edges.len() as f64).ceil() as usize).min(edges.len());

    // partial Fisher-Yates to pick k distinct indices
    let mut idx: Vec<usize> = (0..edges.len()).collect();
    for i in 0..k {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    let chosen: BTreeSet<usize> = idx[..k].iter().copied().collect();

    let new_edges = edges.iter().enumerate().map(|(i, e)| {
        if chosen.contains(&i) {
            let mut r = rng.random_range(0..n_rel - 1);
            if r >= e.relation {
                r += 1;
            }
            EdgeKey::new(e.subject, r, e.object)
        } else {
            *e
        }
    });
    g.with_edges(new_edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::closure_oracle;

    fn cfg(n: usize, seed: u64) -> SynthConfig {
        SynthConfig::new(ObjectCount::Fixed(n), seed)
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let a = synth_generate(&cfg(6, 42), 5).unwrap();
        let b = synth_generate(&cfg(6, 42), 5).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(&cfg(6, 43), 5).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn two_stacked_objects_relate_as_expected() {
        // hand layout: same x, one clearly higher (smaller y = above)
        let config = cfg(2, 0);
        let layout =
            Layout::new(vec![[0.25, 0.15, 0.35, 0.25], [0.25, 0.75, 0.35, 0.85]]).unwrap();
        let rels = recompute_relations(&layout, &config);
        assert!(rels.contains(&EdgeKey::new(0, SynthConfig::ABOVE, 1)));
        assert!(!rels.contains(&EdgeKey::new(1, SynthConfig::ABOVE, 0)));
        // x distance 0 <= 0.1: x_near both directions
        assert!(rels.contains(&EdgeKey::new(0, SynthConfig::X_NEAR, 1)));
        assert!(rels.contains(&EdgeKey::new(1, SynthConfig::X_NEAR, 0)));
        // same side of the midline: no opposite_h
        assert!(!rels.contains(&EdgeKey::new(0, SynthConfig::OPPOSITE_H, 1)));
    }

    #[test]
    fn opposite_sides_of_midline_detected() {
        let config = cfg(2, 0);
        let layout =
            Layout::new(vec![[0.15, 0.4, 0.25, 0.5], [0.75, 0.4, 0.85, 0.5]]).unwrap();
        let rels = recompute_relations(&layout, &config);
        assert!(rels.contains(&EdgeKey::new(0, SynthConfig::OPPOSITE_H, 1)));
        assert!(rels.contains(&EdgeKey::new(1, SynthConfig::OPPOSITE_H, 0)));
        assert!(!rels.contains(&EdgeKey::new(0, SynthConfig::X_NEAR, 1)));
    }

    #[test]
    fn every_emitted_edge_holds_on_the_layout() {
        for seed in 0..5u64 {
            let config = cfg(7, seed);
            for (g, layout) in synth_generate(&config, 10).unwrap() {
                let full = recompute_relations(&layout, &config);
                for e in g.edges() {
                    assert!(full.contains(e), "emitted edge {e:?} does not hold");
                }
            }
        }
    }

    #[test]
    fn closure_of_reduced_above_recovers_full_relation() {
        let config = cfg(8, 7);
        let f = config.formula_set();
        for (g, layout) in synth_generate(&config, 20).unwrap() {
            let full = recompute_relations(&layout, &config);
            let closed = sgc(&g, &f).unwrap();
            let full_above: BTreeSet<EdgeKey> = full
                .iter()
                .filter(|e| e.relation == SynthConfig::ABOVE)
                .copied()
                .collect();
            let closed_above: BTreeSet<EdgeKey> = closed
                .edges()
                .filter(|e| e.relation == SynthConfig::ABOVE)
                .copied()
                .collect();
            assert_eq!(closed_above, full_above);
        }
    }

    #[test]
    fn below_mix_recovers_order_only_through_converse() {
        let mut config = cfg(8, 11);
        config.include_below = true;
        let f = config.formula_set();
        let scenes = synth_generate(&config, 20).unwrap();
        let mut saw_below = false;
        for (g, layout) in &scenes {
            saw_below |= g.edges().any(|e| e.relation == SynthConfig::BELOW);
            let full = recompute_relations(layout, &config);
            let closed = sgc(g, &f).unwrap();
            // the closure must recover the complete above/below order even
            // though each chain link was emitted in only one orientation
            for e in &full {
                if e.relation == SynthConfig::ABOVE || e.relation == SynthConfig::BELOW {
                    assert!(closed.contains(e), "missing {e:?}");
                }
            }
        }
        assert!(saw_below, "mixing never produced a below edge");
    }

    #[test]
    fn equivalent_transform_preserves_closure_exactly() {
        let config = cfg(7, 23);
        let f = config.formula_set();
        let mut rng = seed::rng(99);
        for (g, layout) in synth_generate(&config, 50).unwrap() {
            let g2 = semantic_equivalent_transform(&g, &layout, &config, &f, &mut rng).unwrap();
            let c1 = sgc(&g, &f).unwrap();
            let c2 = sgc(&g2, &f).unwrap();
            assert_eq!(c1.edge_set(), c2.edge_set());
            // agree with the brute-force oracle as well
            let o2 = closure_oracle(&g2, &f).unwrap();
            assert_eq!(c2.edge_set(), o2.edge_set());
        }
    }

    #[test]
    fn equivalent_transform_with_below_enabled() {
        let mut config = cfg(6, 29);
        config.include_below = true;
        let f = config.formula_set();
        let mut rng = seed::rng(100);
        for (g, layout) in synth_generate(&config, 30).unwrap() {
            let g2 = semantic_equivalent_transform(&g, &layout, &config, &f, &mut rng).unwrap();
            assert_eq!(
                sgc(&g, &f).unwrap().edge_set(),
                sgc(&g2, &f).unwrap().edge_set()
            );
        }
    }

    #[test]
    fn noise_transform_zero_fraction_is_identity() {
        let config = cfg(6, 31);
        let (g, _) = synth_generate(&config, 1).unwrap().remove(0);
        let mut rng = seed::rng(1);
        let noisy = noise_transform(&g, 0.0, &mut rng).unwrap();
        assert_eq!(g, noisy);
    }

    #[test]
    fn noise_transform_single_edge_always_changes() {
        let vocab = cfg(2, 0).vocab();
        let g = SceneGraph::new(
            vec![SceneObject::new(0), SceneObject::new(1)],
            [EdgeKey::new(0, SynthConfig::ABOVE, 1)],
            &vocab,
        )
        .unwrap();
        for s in 0..20u64 {
            let mut rng = seed::rng(s);
            let noisy = noise_transform(&g, 1.0, &mut rng).unwrap();
            assert_eq!(noisy.n_edges(), 1);
            let e = noisy.edges().next().unwrap();
            assert_ne!(e.relation, SynthConfig::ABOVE);
            assert_eq!((e.subject, e.object), (0, 1));
        }
    }

    #[test]
    fn noise_transform_changes_exact_count_on_distinct_pairs() {
        // 100 edges over distinct node pairs: relabeled edges cannot
        // collide, so exactly 10 original labels disappear
        let vocab = cfg(2, 0).vocab();
        let n = 40;
        let objects: Vec<SceneObject> = (0..n).map(|_| SceneObject::new(0)).collect();
        let mut edges = Vec::new();
        'outer: for i in 0..n {
            for j in 0..n {
                if i != j && (i + j) % 3 == 0 {
                    edges.push(EdgeKey::new(i, (i * 7 + j) % 3, j));
                    if edges.len() == 100 {
                        break 'outer;
                    }
                }
            }
        }
        let g = SceneGraph::new(objects, edges, &vocab).unwrap();
        assert_eq!(g.n_edges(), 100);
        for s in 0..10u64 {
            let mut rng = seed::rng(s);
            let noisy = noise_transform(&g, 0.1, &mut rng).unwrap();
            let removed = g.edge_set().difference(noisy.edge_set()).count();
            assert_eq!(removed, 10, "seed {s}");
        }
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(0, 1);
        assert!(c.validate().is_err());
        c = cfg(4, 1);
        c.small_size = 1.5;
        assert!(c.validate().is_err());
        c = cfg(4, 1);
        c.keep_nontransitive_p = 1.2;
        assert!(c.validate().is_err());
        assert!(cfg(4, 1).validate().is_ok());
    }
}
