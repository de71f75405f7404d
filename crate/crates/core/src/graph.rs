//! Scene-graph data model: objects with categories/attributes, directed
//! labeled edges, edge weights, and per-node bounding-box layouts.
//!
//! All types are immutable after construction. Edges live in ordered sets
//! keyed by `(subject, relation, object)` so iteration order is
//! deterministic, which keeps every downstream sampling and summation
//! reproducible under a fixed seed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::RelationVocab;

/// Directed labeled edge: subject node, relation id, object node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeKey {
    pub subject: usize,
    pub relation: usize,
    pub object: usize,
}

impl EdgeKey {
    pub fn new(subject: usize, relation: usize, object: usize) -> Self {
        EdgeKey { subject, relation, object }
    }
}

/// One scene object: a category id plus a free-form attribute map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub category: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, String>,
}

impl SceneObject {
    pub fn new(category: usize) -> Self {
        SceneObject { category, attributes: BTreeMap::new() }
    }
}

/// An unweighted scene graph over `n` objects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneGraph {
    objects: Vec<SceneObject>,
    edges: BTreeSet<EdgeKey>,
    n_relations: usize,
}

impl SceneGraph {
    /// Build a graph, validating node indices, relation ids and the
    /// no-self-loop rule. Duplicate triplets collapse silently (edges form
    /// a set).
    pub fn new(
        objects: Vec<SceneObject>,
        edges: impl IntoIterator<Item = EdgeKey>,
        vocab: &RelationVocab,
    ) -> Result<Self> {
        for obj in &objects {
            if obj.category >= vocab.n_categories() {
                return Err(Error::Vocab(format!(
                    "category id {} out of range (|C| = {})",
                    obj.category,
                    vocab.n_categories()
                )));
            }
        }
        let n = objects.len();
        let mut set = BTreeSet::new();
        for e in edges {
            validate_edge(e, n, vocab.n_relations())?;
            set.insert(e);
        }
        Ok(SceneGraph { objects, edges: set, n_relations: vocab.n_relations() })
    }

    /// Same-vocabulary graph with a replaced edge set.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = EdgeKey>) -> Result<Self> {
        let n = self.n_nodes();
        let mut set = BTreeSet::new();
        for e in edges {
            validate_edge(e, n, self.n_relations)?;
            set.insert(e);
        }
        Ok(SceneGraph { objects: self.objects.clone(), edges: set, n_relations: self.n_relations })
    }

    pub fn n_nodes(&self) -> usize {
        self.objects.len()
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn edges(&self) -> impl Iterator<Item = &EdgeKey> + '_ {
        self.edges.iter()
    }

    pub fn edge_set(&self) -> &BTreeSet<EdgeKey> {
        &self.edges
    }

    pub fn contains(&self, e: &EdgeKey) -> bool {
        self.edges.contains(e)
    }

    /// The unlabeled directed graph of one relation: exactly the edges of
    /// `E` with relation `r`, node count preserved.
    pub fn per_relation_subgraph(&self, r: usize) -> Result<Digraph> {
        if r >= self.n_relations {
            return Err(Error::Vocab(format!(
                "relation id {r} out of range (|R| = {})",
                self.n_relations
            )));
        }
        let arcs = self
            .edges
            .iter()
            .filter(|e| e.relation == r)
            .map(|e| (e.subject, e.object))
            .collect();
        Ok(Digraph { n: self.n_nodes(), arcs })
    }
}

fn validate_edge(e: EdgeKey, n_nodes: usize, n_relations: usize) -> Result<()> {
    if e.subject >= n_nodes || e.object >= n_nodes {
        return Err(Error::Graph(format!(
            "edge ({}, {}, {}) references a node outside 0..{n_nodes}",
            e.subject, e.relation, e.object
        )));
    }
    if e.subject == e.object {
        return Err(Error::Graph(format!(
            "self-loop on node {} rejected (relations are irreflexive)",
            e.subject
        )));
    }
    if e.relation >= n_relations {
        return Err(Error::Vocab(format!(
            "relation id {} out of range (|R| = {n_relations})",
            e.relation
        )));
    }
    Ok(())
}

/// A scene graph whose edges carry weights in `(0, 1]`; the output of the
/// weighted canonicalization procedures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSceneGraph {
    objects: Vec<SceneObject>,
    edges: BTreeMap<EdgeKey, f64>,
    n_relations: usize,
}

impl WeightedSceneGraph {
    pub fn new(
        objects: Vec<SceneObject>,
        edges: impl IntoIterator<Item = (EdgeKey, f64)>,
        n_nodes_relations: (usize, usize),
    ) -> Result<Self> {
        let (n_nodes, n_relations) = n_nodes_relations;
        if objects.len() != n_nodes {
            return Err(Error::Shape(format!(
                "object count {} does not match node count {n_nodes}",
                objects.len()
            )));
        }
        let mut map = BTreeMap::new();
        for (e, w) in edges {
            validate_edge(e, n_nodes, n_relations)?;
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::Domain(format!(
                    "edge weight {w} outside (0, 1] on ({}, {}, {})",
                    e.subject, e.relation, e.object
                )));
            }
            if map.insert(e, w).is_some() {
                return Err(Error::Graph(format!(
                    "duplicate weighted edge key ({}, {}, {})",
                    e.subject, e.relation, e.object
                )));
            }
        }
        Ok(WeightedSceneGraph { objects, edges: map, n_relations })
    }

    /// Lift an unweighted graph: every edge gets weight 1.
    pub fn from_unweighted(g: &SceneGraph) -> Self {
        WeightedSceneGraph {
            objects: g.objects().to_vec(),
            edges: g.edges().map(|&e| (e, 1.0)).collect(),
            n_relations: g.n_relations(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.objects.len()
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    /// Edges in deterministic `(subject, relation, object)` order.
    pub fn edges(&self) -> impl Iterator<Item = (&EdgeKey, f64)> + '_ {
        self.edges.iter().map(|(e, &w)| (e, w))
    }

    pub fn weight(&self, e: &EdgeKey) -> Option<f64> {
        self.edges.get(e).copied()
    }

    /// Drop weights, keeping the edge set.
    pub fn to_unweighted_edges(&self) -> BTreeSet<EdgeKey> {
        self.edges.keys().copied().collect()
    }

    /// The weighted directed graph of one relation.
    pub fn per_relation_subgraph(&self, r: usize) -> Result<WeightedDigraph> {
        if r >= self.n_relations {
            return Err(Error::Vocab(format!(
                "relation id {r} out of range (|R| = {})",
                self.n_relations
            )));
        }
        let arcs = self
            .edges
            .iter()
            .filter(|(e, _)| e.relation == r)
            .map(|(e, &w)| ((e.subject, e.object), w))
            .collect();
        Ok(WeightedDigraph { n: self.n_nodes(), arcs })
    }
}

/// Plain directed graph on `0..n`, no labels, no weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    pub n: usize,
    pub arcs: BTreeSet<(usize, usize)>,
}

impl Digraph {
    pub fn new(n: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Digraph { n, arcs: arcs.into_iter().collect() }
    }
}

/// Directed graph with one weight per arc.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    pub n: usize,
    pub arcs: BTreeMap<(usize, usize), f64>,
}

impl WeightedDigraph {
    pub fn new(n: usize, arcs: impl IntoIterator<Item = ((usize, usize), f64)>) -> Self {
        WeightedDigraph { n, arcs: arcs.into_iter().collect() }
    }
}

/// Per-node normalized bounding boxes `(x0, y0, x1, y1)`, all coordinates
/// in `[0, 1]`. y grows downward (image convention).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    boxes: Vec<[f64; 4]>,
}

impl Layout {
    pub fn new(boxes: Vec<[f64; 4]>) -> Result<Self> {
        for (i, b) in boxes.iter().enumerate() {
            for &c in b {
                if !(0.0..=1.0).contains(&c) || !c.is_finite() {
                    return Err(Error::Graph(format!(
                        "box {i} coordinate {c} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(Layout { boxes })
    }

    pub fn n_boxes(&self) -> usize {
        self.boxes.len()
    }

    pub fn boxes(&self) -> &[[f64; 4]] {
        &self.boxes
    }

    /// Check this layout against its companion graph's node count.
    pub fn check_matches(&self, n_nodes: usize) -> Result<()> {
        if self.boxes.len() != n_nodes {
            return Err(Error::Shape(format!(
                "layout has {} boxes for a graph with {n_nodes} nodes",
                self.boxes.len()
            )));
        }
        Ok(())
    }
}
